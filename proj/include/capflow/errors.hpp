#pragma once

#include <stdexcept>
#include <string>

namespace capflow {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// invalid user input or violated preconditions (CLI exit code 3)
struct InvalidInput : Error {
  using Error::Error;
};

struct SingularPoint : Error {
  using Error::Error;
};
struct InfiniteRadius : Error {
  using Error::Error;
};
struct OutOfRange : Error {
  using Error::Error;
};
struct ObliquenessViolated : InvalidInput {
  using InvalidInput::InvalidInput;
};
struct ShellViolation : Error {
  using Error::Error;
};

// numerical failures (CLI exit code 4)
struct NumericalFailure : Error {
  using Error::Error;
};
struct QuadratureFailure : NumericalFailure {
  using NumericalFailure::NumericalFailure;
};
struct DegenerateMetric : NumericalFailure {
  using NumericalFailure::NumericalFailure;
};
struct StepFailure : NumericalFailure {
  using NumericalFailure::NumericalFailure;
};
struct StarShapeLost : NumericalFailure {
  using NumericalFailure::NumericalFailure;
};
struct OrderRegression : NumericalFailure {
  using NumericalFailure::NumericalFailure;
};

}  // namespace capflow
