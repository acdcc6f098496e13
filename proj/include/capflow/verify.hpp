#pragma once

#include "capflow/cap.hpp"
#include "capflow/flow.hpp"
#include "capflow/grid.hpp"
#include "capflow/surface.hpp"
#include "capflow/trajectory.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace capflow {

// discretization budget C h^2, with C calibrated on exact caps of radii 0.4, 0.8, 1.6, 3.2
struct DiscBudget {
  double C = 0.0;
  double h = 0.0;
  double tol = 0.0;
};
// for the AF slack of index k
DiscBudget af_budget(const HemisphereGrid& grid, double theta, int k);
// for pointwise quantities built from x and nu (the estimates of the cap shell)
DiscBudget normal_budget(const HemisphereGrid& grid, double theta);

// W_k - f_k(f_0^{-1}(W_0)); volumes within volume_tol above the flat-ball limit count as flat
double af_check(const SurfaceSample& sample, int k, double theta, double volume_tol = -1.0);

struct EstimateBundle {
  double R1 = 0.0, R2 = kInfinity;
  ShellDeltas delta;
};
EstimateBundle estimate_bundle(double R1, double R2, double theta);

struct EstimateReport {
  EstimateBundle bundle;
  double tol = 0.0;
  double x_minus_e_nu_min = 0.0;  // min <x - e, nu>
  double xe_nu_min = 0.0;         // min <X_e, nu>
  double x_e_min = 0.0, x_e_max = 0.0;
  double e_nu_max = 0.0;          // max <e, nu>
  // measured minus predicted, >= -tol when the inequality holds
  double slack1 = 0.0, slack2 = 0.0, slack0 = 0.0, slack3 = 0.0, slack4 = 0.0;
  bool pass = false;
};
// throws ShellViolation when the state is not bracketed by the caps R1, R2
EstimateReport estimates_check(const SurfaceSample& sample, const GraphState& state, const EstimateBundle& bundle,
                               double theta, double tol);

struct MonotonicityReport {
  double max_drift = 0.0;            // max |W_0(t) - W_0(0)| / W_0(0)
  std::vector<long> violations;      // per k = 1 .. n-1
  double worst_increase = 0.0;       // largest relative per-step increase of W_1
  bool dissipation_applicable = false;
  double window_t0 = 0.0, window_t1 = 0.0;
  double dW1 = 0.0, dissipation_integral = 0.0;
  double dissipation_rel_error = 0.0;
};
// W_1 change over the middle third of the run against the trapezoidal time integral
// of the dissipation column
MonotonicityReport monotonicity_report(const TrajectoryRecord& traj, double slack = 1e-8);

struct ConvergenceReport {
  bool converged = false;
  double r_inf = 0.0;
  double final_dist = 0.0;
  double final_maxF = 0.0;
  bool tail_monotone = false;
  long tail_increases = 0;
  double kappa_min_inf = 0.0;  // infimum over recorded rows
};
ConvergenceReport convergence_check(const TrajectoryRecord& traj, double theta, const HemisphereGrid& grid);

struct OrderRow {
  std::string quantity;
  double theta = 0.0;
  double r = 0.0;
  int k = -1;
  std::vector<double> errors;
  std::vector<double> orders;  // infinite once the error reaches roundoff
  bool exact = false;
  double min_order = 0.0;
  double required = 1.9;
  double floor = 1.5;
  bool pass = false;
};

struct SignOutcome {
  BoundarySign chosen = BoundarySign::general_as_typeset;
  double defect_general = 0.0;  // max over the cap family and k
  double defect_free = 0.0;
  int passing = 0;
  double free_boundary_agreement = 0.0;  // max relative gap at theta = pi/2
};
SignOutcome sign_outcome();

struct ConsistencyReport {
  std::vector<HemisphereGrid> levels;
  std::vector<OrderRow> rows;
  SignOutcome sign;
  double min_order = 0.0;
  bool pass = false;
};
// refinement study on caps at theta in {pi/3, pi/2}, r in {0.5, 1, 2}, plus boundary
// relations on a perturbed cap and the speed compatibility after a short mct run;
// throws OrderRegression below the row floor
ConsistencyReport consistency_suite(const std::vector<HemisphereGrid>& levels, bool throw_on_regression = true);

// observed orders of an error sequence; errors below err_floor count as exact
OrderRow order_row(std::string quantity, const std::vector<double>& errors, const std::vector<double>& h,
                   double err_floor = 1e-9);

// cap plus amplitude * cos(2 m beta + phase), projected onto the boundary condition
GraphState perturbed_cap(const CapParams& cap, const HemisphereGrid& grid, double amplitude, int wavenumber,
                         double phase = 0.0);

struct PerturbationSpec {
  double theta = 0.0;
  int n = 2;
  double r = 1.0;
  std::vector<double> amplitudes;  // coefficient of cos(2 m beta), m = 1, 2, ...
};
PerturbationSpec random_perturbation(double theta, int n, std::uint64_t seed);
GraphState perturbation_state(const PerturbationSpec& spec, const HemisphereGrid& grid);

struct RandomSample {
  PerturbationSpec spec;
  int smoothing_steps = 0;
  int attempts = 0;
  GraphState state;
  SurfaceSample sample;
};
// perturbed cap, smoothed by mcf steps (random count in [10, 50] when steps < 0),
// redrawn until strictly convex
RandomSample random_convex_sample(double theta, const HemisphereGrid& grid, std::uint64_t seed,
                                  int smoothing_steps = -1);

// max over the equator of |nabla_mu f - (1/sin theta + cot theta h_mumu) f| for the mct speed
double compatibility_residual(const GraphState& state, const HemisphereGrid& grid, double theta);

}  // namespace capflow
