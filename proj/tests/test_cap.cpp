#include "capflow/cap.hpp"
#include "capflow/errors.hpp"
#include "capflow/numerics.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace capflow;

namespace {
const double kLens = kPi * (8.0 - 5.0 * std::sqrt(2.0)) / 6.0;
}

TEST_CASE("cap center") {
  CHECK(cap_center(CapParams{0.5 * kPi, 1.0, 2}) == doctest::Approx(std::sqrt(2.0)));
  CHECK(cap_center(CapParams{kPi / 3, 1e-9, 2}) == doctest::Approx(1.0).epsilon(1e-8));
  for (double r : {0.1, 0.7, 3.0, 40.0})
    CHECK(cap_center(CapParams{0.5 * kPi, r, 2}) == doctest::Approx(std::sqrt(1.0 + r * r)));
}

TEST_CASE("cap parameters are validated") {
  CHECK_THROWS_AS(CapParams({0.0, 1.0, 2}).validate(), InvalidInput);
  CHECK_THROWS_AS(CapParams({2.0, 1.0, 2}).validate(), InvalidInput);
  CHECK_THROWS_AS(CapParams({1.0, -1.0, 2}).validate(), InvalidInput);
  CHECK_THROWS_AS(CapParams({1.0, 1.0, 1}).validate(), InvalidInput);
  CHECK_NOTHROW(CapParams({1.0, kInfinity, 3}).validate());
}

TEST_CASE("cap graphs at theta = pi/2") {
  const HemisphereGrid g(GridMode::axisym, 2, 64);
  for (double u : cap_graph(CapParams{0.5 * kPi, kInfinity, 2}, g).u) CHECK(std::abs(u) < 1e-15);
  const GraphState s = cap_graph(CapParams{0.5 * kPi, 0.8, 2}, g);
  for (double u : s.u) CHECK(u == doctest::Approx(s.u[0]).epsilon(1e-10));
  const HemisphereGrid f(GridMode::full2d, 2, 16, 16);
  const GraphState sf = cap_graph(CapParams{0.5 * kPi, 0.8, 2}, f);
  for (double u : sf.u) CHECK(u == doctest::Approx(s.u[0]).epsilon(1e-10));
}

TEST_CASE("cap profiles meet the boundary condition") {
  for (double theta : {0.4, kPi / 3, 1.2, 0.5 * kPi})
    for (double r : {0.3, 1.0, 5.0, kInfinity}) {
      const CapParams p{theta, r, 2};
      const double q = cap_profile_slope(p, 0.5 * kPi);
      CHECK(q == doctest::Approx(-cos_angle(theta) * std::sqrt(1.0 + q * q)).epsilon(1e-8));
    }
}

TEST_CASE("cap quermassintegral oracles") {
  CHECK(cap_quermass(CapParams{0.5 * kPi, kInfinity, 2}, 0) == doctest::Approx(2.0 * kPi / 3.0).epsilon(1e-12));
  CHECK(cap_quermass(CapParams{0.5 * kPi, 1.0, 2}, 0) == doctest::Approx(kLens).epsilon(1e-12));
  CHECK(kLens == doctest::Approx(0.48637).epsilon(1e-4));
  CHECK(cap_quermass(CapParams{0.5 * kPi, kInfinity, 2}, 1) == doctest::Approx(kPi / 3.0).epsilon(1e-12));
}

TEST_CASE("lens volume by Monte Carlo") {
  std::mt19937_64 rng(2024);
  const double a = std::sqrt(0.5), z0 = std::sqrt(2.0) - 1.0;
  std::uniform_real_distribution<double> ux(-a, a), uz(z0, 1.0);
  const long samples = 10'000'000;
  long hits = 0;
  for (long i = 0; i < samples; ++i) {
    const double x = ux(rng), y = ux(rng), z = uz(rng);
    const double c = std::sqrt(2.0) - z;
    if (x * x + y * y + z * z <= 1.0 && x * x + y * y + c * c <= 1.0) ++hits;
  }
  const double volume = 4.0 * a * a * (1.0 - z0) * static_cast<double>(hits) / samples;
  CHECK(std::abs(volume - kLens) < 5e-4);
}

TEST_CASE("radius from quermassintegral") {
  CHECK(cap_radius_from_quermass(0.5 * kPi, 2, 0, kLens) == doctest::Approx(1.0).epsilon(1e-7));
  const double limit = cap_quermass_upper_limit(0.5 * kPi, 2, 0);
  CHECK(cap_radius_from_quermass(0.5 * kPi, 2, 0, limit - 1e-9) > 1e3);
  CHECK(cap_radius_from_quermass(0.5 * kPi, 2, 0, limit - 1e-9) >
        cap_radius_from_quermass(0.5 * kPi, 2, 0, limit - 1e-6));
  CHECK_THROWS_AS(cap_radius_from_quermass(0.5 * kPi, 2, 0, limit * 1.01), OutOfRange);

  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> t(0.3, 0.5 * kPi), frac(0.01, 0.99);
  for (int i = 0; i < 100; ++i) {
    const double theta = t(rng);
    const int n = 2 + i % 2;
    const int k = i % (n + 1);
    const double v = frac(rng) * cap_quermass_upper_limit(theta, n, k);
    const double r = cap_radius_from_quermass(theta, n, k, v);
    CHECK(cap_quermass(CapParams{theta, r, n}, k) == doctest::Approx(v).epsilon(1e-8));
  }
}

TEST_CASE("profile functions increase with the radius") {
  std::mt19937_64 rng(37);
  std::uniform_real_distribution<double> lr(std::log(0.05), std::log(50.0));
  for (double theta : {kPi / 3, 0.5 * kPi})
    for (int n : {2, 3})
      for (int i = 0; i < 50; ++i) {
        double r1 = std::exp(lr(rng)), r2 = std::exp(lr(rng));
        if (r1 > r2) std::swap(r1, r2);
        if (r2 / r1 < 1.0001) continue;
        for (int k = 0; k <= n; ++k)
          CHECK(cap_quermass(CapParams{theta, r1, n}, k) < cap_quermass(CapParams{theta, r2, n}, k));
      }
}

TEST_CASE("caps are the equality case") {
  for (double theta : {kPi / 3, 0.5 * kPi})
    for (int n : {2, 3})
      for (double r : {0.2, 0.9, 4.0, 30.0}) {
        const double w0 = cap_quermass(CapParams{theta, r, n}, 0);
        const double back = cap_radius_from_quermass(theta, n, 0, w0);
        for (int k = 1; k < n; ++k) {
          const double fk = cap_quermass(CapParams{theta, r, n}, k);
          CHECK(std::abs(fk - cap_quermass(CapParams{theta, back, n}, k)) < 1e-9 * std::max(1.0, fk));
        }
      }
}

TEST_CASE("one sign convention passes the cap derivative test") {
  int passing = 0;
  for (BoundarySign s : {BoundarySign::general_as_typeset, BoundarySign::free_boundary_as_typeset}) {
    bool ok = true;
    for (double theta : {kPi / 3, 0.5 * kPi})
      for (double r : {0.5, 1.0, 2.0})
        for (double d : cap_variational_defect(theta, r, 2, s)) ok = ok && d < 0.01;
    passing += ok;
  }
  CHECK(passing == 1);
  bool chosen_ok = true;
  for (double d : cap_variational_defect(kPi / 3, 1.0, 3, resolved_boundary_sign())) chosen_ok = chosen_ok && d < 0.01;
  CHECK(chosen_ok);
}

TEST_CASE("shell deltas") {
  const ShellDeltas d = shell_deltas(0.5 * kPi, 1.0, 2.0);
  CHECK(d.d1 == doctest::Approx(0.29289).epsilon(1e-5));
  CHECK(d.d4 == doctest::Approx(0.70711).epsilon(1e-5));
  CHECK(d.d2 == doctest::Approx(0.14645).epsilon(1e-4));
  CHECK(d.d3 == doctest::Approx(d.d1));
  for (double theta : {0.3, kPi / 3, 0.5 * kPi})
    for (double r : {0.2, 1.0, 5.0}) {
      const ShellDeltas s = shell_deltas(theta, r, 2 * r);
      CHECK(s.d0 > 0.0);
      CHECK(cos_angle(theta) + s.d0 <= 1.0 - s.d3 + 1e-15);
    }
  CHECK(shell_deltas(kPi / 3, 1.0, kInfinity).d0 == 0.0);
  CHECK_THROWS_AS(shell_deltas(kPi / 3, 2.0, 1.0), InvalidInput);
}

TEST_CASE("shell radii of a cap") {
  const HemisphereGrid g(GridMode::axisym, 2, 64);
  const GraphState s = cap_graph(CapParams{kPi / 3, 1.3, 2}, g);
  const ShellRadii sh = shell_radii(s, g, kPi / 3);
  CHECK(sh.R1 == doctest::Approx(1.3).epsilon(1e-8));
  CHECK(sh.R2 == doctest::Approx(1.3).epsilon(1e-8));
  CHECK(shell_violation(s, g, kPi / 3, ShellRadii{1.0, 2.0}) <= 0.0);
  CHECK(shell_violation(s, g, kPi / 3, ShellRadii{1.5, 2.0}) > 0.0);
}
