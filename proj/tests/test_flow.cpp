#include "capflow/cap.hpp"
#include "capflow/errors.hpp"
#include "capflow/flow.hpp"
#include "capflow/numerics.hpp"
#include "capflow/quermass.hpp"
#include "capflow/surface.hpp"
#include "capflow/verify.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace capflow;

namespace {

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

FlowConfig config(double theta, int N, FlowMode mode = FlowMode::mct) {
  FlowConfig c;
  c.theta = theta;
  c.mode = mode;
  c.grid = HemisphereGrid(GridMode::axisym, 2, N);
  return c;
}

}  // namespace

TEST_CASE("oblique boundary slope") {
  CHECK(oblique_slope(0.5 * kPi, 0.0) == 0.0);
  CHECK(oblique_slope(kPi / 3, 0.0) == doctest::Approx(-1.0 / std::sqrt(3.0)).epsilon(1e-14));
  for (double theta : {0.2, kPi / 3, 1.4})
    for (double q : {0.0, 0.3, 2.0}) {
      const double p = oblique_slope(theta, q);
      CHECK(p == doctest::Approx(-cos_angle(theta) * std::sqrt(1 + p * p + q * q)).epsilon(1e-13));
      int iters = 0;
      CHECK(oblique_slope_newton(theta, q, 0.0, &iters) == doctest::Approx(p).epsilon(1e-13));
      CHECK(iters < 10);
    }
  CHECK_THROWS_AS(oblique_slope(0.0, 0.0), ObliquenessViolated);
  CHECK_THROWS_AS(oblique_slope(2.0, 0.0), ObliquenessViolated);
  CHECK_THROWS_AS(enforce_bc(make_state(HemisphereGrid()), HemisphereGrid(), 1.8), ObliquenessViolated);
}

TEST_CASE("discrete boundary condition on caps") {
  for (double theta : {kPi / 3, 0.5 * kPi}) {
    std::vector<double> err, h;
    for (int N : {64, 128, 256}) {
      const HemisphereGrid g(GridMode::axisym, 2, N);
      err.push_back(bc_residual(cap_graph(CapParams{theta, 1.0, 2}, g), g, theta));
      h.push_back(g.h_beta());
    }
    CHECK(err.back() < 1e-6);
    CHECK(order_row("bc", err, h).min_order >= 1.9);
  }
}

TEST_CASE("projection enforces the boundary condition") {
  const HemisphereGrid g(GridMode::axisym, 2, 128);
  GraphState s = make_state(g, 0.1);
  for (int i = 0; i < g.n_beta; ++i) s.u[i] += 0.05 * std::cos(3 * g.beta(i));
  const GraphState p = project_bc(s, g, kPi / 3);
  CHECK(bc_residual(p, g, kPi / 3) < 1e-12);
  for (int i = 0; i < g.n_beta - 2; ++i) CHECK(p.u[i] == s.u[i]);
  const HemisphereGrid f(GridMode::full2d, 2, 32, 32);
  GraphState sf = make_state(f, 0.0);
  for (int i = 0; i < f.n_beta; ++i)
    for (int j = 0; j < f.n_xi; ++j) sf.u[f.index(i, j)] = 0.05 * std::cos(2 * f.beta(i)) * (1 + 0.3 * std::cos(f.xi(j)));
  CHECK(bc_residual(project_bc(sf, f, kPi / 3), f, kPi / 3) < 1e-10);
}

TEST_CASE("flat state at theta = pi/2 is exactly stationary") {
  for (const HemisphereGrid& g : {HemisphereGrid(GridMode::axisym, 2, 64), HemisphereGrid(GridMode::full2d, 2, 16, 16),
                                  HemisphereGrid(GridMode::axisym, 3, 64)}) {
    const GraphState s = enforce_bc(make_state(g, 0.0), g, 0.5 * kPi);
    CHECK(max_abs(scalar_rhs(s, g, 0.5 * kPi)) == 0.0);
  }
}

TEST_CASE("cap stationarity") {
  std::vector<double> err, h;
  for (int N : {64, 128, 256}) {
    const HemisphereGrid g(GridMode::axisym, 2, N);
    err.push_back(max_abs(scalar_rhs(cap_graph(CapParams{kPi / 3, 2.0, 2}, g), g, kPi / 3)));
    h.push_back(g.h_beta());
  }
  CHECK(err.back() < 1e-5);
  CHECK(order_row("stationarity", err, h).min_order >= 1.9);
  std::vector<double> e2, h2;
  for (int N : {16, 32, 64}) {
    const HemisphereGrid g(GridMode::full2d, 2, N, N);
    e2.push_back(max_abs(scalar_rhs(cap_graph(CapParams{kPi / 3, 2.0, 2}, g), g, kPi / 3)));
    h2.push_back(g.h_beta());
  }
  CHECK(order_row("stationarity", e2, h2).min_order >= 1.9);
}

TEST_CASE("normal speed on caps and the flat ball") {
  const HemisphereGrid g(GridMode::axisym, 2, 128);
  for (double r : {0.5, 2.0}) {
    const SurfaceSample s = reconstruct(cap_graph(CapParams{kPi / 3, r, 2}, g), g);
    CHECK(max_abs(normal_speed(s, FlowMode::mct, kPi / 3)) < 1e-6);
    for (double f : normal_speed(s, FlowMode::mcf, kPi / 3)) CHECK(f == doctest::Approx(-2.0 / r).epsilon(1e-6));
  }
  const SurfaceSample flat = reconstruct(cap_graph(CapParams{kPi / 3, kInfinity, 2}, g), g);
  CHECK(max_abs(normal_speed(flat, FlowMode::mct, kPi / 3)) < 1e-6);
}

TEST_CASE("scalar speed against the geometric speed") {
  for (double theta : {kPi / 3, 0.5 * kPi}) {
    CHECK(fitted_speed_factor(HemisphereGrid(GridMode::axisym, 2, 128), theta, FlowMode::mct) ==
          doctest::Approx(-1.0).epsilon(1e-4));
    CHECK(fitted_speed_factor(HemisphereGrid(GridMode::axisym, 2, 128), theta, FlowMode::mcf) ==
          doctest::Approx(-1.0).epsilon(1e-4));
  }
  // F = -f v (cosh u + cos beta) nodewise in the interior
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const double theta = seed % 2 ? kPi / 3 : 0.5 * kPi;
    std::vector<double> gap;
    for (int N : {128, 256}) {
      const HemisphereGrid g(GridMode::axisym, 2, N);
      const GraphState s = perturbation_state(random_perturbation(theta, 2, seed), g);
      const RhsDetail d = scalar_rhs_detail(s, g, theta, FlowMode::mct);
      const auto f = normal_speed(reconstruct(s, g), FlowMode::mct, theta);
      double worst = 0.0;
      for (int i = 1; i < N - 1; ++i) {
        const double A = std::cosh(s.u[i]) + std::cos(g.beta(i));
        worst = std::max(worst, std::abs(d.F[i] + f[i] * d.v[i] * A));
      }
      gap.push_back(worst);
    }
    CHECK(gap.back() < 1e-4);
    CHECK(gap.front() / gap.back() > 3.0);
  }
}

TEST_CASE("one step from a cap") {
  for (Scheme sch : {Scheme::explicit_euler, Scheme::imex}) {
    FlowConfig c = config(kPi / 3, 128);
    c.scheme = sch;
    FlowState s;
    s.graph = cap_graph(CapParams{kPi / 3, 1.0, 2}, c.grid);
    const double F = max_abs(scalar_rhs(s.graph, c.grid, kPi / 3));
    const FlowState next = step(s, c, prepare_run(c, s.graph));
    double change = 0.0;
    for (std::size_t k = 0; k < s.graph.u.size(); ++k) change = std::max(change, std::abs(next.graph.u[k] - s.graph.u[k]));
    CHECK(change <= 2.0 * next.dt_last * F + 1e-15);
    CHECK(next.step_index == 1);
    CHECK(next.graph.t == doctest::Approx(next.dt_last));
  }
}

TEST_CASE("volume drift per step") {
  FlowConfig c = config(0.5 * kPi, 128);
  const GraphState g0 = perturbed_cap(CapParams{0.5 * kPi, 1.0, 2}, c.grid, 0.1, 1);
  const RunContext ctx = prepare_run(c, g0);
  FlowState s;
  s.graph = g0;
  const double h2 = c.grid.h_beta() * c.grid.h_beta();
  double w = quermass_theta(reconstruct(g0, c.grid), 0, c.theta);
  for (int k = 0; k < 20; ++k) {
    s = step(s, c, ctx);
    const double wn = quermass_theta(reconstruct(s.graph, c.grid), 0, c.theta);
    CHECK(std::abs(wn - w) / w <= 10.0 * s.dt_last * h2);
    w = wn;
  }
}

TEST_CASE("mcf decreases area") {
  FlowConfig c = config(kPi / 3, 128, FlowMode::mcf);
  FlowState s;
  s.graph = cap_graph(CapParams{kPi / 3, 1.0, 2}, c.grid);
  const RunContext ctx = prepare_run(c, s.graph);
  double area = quermass_vector(reconstruct(s.graph, c.grid), c.theta).area;
  for (int k = 0; k < 20; ++k) {
    s = step(s, c, ctx);
    const double a = quermass_vector(reconstruct(s.graph, c.grid), c.theta).area;
    CHECK(a < area);
    area = a;
  }
}

TEST_CASE("run from a cap converges at the start") {
  FlowConfig c = config(kPi / 3, 128);
  c.stop_tol = 1e-4;
  const TrajectoryRecord r = run(c, cap_graph(CapParams{kPi / 3, 1.0, 2}, c.grid));
  CHECK(r.meta.converged);
  CHECK(r.final_step == 0);
  CHECK(r.rows.size() == 1);
  CHECK(r.meta.fitted_factor == doctest::Approx(-1.0).epsilon(1e-4));
}

TEST_CASE("time limit raises NotConverged with the trajectory") {
  FlowConfig c = config(0.5 * kPi, 64);
  c.t_max = 1e-3;
  const GraphState g0 = perturbed_cap(CapParams{0.5 * kPi, 1.0, 2}, c.grid, 0.1, 1);
  try {
    run(c, g0);
    FAIL("expected NotConverged");
  } catch (const NotConverged& e) {
    CHECK(e.trajectory.rows.size() > 1);
    CHECK(e.trajectory.meta.stop_reason == "t_max");
    CHECK(!e.trajectory.meta.converged);
  }
}

TEST_CASE("rows are recorded every monitor_every steps") {
  FlowConfig c = config(0.5 * kPi, 64);
  c.max_steps = 30;
  c.monitor_every = 10;
  const GraphState g0 = perturbed_cap(CapParams{0.5 * kPi, 1.0, 2}, c.grid, 0.1, 1);
  long rows = 0;
  RunHooks hooks;
  hooks.on_row = [&](const TrajectoryRow&) { ++rows; };
  try {
    run(c, g0, hooks);
  } catch (const NotConverged& e) {
    CHECK(e.trajectory.meta.stop_reason == "max_steps");
    CHECK(static_cast<long>(e.trajectory.rows.size()) == rows);
    for (std::size_t i = 1; i < e.trajectory.rows.size(); ++i) {
      CHECK(e.trajectory.rows[i].step - e.trajectory.rows[i - 1].step == 10);
      CHECK(e.trajectory.rows[i].t > e.trajectory.rows[i - 1].t);
    }
  }
  CHECK(rows == 4);
}

TEST_CASE("explicit and imex agree") {
  const double theta = kPi / 3;
  FlowConfig c = config(theta, 64);
  c.stop_tol = 1e-6;
  const GraphState g0 = perturbed_cap(CapParams{theta, 1.0, 2}, c.grid, 0.1, 1, kPi);
  const TrajectoryRecord a = run(c, g0);
  c.scheme = Scheme::imex;
  const TrajectoryRecord b = run(c, g0);
  double gap = 0.0;
  for (std::size_t k = 0; k < a.final_graph.u.size(); ++k)
    gap = std::max(gap, std::abs(a.final_graph.u[k] - b.final_graph.u[k]));
  CHECK(gap < 1e-4);
  CHECK(a.meta.context.r_inf == doctest::Approx(b.meta.context.r_inf));
}

TEST_CASE("configuration checks and hash") {
  FlowConfig c = config(kPi / 3, 64);
  CHECK_NOTHROW(c.validate());
  FlowConfig bad = c;
  bad.imex_factor = 60;
  CHECK_THROWS_AS(bad.validate(), InvalidInput);
  bad = c;
  bad.dt_safety = 0;
  CHECK_THROWS_AS(bad.validate(), InvalidInput);
  bad = c;
  bad.stop_tol = -1;
  CHECK_THROWS_AS(bad.validate(), InvalidInput);
  FlowConfig other = c;
  other.t_max = 3;
  other.stop_tol = 1e-3;
  other.monitor_every = 7;
  CHECK(config_hash(other) == config_hash(c));
  other.theta = 1.0;
  CHECK(config_hash(other) != config_hash(c));
  CHECK(parse_scheme("imex") == Scheme::imex);
  CHECK_THROWS_AS(parse_scheme("rk4"), InvalidInput);
  CHECK_THROWS_AS(parse_flow_mode("fully_nonlinear"), InvalidInput);
}

TEST_CASE("explicit time step scales with h squared") {
  FlowConfig a = config(kPi / 3, 64), b = config(kPi / 3, 128);
  const double da = explicit_dt(cap_graph(CapParams{kPi / 3, 1.0, 2}, a.grid), a);
  const double db = explicit_dt(cap_graph(CapParams{kPi / 3, 1.0, 2}, b.grid), b);
  CHECK(da / db == doctest::Approx(4.0).epsilon(0.05));
}
