#include "capflow/verify.hpp"

#include "capflow/errors.hpp"
#include "capflow/numerics.hpp"
#include "capflow/quermass.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <random>
#include <tuple>

namespace capflow {

namespace {

const std::vector<double> kCalibrationRadii = {0.4, 0.8, 1.6, 3.2};

double flat_aware_inverse(double theta, int n, double w0, double volume_tol) {
  const double limit = cap_quermass_upper_limit(theta, n, 0);
  if (w0 < limit) return cap_radius_from_quermass(theta, n, 0, w0);
  if (w0 - limit <= volume_tol) return kInfinity;
  throw OutOfRange("volume exceeds the flat-ball limit by " + std::to_string(w0 - limit));
}

double slack_of(const std::vector<double>& W, int k, double theta, int n, double volume_tol) {
  const double r = flat_aware_inverse(theta, n, W[0], volume_tol);
  const double fk = r == kInfinity ? cap_quermass_upper_limit(theta, n, k) : cap_quermass(CapParams{theta, r, n}, k);
  return W[k] - fk;
}

template <class Fn>
DiscBudget cached_budget(const std::string& key, Fn compute) {
  static std::mutex mu;
  static std::map<std::string, DiscBudget> cache;
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  const DiscBudget b = compute();
  std::lock_guard<std::mutex> lock(mu);
  cache.emplace(key, b);
  return b;
}

std::string budget_key(const char* what, const HemisphereGrid& g, double theta, int k) {
  char buf[64];
  std::snprintf(buf, sizeof buf, ":%d:%.17g:%d", g.n, theta, k);
  return std::string(what) + g.spec() + buf;
}

double h_of(const HemisphereGrid& g) {
  return g.axisym() ? g.h_beta() : std::max(g.h_beta(), 0.5 * g.h_xi());
}

}  // namespace

DiscBudget af_budget(const HemisphereGrid& grid, double theta, int k) {
  if (k < 1 || k > grid.n - 1) throw InvalidInput("AF index k must lie in [1, n-1]");
  return cached_budget(budget_key("af:", grid, theta, k), [&] {
    double worst = 0.0;
    for (double r : kCalibrationRadii) {
      const SurfaceSample s = reconstruct(cap_graph(CapParams{theta, r, grid.n}, grid), grid);
      const auto W = quermass_vector(s, theta).W;
      worst = std::max(worst, std::abs(slack_of(W, k, theta, grid.n, kInfinity)));
    }
    DiscBudget b;
    b.h = h_of(grid);
    b.C = 4.0 * worst / (b.h * b.h);
    b.tol = b.C * b.h * b.h + 1e-12;
    return b;
  });
}

DiscBudget normal_budget(const HemisphereGrid& grid, double theta) {
  return cached_budget(budget_key("nu:", grid, theta, 0), [&] {
    double worst = 0.0;
    for (double r : kCalibrationRadii) {
      const CapParams p{theta, r, grid.n};
      const double c = cap_center(p);
      const SurfaceSample s = reconstruct(cap_graph(p, grid), grid);
      for (const auto& node : s.nodes) {
        Vec exact = node.x;
        exact(grid.n) -= c;
        exact /= r;
        worst = std::max(worst, (node.nu - exact).cwiseAbs().maxCoeff());
      }
    }
    DiscBudget b;
    b.h = h_of(grid);
    // |x - e| and |X_e| are at most 2 on the ball
    b.C = 8.0 * worst / (b.h * b.h);
    b.tol = b.C * b.h * b.h + 1e-12;
    return b;
  });
}

double af_check(const SurfaceSample& sample, int k, double theta, double volume_tol) {
  const int n = sample.dim();
  if (k < 1 || k > n - 1) throw InvalidInput("AF index k must lie in [1, n-1]");
  const double h = h_of(sample.grid);
  if (sample.kappa_min() < -h * h) throw InvalidInput("AF check needs a convex sample");
  if (volume_tol < 0.0) volume_tol = 1e-9 * cap_quermass_upper_limit(theta, n, 0);
  return slack_of(quermass_vector(sample, theta).W, k, theta, n, volume_tol);
}

EstimateBundle estimate_bundle(double R1, double R2, double theta) {
  EstimateBundle b;
  b.R1 = R1;
  b.R2 = R2;
  b.delta = shell_deltas(theta, R1, R2);
  if (cos_angle(theta) + b.delta.d0 > 1.0 - b.delta.d3 + 1e-12)
    throw InvalidInput("shell constants violate cos theta + delta0 <= 1 - delta3");
  return b;
}

EstimateReport estimates_check(const SurfaceSample& sample, const GraphState& state, const EstimateBundle& bundle,
                               double theta, double tol) {
  if (!(sample.kappa_min() > 0.0)) throw InvalidInput("estimates need a strictly convex sample");
  const double viol = shell_violation(state, sample.grid, theta, ShellRadii{bundle.R1, bundle.R2});
  if (viol > tol) throw ShellViolation("sample leaves the cap shell by " + std::to_string(viol));
  const int n = sample.dim();
  const double ct = cos_angle(theta);
  EstimateReport r;
  r.bundle = bundle;
  r.tol = tol;
  r.x_minus_e_nu_min = r.xe_nu_min = r.x_e_min = std::numeric_limits<double>::infinity();
  r.x_e_max = r.e_nu_max = -std::numeric_limits<double>::infinity();
  for (const auto& node : sample.nodes) {
    const double xe = node.x(n), enu = node.nu(n);
    r.x_minus_e_nu_min = std::min(r.x_minus_e_nu_min, node.x.dot(node.nu) - enu);
    r.xe_nu_min = std::min(r.xe_nu_min, node.xe_nu);
    r.x_e_min = std::min(r.x_e_min, xe);
    r.x_e_max = std::max(r.x_e_max, xe);
    r.e_nu_max = std::max(r.e_nu_max, enu);
  }
  const ShellDeltas& d = bundle.delta;
  r.slack1 = r.x_minus_e_nu_min - d.d1;
  r.slack2 = r.xe_nu_min - d.d2;
  r.slack0 = r.x_e_min - (ct + d.d0);
  r.slack3 = (1.0 - d.d3) - r.x_e_max;
  r.slack4 = -d.d4 - r.e_nu_max;
  r.pass = std::min({r.slack0, r.slack1, r.slack2, r.slack3, r.slack4}) >= -tol;
  return r;
}

MonotonicityReport monotonicity_report(const TrajectoryRecord& traj, double slack) {
  const auto& rows = traj.rows;
  if (rows.empty()) throw InvalidInput("empty trajectory");
  const int n = static_cast<int>(rows.front().W.size()) - 1;
  MonotonicityReport m;
  m.violations.assign(std::max(0, n - 1), 0);
  const double w0 = rows.front().W[0];
  for (std::size_t i = 0; i < rows.size(); ++i) {
    m.max_drift = std::max(m.max_drift, std::abs(rows[i].W[0] - w0) / std::abs(w0));
    if (i == 0) continue;
    const double steps = std::max<long>(1, rows[i].step - rows[i - 1].step);
    for (int k = 1; k <= n - 1; ++k) {
      const double prev = rows[i - 1].W[k];
      const double inc = (rows[i].W[k] - prev) / std::abs(prev);
      if (k == 1) m.worst_increase = std::max(m.worst_increase, inc);
      if (inc > slack * steps) ++m.violations[k - 1];
    }
  }
  const double T0 = rows.front().t, T = rows.back().t - T0;
  std::size_t a = 0, b = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].t - T0 <= T / 3.0) a = i;
    if (rows[i].t - T0 <= 2.0 * T / 3.0) b = i;
  }
  m.window_t0 = rows[a].t;
  m.window_t1 = rows[b].t;
  if (b > a + 1) {
    m.dW1 = rows[b].W[1] - rows[a].W[1];
    for (std::size_t i = a; i < b; ++i)
      m.dissipation_integral += 0.5 * (rows[i].dissipation + rows[i + 1].dissipation) * (rows[i + 1].t - rows[i].t);
    if (std::abs(m.dissipation_integral) > 1e-12) {
      m.dissipation_applicable = true;
      m.dissipation_rel_error = std::abs(m.dW1 - m.dissipation_integral) / std::abs(m.dissipation_integral);
    }
  }
  if (!m.dissipation_applicable) m.dissipation_rel_error = std::numeric_limits<double>::quiet_NaN();
  return m;
}

ConvergenceReport convergence_check(const TrajectoryRecord& traj, double theta, const HemisphereGrid& grid) {
  const auto& rows = traj.rows;
  if (rows.empty()) throw InvalidInput("empty trajectory");
  ConvergenceReport c;
  c.converged = traj.meta.converged;
  const int n = grid.n;
  const double w0 = traj.meta.context.w0_initial > 0.0 ? traj.meta.context.w0_initial : rows.front().W[0];
  c.r_inf = flat_aware_inverse(theta, n, w0, 1e-9 * cap_quermass_upper_limit(theta, n, 0));
  const GraphState ref = cap_graph(CapParams{theta, c.r_inf, n}, grid);
  if (traj.final_graph.u.size() != ref.u.size()) throw InvalidInput("trajectory does not match the grid");
  for (std::size_t k = 0; k < ref.u.size(); ++k)
    c.final_dist = std::max(c.final_dist, std::abs(traj.final_graph.u[k] - ref.u[k]));
  c.final_maxF = rows.back().maxF;
  c.kappa_min_inf = std::numeric_limits<double>::infinity();
  for (const auto& r : rows) c.kappa_min_inf = std::min(c.kappa_min_inf, r.kappa_min);
  for (std::size_t i = rows.size() / 2 + 1; i < rows.size(); ++i)
    if (rows[i].dist_to_cap > rows[i - 1].dist_to_cap + 1e-9) ++c.tail_increases;
  c.tail_monotone = c.tail_increases == 0;
  return c;
}

OrderRow order_row(std::string quantity, const std::vector<double>& errors, const std::vector<double>& h,
                   double err_floor) {
  OrderRow row;
  row.quantity = std::move(quantity);
  row.errors = errors;
  row.exact = true;
  for (double e : errors) row.exact = row.exact && std::abs(e) < err_floor;
  row.min_order = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < errors.size(); ++i) {
    const double e1 = std::abs(errors[i]), e2 = std::abs(errors[i + 1]);
    double p;
    if (e2 < err_floor) {
      p = std::numeric_limits<double>::infinity();
    } else {
      p = observed_order(e1, e2, h[i], h[i + 1]);
    }
    row.orders.push_back(p);
    row.min_order = std::min(row.min_order, p);
  }
  row.pass = row.exact || row.min_order >= row.required;
  return row;
}

SignOutcome sign_outcome() {
  SignOutcome s;
  s.chosen = resolved_boundary_sign();
  for (BoundarySign sign : {BoundarySign::general_as_typeset, BoundarySign::free_boundary_as_typeset}) {
    double worst = 0.0;
    for (int n : {2, 3, 4})
      for (double theta : {kPi / 3, 0.7, kPi / 2})
        for (double r : {0.5, 1.0, 2.0})
          for (double d : cap_variational_defect(theta, r, n, sign)) worst = std::max(worst, d);
    (sign == BoundarySign::general_as_typeset ? s.defect_general : s.defect_free) = worst;
    if (worst < 0.01) ++s.passing;
  }
  for (int n : {2, 3, 4})
    for (double r : {0.5, 1.0, 2.0}) {
      const QuermassParts parts = cap_parts(CapParams{kPi / 2, r, n});
      const auto a = assemble_quermass(parts, kPi / 2, n, s.chosen);
      const auto b = assemble_quermass_free_boundary(parts, n, s.chosen);
      for (int k = 0; k <= n; ++k)
        s.free_boundary_agreement = std::max(s.free_boundary_agreement, std::abs(a[k] - b[k]) / std::abs(b[k]));
    }
  return s;
}

ConsistencyReport consistency_suite(const std::vector<HemisphereGrid>& levels, bool throw_on_regression) {
  if (levels.size() < 3) throw InvalidInput("consistency suite needs at least 3 grid levels");
  std::vector<double> h;
  for (const auto& g : levels) {
    if (g.mode != levels.front().mode || g.n != levels.front().n)
      throw InvalidInput("grid levels must share mode and dimension");
    h.push_back(h_of(g));
  }
  for (std::size_t i = 0; i + 1 < h.size(); ++i)
    if (!(h[i + 1] < h[i])) throw InvalidInput("grid levels must be strictly refining (identical spacing given)");

  ConsistencyReport rep;
  rep.levels = levels;
  const int n = levels.front().n;
  const std::size_t L = levels.size();

  struct CapCase {
    double theta, r;
  };
  std::vector<CapCase> cases;
  for (double theta : {kPi / 3, kPi / 2})
    for (double r : {0.5, 1.0, 2.0}) cases.push_back({theta, r});

  // per case: stationarity, curvature, Minkowski k = 1..n, W_k k = 0..n
  const std::size_t per = 2 + n + (n + 1);
  std::vector<std::vector<double>> err(cases.size() * per, std::vector<double>(L, 0.0));
  parallel_for(
      cases.size() * L,
      [&](std::size_t lo, std::size_t hi) {
        for (std::size_t job = lo; job < hi; ++job) {
          const std::size_t c = job / L, l = job % L;
          const CapParams p{cases[c].theta, cases[c].r, n};
          const HemisphereGrid& g = levels[l];
          const GraphState st = cap_graph(p, g);
          double mf = 0.0;
          for (double f : scalar_rhs(st, g, p.theta)) mf = std::max(mf, std::abs(f));
          const SurfaceSample s = reconstruct(st, g);
          double ke = 0.0;
          for (const auto& node : s.nodes) ke = std::max(ke, (node.kappa.array() - 1.0 / p.r).abs().maxCoeff());
          std::size_t q = c * per;
          err[q++][l] = mf;
          err[q++][l] = ke;
          for (int k = 1; k <= n; ++k) err[q++][l] = minkowski_residual(s, k, p.theta);
          const auto W = quermass_vector(s, p.theta).W;
          for (int k = 0; k <= n; ++k) err[q++][l] = W[k] - cap_quermass(p, k);
        }
      },
      1);

  for (std::size_t c = 0; c < cases.size(); ++c) {
    std::size_t q = c * per;
    auto push = [&](const std::string& name, int k) {
      OrderRow row = order_row(name, err[q++], h);
      row.theta = cases[c].theta;
      row.r = cases[c].r;
      row.k = k;
      rep.rows.push_back(std::move(row));
    };
    push("cap_stationarity", -1);
    push("curvature", -1);
    for (int k = 1; k <= n; ++k) push("minkowski", k);
    for (int k = 0; k <= n; ++k) push("quermass", k);
  }

  // boundary relations on a perturbed cap; these hold at first order
  {
    const CapParams p{kPi / 3, 1.0, n};
    std::vector<std::vector<double>> b(6, std::vector<double>(L, 0.0));
    for (std::size_t l = 0; l < L; ++l) {
      const GraphState st = perturbed_cap(p, levels[l], 0.05, 1);
      const BoundaryRelations rel = boundary_relations(boundary_frame(reconstruct(st, levels[l])), p.theta);
      b[0][l] = rel.angle;
      b[1][l] = rel.frame;
      b[2][l] = rel.principal;
      b[3][l] = rel.hhat;
      b[4][l] = rel.htilde;
      b[5][l] = rel.codazzi;
    }
    const char* names[] = {"boundary_angle", "boundary_frame", "boundary_principal",
                           "boundary_hhat",  "boundary_htilde", "boundary_codazzi"};
    for (int i = 0; i < 6; ++i) {
      OrderRow row = order_row(names[i], b[i], h);
      row.theta = p.theta;
      row.r = p.r;
      row.required = 1.0;
      row.floor = 0.75;
      rep.rows.push_back(std::move(row));
    }
  }
  // the speed compatibility holds along the flow only: short explicit mct runs
  for (double theta : {kPi / 3, kPi / 2}) {
    std::vector<double> e(L, 0.0);
    for (std::size_t l = 0; l < L; ++l) {
      FlowConfig cfg;
      cfg.theta = theta;
      cfg.grid = levels[l];
      cfg.t_max = 0.02;
      cfg.stop_tol = 1e-14;
      cfg.monitor_every = 1 << 30;
      TrajectoryRecord rec;
      try {
        rec = run(cfg, perturbed_cap(CapParams{theta, 1.0, n}, levels[l], 0.05, 1, kPi));
      } catch (const NotConverged& nc) {
        rec = nc.trajectory;
      }
      e[l] = compatibility_residual(rec.final_graph, levels[l], theta);
    }
    OrderRow row = order_row("speed_compatibility", e, h);
    row.theta = theta;
    row.r = 1.0;
    row.required = 1.0;
    row.floor = 0.75;
    rep.rows.push_back(std::move(row));
  }

  rep.sign = sign_outcome();
  rep.min_order = std::numeric_limits<double>::infinity();
  rep.pass = rep.sign.passing == 1;
  std::string regressed;
  for (auto& row : rep.rows) {
    row.pass = row.exact || row.min_order >= row.required;
    rep.pass = rep.pass && row.pass;
    if (row.required >= 1.9) rep.min_order = std::min(rep.min_order, row.min_order);
    if (!row.exact && row.min_order < row.floor && regressed.empty()) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "%s (theta=%.4f r=%.3g k=%d) order %.3f below %.2f", row.quantity.c_str(),
                    row.theta, row.r, row.k, row.min_order, row.floor);
      regressed = buf;
    }
  }
  if (!regressed.empty() && throw_on_regression) throw OrderRegression(regressed);
  return rep;
}

GraphState perturbed_cap(const CapParams& cap, const HemisphereGrid& grid, double amplitude, int wavenumber,
                         double phase) {
  if (!(amplitude >= 0.0)) throw InvalidInput("amplitude must be >= 0");
  if (wavenumber < 1) throw InvalidInput("wavenumber must be >= 1");
  GraphState s = cap_graph(cap, grid);
  for (int i = 0; i < grid.n_beta; ++i) {
    const double d = amplitude * std::cos(2.0 * wavenumber * grid.beta(i) + phase);
    for (int j = 0; j < grid.n_xi; ++j) s.u[grid.index(i, j)] += d;
  }
  return enforce_bc(project_bc(std::move(s), grid, cap.theta), grid, cap.theta);
}

PerturbationSpec random_perturbation(double theta, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0), radius(0.6, 2.0), size(0.02, 0.15);
  PerturbationSpec p;
  p.theta = theta;
  p.n = n;
  p.r = radius(rng);
  p.amplitudes.resize(3);
  double total = 0.0;
  for (double& a : p.amplitudes) {
    a = unit(rng);
    total += std::abs(a);
  }
  const double target = size(rng);
  for (double& a : p.amplitudes) a *= target / total;
  return p;
}

GraphState perturbation_state(const PerturbationSpec& spec, const HemisphereGrid& grid) {
  GraphState s = cap_graph(CapParams{spec.theta, spec.r, spec.n}, grid);
  for (int i = 0; i < grid.n_beta; ++i) {
    double d = 0.0;
    for (std::size_t m = 0; m < spec.amplitudes.size(); ++m)
      d += spec.amplitudes[m] * std::cos(2.0 * (m + 1) * grid.beta(i));
    for (int j = 0; j < grid.n_xi; ++j) s.u[grid.index(i, j)] += d;
  }
  return enforce_bc(project_bc(std::move(s), grid, spec.theta), grid, spec.theta);
}

RandomSample random_convex_sample(double theta, const HemisphereGrid& grid, std::uint64_t seed, int smoothing_steps) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> steps(10, 50);
  FlowConfig cfg;
  cfg.mode = FlowMode::mcf;
  cfg.theta = theta;
  cfg.grid = grid;
  cfg.scheme = Scheme::imex;
  for (int attempt = 1; attempt <= 100; ++attempt) {
    RandomSample out;
    out.attempts = attempt;
    out.spec = random_perturbation(theta, grid.n, rng());
    out.smoothing_steps = smoothing_steps >= 0 ? smoothing_steps : steps(rng);
    try {
      FlowState fs;
      fs.graph = perturbation_state(out.spec, grid);
      for (int k = 0; k < out.smoothing_steps; ++k) fs = step(fs, cfg);
      out.state = enforce_bc(fs.graph, grid, theta);
      out.state.t = 0.0;
      out.sample = reconstruct(out.state, grid);
    } catch (const NumericalFailure&) {
      continue;
    }
    if (out.sample.kappa_min() > 0.0) return out;
  }
  throw NumericalFailure("no strictly convex sample after 100 draws");
}

double compatibility_residual(const GraphState& state, const HemisphereGrid& grid, double theta) {
  const GraphState g = enforce_bc(state, grid, theta);
  const SurfaceSample s = reconstruct(g, grid);
  const std::vector<double> f = normal_speed(s, FlowMode::mct, theta);
  const BoundaryFrame frame = boundary_frame(s);
  const int N = grid.n_beta, M = grid.n_xi;
  const double h = grid.h_beta(), hx = grid.h_xi();
  const double ct = cos_angle(theta), st = sin_angle(theta);
  double worst = 0.0;
  for (int j = 0; j < M; ++j) {
    auto fa = [&](int i, int jj) { return f[grid.index(i, ((jj % M) + M) % M)]; };
    const double fb = (3.0 * fa(N - 1, j) - 4.0 * fa(N - 2, j) + fa(N - 3, j)) / (2.0 * h);
    const Vec xb = (s.ghost_x[j] - s.at(N - 2, j).x) / (2.0 * h);
    const auto& b = frame.nodes[j];
    double grad_mu;
    if (grid.axisym()) {
      grad_mu = fb / xb.norm();
    } else {
      auto pos = [&](int jj) -> const Vec& { return s.at(N - 1, ((jj % M) + M) % M).x; };
      const Vec xx = (pos(j + 1) - pos(j - 1)) / (2.0 * hx);
      const double fx = (fa(N - 1, j + 1) - fa(N - 1, j - 1)) / (2.0 * hx);
      grad_mu = (fb - fx * xx.dot(xb) / xx.squaredNorm()) / b.mu.dot(xb);
    }
    const double fn = fa(N - 1, j);
    worst = std::max(worst, std::abs(grad_mu - (1.0 / st + ct / st * b.h_mumu) * fn));
  }
  return worst;
}

}  // namespace capflow
