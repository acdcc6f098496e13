#include "capflow/flow.hpp"

#include "capflow/numerics.hpp"
#include "capflow/quermass.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <memory>
#include <mutex>
#include <tuple>

namespace capflow {

const char* to_string(FlowMode m) { return m == FlowMode::mct ? "mct" : "mcf"; }
const char* to_string(Scheme s) { return s == Scheme::explicit_euler ? "explicit_euler" : "imex"; }

FlowMode parse_flow_mode(const std::string& s) {
  if (s == "mct") return FlowMode::mct;
  if (s == "mcf") return FlowMode::mcf;
  throw InvalidInput("unknown flow mode: " + s);
}

Scheme parse_scheme(const std::string& s) {
  if (s == "explicit_euler" || s == "explicit") return Scheme::explicit_euler;
  if (s == "imex") return Scheme::imex;
  throw InvalidInput("unknown scheme: " + s);
}

void FlowConfig::validate() const {
  if (!(theta > 0.0 && theta <= 0.5 * kPi + 1e-14)) throw ObliquenessViolated("contact angle must lie in (0, pi/2]");
  if (!(stop_tol > 0.0)) throw InvalidInput("stop_tol must be positive");
  if (!(dt_safety > 0.0 && dt_safety <= 1.0)) throw InvalidInput("dt_safety must lie in (0, 1]");
  if (!(t_max >= 0.0)) throw InvalidInput("t_max must be non-negative");
  if (monitor_every < 1) throw InvalidInput("monitor_every must be >= 1");
  if (!(imex_factor >= 1.0 && imex_factor <= 50.0)) throw InvalidInput("imex_factor must lie in [1, 50]");
  if (!(dt_fixed >= 0.0)) throw InvalidInput("dt must be non-negative");
  if (max_steps < 0 || checkpoint_every < 0) throw InvalidInput("step counts must be non-negative");
}

std::string config_hash(const FlowConfig& cfg) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s|%a|%s|%a|%s|%a|%a", to_string(cfg.mode), cfg.theta, cfg.grid.spec().c_str(),
                cfg.dt_safety, to_string(cfg.scheme), cfg.imex_factor, cfg.dt_fixed);
  std::string key = buf;
  key += "|n=" + std::to_string(cfg.grid.n);
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : key) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

double oblique_slope(double theta, double q) {
  if (!(theta > 0.0 && theta <= 0.5 * kPi + 1e-14)) throw ObliquenessViolated("contact angle must lie in (0, pi/2]");
  const double ct = cos_angle(theta), st = sin_angle(theta);
  return -ct * std::sqrt(1.0 + q * q) / st;
}

double oblique_slope_newton(double theta, double q, double p0, int* iters) {
  if (!(theta > 0.0 && theta <= 0.5 * kPi + 1e-14)) throw ObliquenessViolated("contact angle must lie in (0, pi/2]");
  const double ct = cos_angle(theta);
  double p = p0;
  int k = 0;
  for (; k < 50; ++k) {
    const double r = std::sqrt(1.0 + p * p + q * q);
    const double g = p + ct * r;
    if (std::abs(g) <= 1e-15 * (1.0 + std::abs(p))) break;
    p -= g / (1.0 + ct * p / r);
  }
  if (iters) *iters = k;
  return p;
}

namespace {

int wrap(int j, int m) { return ((j % m) + m) % m; }

double ring_slope(const GraphState& s, const HemisphereGrid& g, int j) {
  const int N = g.n_beta, M = g.n_xi;
  if (g.axisym()) return 0.0;
  return (s.u[g.index(N - 1, wrap(j + 1, M))] - s.u[g.index(N - 1, wrap(j - 1, M))]) / (2.0 * g.h_xi());
}

void average_pole(GraphState& s, const HemisphereGrid& g) {
  if (g.axisym()) return;
  double sum = 0.0;
  for (int j = 0; j < g.n_xi; ++j) sum += s.u[g.index(0, j)];
  for (int j = 0; j < g.n_xi; ++j) s.u[g.index(0, j)] = sum / g.n_xi;
}

void check_state(const GraphState& s, const HemisphereGrid& g) {
  if (static_cast<int>(s.u.size()) != g.nodes()) throw InvalidInput("state size does not match the grid");
  for (double x : s.u)
    if (!std::isfinite(x)) throw InvalidInput("state contains non-finite values");
}

// the first ghost makes the fourth-order central derivative at the equator equal p,
// the second one continues the quartic through the last five values
constexpr double kGhost1[4] = {-10.0 / 3.0, 6.0, -2.0, 1.0 / 3.0};
constexpr double kGhost2[4] = {-80.0 / 3.0, 40.0, -15.0, 8.0 / 3.0};

}  // namespace

GraphState enforce_bc(GraphState s, const HemisphereGrid& g, double theta) {
  check_state(s, g);
  average_pole(s, g);
  const int N = g.n_beta;
  const double h = g.h_beta();
  s.ghost.resize(g.n_xi);
  for (int j = 0; j < g.n_xi; ++j) {
    const double p = oblique_slope(theta, std::abs(ring_slope(s, g, j)));
    s.ghost[j] = 4.0 * h * p + (-10.0 * s.u[g.index(N - 1, j)] + 18.0 * s.u[g.index(N - 2, j)] -
                                6.0 * s.u[g.index(N - 3, j)] + s.u[g.index(N - 4, j)]) / 3.0;
  }
  return s;
}

namespace {

// one-sided derivative at the equator: fourth order in axisym, second order in full2d
double equator_slope(const GraphState& s, const HemisphereGrid& g, int j) {
  const int N = g.n_beta;
  const double h = g.h_beta();
  auto u = [&](int i) { return s.u[g.index(i, j)]; };
  if (g.axisym()) return (25.0 * u(N - 1) - 48.0 * u(N - 2) + 36.0 * u(N - 3) - 16.0 * u(N - 4) + 3.0 * u(N - 5)) / (12.0 * h);
  return (3.0 * u(N - 1) - 4.0 * u(N - 2) + u(N - 3)) / (2.0 * h);
}

}  // namespace

GraphState project_bc(GraphState s, const HemisphereGrid& g, double theta) {
  check_state(s, g);
  average_pole(s, g);
  const int N = g.n_beta;
  const double h = g.h_beta();
  // weights of the last two rows in the one-sided stencil, scaled by 1/h
  const double wa = g.axisym() ? 25.0 / 12.0 : 1.5, wb = g.axisym() ? -4.0 : -2.0;
  const int sweeps = g.axisym() ? 1 : 50;
  for (int it = 0; it < sweeps; ++it) {
    std::vector<double> p(g.n_xi);
    for (int j = 0; j < g.n_xi; ++j) p[j] = oblique_slope(theta, std::abs(ring_slope(s, g, j)));
    for (int j = 0; j < g.n_xi; ++j) {
      const double r = h * (p[j] - equator_slope(s, g, j)) / (wa * wa + wb * wb);
      s.u[g.index(N - 1, j)] += wa * r;
      s.u[g.index(N - 2, j)] += wb * r;
    }
    if (bc_residual(s, g, theta) < 1e-14) break;
  }
  return enforce_bc(std::move(s), g, theta);
}

double bc_residual(const GraphState& s, const HemisphereGrid& g, double theta) {
  double worst = 0.0;
  for (int j = 0; j < g.n_xi; ++j) {
    const double p = oblique_slope(theta, std::abs(ring_slope(s, g, j)));
    worst = std::max(worst, std::abs(equator_slope(s, g, j) - p));
  }
  return worst;
}

namespace {

// cell measures per beta row (without the |S^{n-1}| factor in axisym)
std::shared_ptr<const std::vector<double>> cell_volumes(const HemisphereGrid& g) {
  static std::mutex mu;
  static std::map<std::tuple<int, int, int, int>, std::shared_ptr<const std::vector<double>>> cache;
  const auto key = std::make_tuple(static_cast<int>(g.mode), g.n, g.n_beta, g.n_xi);
  std::lock_guard<std::mutex> lock(mu);
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  const int N = g.n_beta;
  const double h = g.h_beta();
  auto v = std::make_shared<std::vector<double>>(N);
  for (int i = 0; i < N; ++i) {
    const double b = i == N - 1 ? 0.5 * kPi : i * h;
    if (g.axisym()) {
      (*v)[i] = i == 0 ? sin_power_integral(g.n - 1, 0.5 * h) : sin_power_integral(g.n - 1, b - 0.5 * h, b + 0.5 * h);
    } else {
      (*v)[i] = i == 0 ? 2.0 * kPi * 2.0 * std::pow(std::sin(0.25 * h), 2) : 2.0 * std::sin(b) * std::sin(0.5 * h) * g.h_xi();
    }
  }
  cache.emplace(key, v);
  return v;
}

// principal part fluxes with frozen coefficients: kb on beta faces, kx on xi faces
struct Assembly {
  RhsDetail detail;
  std::vector<double> kb, kx;  // full2d
  std::vector<double> c2, c1;  // axisym: coefficients of u_bb and u_b in the principal part
  std::shared_ptr<const std::vector<double>> vol;
};

void finish_node(Assembly& out, int k, FlowMode mode, int n, double ct, double u, double beta, double sb_ub,
                 double g2, double div) {
  const double su = std::sinh(u), cu = std::cosh(u);
  const double v = std::sqrt(1.0 + g2);
  const double A = cu + std::cos(beta);
  double F = 0.0;
  if (mode == FlowMode::mct) {
    F = div - (n + 1) / v * (su * g2 - sb_ub) - n * ct * su * sb_ub + n * ct * (cu * std::cos(beta) + 1.0);
    out.detail.coef[k] = A / v;
  } else {
    F = v * A * (div - (su * g2 - sb_ub) / v + n / v * (su + sb_ub));
    out.detail.coef[k] = A * A;
  }
  out.detail.F[k] = F;
  out.detail.v[k] = v;
  out.detail.A[k] = A;
}

// fourth-order central differences in non-divergence form:
// div(a grad u) = A/v^3 u_bb + (n-1) cot(b) A/v u_b + u_b (sinh(u) u_b - sin b)/v
Assembly assemble_axisym(const GraphState& s, const HemisphereGrid& g, double theta, FlowMode mode) {
  const int N = g.n_beta, n = g.n;
  const double h = g.h_beta(), ct = cos_angle(theta);
  Assembly out;
  out.detail.F.resize(N);
  out.detail.v.resize(N);
  out.detail.A.resize(N);
  out.detail.coef.resize(N);
  out.c2.resize(N);
  out.c1.resize(N);
  const double g1 = s.ghost[0];
  const double g2 = 5.0 * g1 - 10.0 * s.u[N - 1] + 10.0 * s.u[N - 2] - 5.0 * s.u[N - 3] + s.u[N - 4];
  auto ue = [&](int k) { return k < 0 ? s.u[-k] : (k == N ? g1 : (k > N ? g2 : s.u[k])); };
  for (int i = 0; i < N; ++i) {
    const double beta = g.beta(i);
    const double ub = i == 0 ? 0.0 : (ue(i - 2) - 8.0 * ue(i - 1) + 8.0 * ue(i + 1) - ue(i + 2)) / (12.0 * h);
    const double ubb = (-ue(i - 2) + 16.0 * ue(i - 1) - 30.0 * ue(i) + 16.0 * ue(i + 1) - ue(i + 2)) / (12.0 * h * h);
    const double v = std::sqrt(1.0 + ub * ub);
    const double A = std::cosh(s.u[i]) + std::cos(beta);
    double div = 0.0;
    if (i == 0) {
      // cot(b) u_b -> u_bb at the pole
      out.c2[i] = n * A;
      out.c1[i] = 0.0;
      div = n * A * ubb;
    } else {
      out.c2[i] = A / (v * v * v);
      out.c1[i] = (n - 1) * std::cos(beta) / std::sin(beta) * A / v;
      div = out.c2[i] * ubb + out.c1[i] * ub + ub * (std::sinh(s.u[i]) * ub - std::sin(beta)) / v;
    }
    finish_node(out, i, mode, n, ct, s.u[i], beta, std::sin(beta) * ub, ub * ub, div);
  }
  return out;
}

Assembly assemble_full2d(const GraphState& s, const HemisphereGrid& g, double theta, FlowMode mode) {
  const int N = g.n_beta, M = g.n_xi, n = g.n;
  const double h = g.h_beta(), hx = g.h_xi(), ct = cos_angle(theta);
  Assembly out;
  out.vol = cell_volumes(g);
  const int total = g.nodes();
  out.detail.F.resize(total);
  out.detail.v.resize(total);
  out.detail.A.resize(total);
  out.detail.coef.resize(total);
  auto U = [&](int i, int j) { return i >= N ? s.ghost[wrap(j, M)] : s.u[g.index(i, wrap(j, M))]; };
  auto uxi = [&](int i, int j) { return i == 0 ? 0.0 : (U(i, j + 1) - U(i, j - 1)) / (2.0 * hx); };
  auto ubeta = [&](int i, int j) { return (U(i + 1, j) - U(i - 1, j)) / (2.0 * h); };

  out.kb.assign(N * M, 0.0);
  out.kx.assign(N * M, 0.0);
  std::vector<double> fb(N * M), fx(N * M, 0.0);
  parallel_for(N, [&](std::size_t lo, std::size_t hi) {
    for (int i = static_cast<int>(lo); i < static_cast<int>(hi); ++i) {
      const double bf = (i + 0.5) * h, sbf = std::sin(bf);
      for (int j = 0; j < M; ++j) {
        const double uf = 0.5 * (U(i, j) + U(i + 1, j));
        const double pf = (U(i + 1, j) - U(i, j)) / h;
        const double xf = 0.5 * (uxi(i, j) + uxi(i + 1, j)) / sbf;
        const double af = (std::cosh(uf) + std::cos(bf)) / std::sqrt(1.0 + pf * pf + xf * xf);
        const int k = i * M + j;
        out.kb[k] = sbf * hx * af / h;
        fb[k] = out.kb[k] * (U(i + 1, j) - U(i, j));
        if (i == 0) continue;
        const double sb = std::sin(g.beta(i));
        const double uxf = 0.5 * (U(i, j) + U(i, j + 1));
        const double qf = (U(i, j + 1) - U(i, j)) / hx;
        const double ubf = 0.5 * (ubeta(i, j) + ubeta(i, j + 1));
        const double ax = (std::cosh(uxf) + std::cos(g.beta(i))) / std::sqrt(1.0 + ubf * ubf + (qf / sb) * (qf / sb));
        out.kx[k] = h * ax / (sb * hx);
        fx[k] = out.kx[k] * (U(i, j + 1) - U(i, j));
      }
    }
  }, 16);

  const auto& vol = *out.vol;
  // pole: gradient from the first Fourier mode on ring 1
  double c1 = 0.0, s1 = 0.0, pole_flux = 0.0;
  for (int j = 0; j < M; ++j) {
    c1 += U(1, j) * std::cos(g.xi(j));
    s1 += U(1, j) * std::sin(g.xi(j));
    pole_flux += fb[j];
  }
  c1 *= 2.0 / M;
  s1 *= 2.0 / M;
  const double g2_pole = (c1 * c1 + s1 * s1) / (h * h);
  for (int j = 0; j < M; ++j) finish_node(out, g.index(0, j), mode, n, ct, U(0, j), 0.0, 0.0, g2_pole, pole_flux / vol[0]);

  for (int i = 1; i < N; ++i) {
    const double beta = g.beta(i), sb = std::sin(beta);
    for (int j = 0; j < M; ++j) {
      const int k = i * M + j;
      const double div = (fb[k] - fb[k - M] + fx[k] - fx[i * M + wrap(j - 1, M)]) / vol[i];
      const double ub = ubeta(i, j), ux = uxi(i, j) / sb;
      finish_node(out, g.index(i, j), mode, n, ct, U(i, j), beta, sb * ub, ub * ub + ux * ux, div);
    }
  }
  return out;
}

Assembly assemble(const GraphState& s, const HemisphereGrid& g, double theta, FlowMode mode) {
  check_state(s, g);
  if (static_cast<int>(s.ghost.size()) != g.n_xi) throw InvalidInput("ghost row does not match the grid");
  return g.axisym() ? assemble_axisym(s, g, theta, mode) : assemble_full2d(s, g, theta, mode);
}

// linear principal operator with frozen face coefficients; the ghost row is
// eliminated through its linear part -3/2 u_{N-1} + 3 u_{N-2} - 1/2 u_{N-3}
Eigen::SparseMatrix<double> principal_operator(const Assembly& a, const HemisphereGrid& g, FlowMode mode) {
  const int N = g.n_beta, M = g.n_xi;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(g.nodes()) * 9);
  auto add = [&](int row, int i, int j, double w) {
    if (i >= N) {
      const double* c = i == N ? kGhost1 : kGhost2;
      for (int l = 0; l < 4; ++l) trip.emplace_back(row, g.index(N - 1 - l, wrap(j, M)), c[l] * w);
    } else {
      trip.emplace_back(row, g.index(std::abs(i), wrap(j, M)), w);
    }
  };
  if (g.axisym()) {
    const double h = g.h_beta();
    const double d2[5] = {-1.0, 16.0, -30.0, 16.0, -1.0}, d1[5] = {1.0, -8.0, 0.0, 8.0, -1.0};
    for (int i = 0; i < N; ++i) {
      const double scale = mode == FlowMode::mcf ? a.detail.v[i] * a.detail.A[i] : 1.0;
      for (int l = 0; l < 5; ++l) {
        const double w = scale * (a.c2[i] * d2[l] / (12.0 * h * h) + a.c1[i] * d1[l] / (12.0 * h));
        if (w != 0.0) add(i, i + l - 2, 0, w);
      }
    }
    Eigen::SparseMatrix<double> L(N, N);
    L.setFromTriplets(trip.begin(), trip.end());
    return L;
  }
  const auto& vol = *a.vol;
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < M; ++j) {
      const int row = g.index(i, j);
      const double scale = (mode == FlowMode::mcf ? a.detail.v[row] * a.detail.A[row] : 1.0) / vol[i];
      if (i == 0 && !g.axisym()) {
        for (int jj = 0; jj < M; ++jj) {
          const double k = a.kb[jj] * scale;
          add(row, 1, jj, k);
          add(row, 0, j, -k);
        }
        continue;
      }
      const double up = a.kb[i * M + j] * scale;
      add(row, i + 1, j, up);
      add(row, i, j, -up);
      if (i > 0) {
        const double down = a.kb[(i - 1) * M + j] * scale;
        add(row, i - 1, j, down);
        add(row, i, j, -down);
      }
      if (!g.axisym()) {
        const double right = a.kx[i * M + j] * scale, left = a.kx[i * M + wrap(j - 1, M)] * scale;
        add(row, i, j + 1, right);
        add(row, i, j - 1, left);
        add(row, i, j, -right - left);
      }
    }
  }
  Eigen::SparseMatrix<double> L(g.nodes(), g.nodes());
  L.setFromTriplets(trip.begin(), trip.end());
  return L;
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double min_xe_nu(const SurfaceSample& s) {
  double m = kInfinity;
  for (const auto& p : s.nodes) m = std::min(m, p.xe_nu);
  return m;
}

double dt_from_coef(const std::vector<double>& coef, const FlowConfig& cfg) {
  const auto& g = cfg.grid;
  const double hb = g.h_beta();
  const double hmin = g.axisym() ? hb : std::min(hb, std::sin(hb) * g.h_xi());
  double cmax = 0.0;
  for (double c : coef) cmax = std::max(cmax, c);
  return cfg.dt_safety * hmin * hmin / (2.0 * g.n * cmax);
}

}  // namespace

RhsDetail scalar_rhs_detail(const GraphState& state, const HemisphereGrid& grid, double theta, FlowMode mode) {
  return assemble(state, grid, theta, mode).detail;
}

std::vector<double> scalar_rhs(const GraphState& state, const HemisphereGrid& grid, double theta, FlowMode mode) {
  return assemble(state, grid, theta, mode).detail.F;
}

std::vector<double> normal_speed(const SurfaceSample& s, FlowMode mode, double theta) {
  const int n = s.grid.n;
  const double ct = cos_angle(theta);
  std::vector<double> f(s.nodes.size());
  for (std::size_t q = 0; q < s.nodes.size(); ++q) {
    const NodeGeometry& p = s.nodes[q];
    const double H = n * p.H(1);
    f[q] = mode == FlowMode::mct ? n * (p.x(n) + ct * p.nu(n)) - H * p.xe_nu : -H;
  }
  return f;
}

double fitted_speed_factor(const HemisphereGrid& grid, double theta, FlowMode mode) {
  GraphState s = cap_graph(CapParams{theta, 1.0, grid.n}, grid);
  for (int i = 0; i < grid.n_beta; ++i)
    for (int j = 0; j < grid.n_xi; ++j) {
      const double b = grid.beta(i), xi = grid.xi(j);
      double du = 0.05 * std::cos(2.0 * b);
      if (!grid.axisym()) du += 0.03 * std::pow(std::sin(b), 2) * std::cos(2.0 * xi);
      s.u[grid.index(i, j)] += du;
    }
  s = project_bc(std::move(s), grid, theta);
  const RhsDetail d = scalar_rhs_detail(s, grid, theta, mode);
  const std::vector<double> f = normal_speed(reconstruct(s, grid), mode, theta);
  double num = 0.0, den = 0.0;
  for (int i = 2; i < grid.n_beta - 2; ++i)
    for (int j = 0; j < grid.n_xi; ++j) {
      const int k = grid.index(i, j);
      const double gk = f[k] * d.v[k] * d.A[k];
      num += d.F[k] * gk;
      den += gk * gk;
    }
  return num / den;
}

double explicit_dt(const GraphState& state, const FlowConfig& cfg) {
  return dt_from_coef(scalar_rhs_detail(state, cfg.grid, cfg.theta, cfg.mode).coef, cfg);
}

namespace {

struct Advance {
  FlowState next;
  SurfaceSample sample;
  Assembly rhs;
  long rejections = 0;
};

// explicit Euler, or the two-stage IMEX Runge-Kutta scheme ARS(2,2,2): the principal
// part with coefficients frozen at the start of the step is implicit, the rest explicit
GraphState propose(const FlowState& s, const Assembly& a, const FlowConfig& cfg, double dt) {
  GraphState g = s.graph;
  const auto& F = a.detail.F;
  const auto size = static_cast<Eigen::Index>(g.u.size());
  if (cfg.scheme == Scheme::explicit_euler) {
    for (std::size_t k = 0; k < g.u.size(); ++k) g.u[k] += dt * F[k];
  } else {
    const double gamma = 1.0 - 1.0 / std::sqrt(2.0), delta = 1.0 - 1.0 / (2.0 * gamma);
    const Eigen::SparseMatrix<double> L = principal_operator(a, cfg.grid, cfg.mode);
    Eigen::SparseMatrix<double> sys(L.rows(), L.cols());
    sys.setIdentity();
    sys -= (gamma * dt) * L;
    sys.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(sys);
    if (lu.info() != Eigen::Success) throw StepFailure("implicit system factorization failed");
    const Eigen::Map<const Eigen::VectorXd> u(s.graph.u.data(), size);
    const Eigen::VectorXd n0 = Eigen::Map<const Eigen::VectorXd>(F.data(), size) - L * u;
    const Eigen::VectorXd u1 = lu.solve(u + gamma * dt * n0);
    GraphState stage = s.graph;
    for (Eigen::Index k = 0; k < size; ++k) stage.u[k] = u1(k);
    stage = enforce_bc(std::move(stage), cfg.grid, cfg.theta);
    const std::vector<double> f1 = assemble(stage, cfg.grid, cfg.theta, cfg.mode).detail.F;
    const Eigen::VectorXd lu1 = L * u1;
    const Eigen::VectorXd n1 = Eigen::Map<const Eigen::VectorXd>(f1.data(), size) - lu1;
    const Eigen::VectorXd u2 = lu.solve(u + dt * (delta * n0 + (1.0 - delta) * n1 + (1.0 - gamma) * lu1));
    for (Eigen::Index k = 0; k < size; ++k) g.u[k] = u2(k);
  }
  g.t = s.graph.t + dt;
  return g;
}

enum class Reject { none, nonfinite, degenerate, star, convexity, bracket };

Advance advance(const FlowState& s, const Assembly& a, const FlowConfig& cfg, const RunContext& ctx, double dt) {
  Advance out;
  Reject last = Reject::none;
  for (int attempt = 0; attempt <= 10; ++attempt, dt *= 0.5) {
    GraphState g;
    try {
      g = propose(s, a, cfg, dt);
    } catch (const InvalidInput&) {
      last = Reject::nonfinite;
      ++out.rejections;
      continue;
    }
    bool finite = true;
    for (double x : g.u) finite = finite && std::isfinite(x);
    if (!finite) {
      last = Reject::nonfinite;
      ++out.rejections;
      continue;
    }
    g = enforce_bc(std::move(g), cfg.grid, cfg.theta);
    SurfaceSample sample;
    try {
      sample = reconstruct(g, cfg.grid);
    } catch (const DegenerateMetric&) {
      last = Reject::degenerate;
      ++out.rejections;
      continue;
    }
    const double xe = min_xe_nu(sample);
    if (!(xe > 0.0)) {
      last = Reject::star;
      ++out.rejections;
      continue;
    }
    const double kmin = sample.kappa_min();
    if (kmin < std::min(0.0, s.diag.kappa_min) - 1e-12) {
      last = Reject::convexity;
      ++out.rejections;
      continue;
    }
    Assembly next_rhs = assemble(g, cfg.grid, cfg.theta, cfg.mode);
    if (ctx.brackets_active) {
      const double margin = 1e-6;
      bool ok = true;
      for (double x : g.u) ok = ok && x >= ctx.c1 - margin && x <= ctx.c2 + margin;
      for (double v : next_rhs.detail.v) ok = ok && v <= ctx.c3 + margin;
      if (!ok) {
        last = Reject::bracket;
        ++out.rejections;
        continue;
      }
    }
    out.next.graph = std::move(g);
    out.next.step_index = s.step_index + 1;
    out.next.dt_last = dt;
    out.next.diag.maxF = max_abs(next_rhs.detail.F);
    out.next.diag.kappa_min = kmin;
    out.next.diag.xe_nu_min = xe;
    out.sample = std::move(sample);
    out.rhs = std::move(next_rhs);
    return out;
  }
  if (last == Reject::star) throw StarShapeLost("<X_e, nu> <= 0 after 10 step halvings");
  throw StepFailure("step rejected 10 times");
}

double base_dt(const Assembly& a, const FlowConfig& cfg) {
  if (cfg.dt_fixed > 0.0) return cfg.dt_fixed;
  const double dt = dt_from_coef(a.detail.coef, cfg);
  return cfg.scheme == Scheme::imex ? cfg.imex_factor * dt : dt;
}

}  // namespace

Diagnostics diagnose(const GraphState& state, const FlowConfig& cfg) {
  const GraphState g = enforce_bc(state, cfg.grid, cfg.theta);
  const SurfaceSample s = reconstruct(g, cfg.grid);
  Diagnostics d;
  d.maxF = max_abs(scalar_rhs(g, cfg.grid, cfg.theta, cfg.mode));
  d.kappa_min = s.kappa_min();
  d.xe_nu_min = min_xe_nu(s);
  d.W = quermass_vector(s, cfg.theta).W;
  return d;
}

FlowState step(const FlowState& state, const FlowConfig& cfg, const RunContext& ctx) {
  cfg.validate();
  FlowState s = state;
  s.graph = enforce_bc(s.graph, cfg.grid, cfg.theta);
  const Assembly a = assemble(s.graph, cfg.grid, cfg.theta, cfg.mode);
  s.diag.kappa_min = reconstruct(s.graph, cfg.grid).kappa_min();
  return advance(s, a, cfg, ctx, base_dt(a, cfg)).next;
}

RunContext prepare_run(const FlowConfig& cfg, const GraphState& initial) {
  cfg.validate();
  const GraphState g = enforce_bc(initial, cfg.grid, cfg.theta);
  const SurfaceSample s = reconstruct(g, cfg.grid);
  RunContext ctx;
  ctx.kappa_min_initial = s.kappa_min();
  ctx.w0_initial = quermass_vector(s, cfg.theta).W[0];
  const double limit = cap_quermass_upper_limit(cfg.theta, cfg.n(), 0);
  if (ctx.w0_initial >= limit) {
    ctx.r_inf = kInfinity;
  } else {
    ctx.r_inf = cap_radius_from_quermass(cfg.theta, cfg.n(), 0, ctx.w0_initial);
  }
  try {
    const ShellRadii shell = shell_radii(g, cfg.grid, cfg.theta);
    ctx.R1 = shell.R1;
    ctx.R2 = shell.R2;
  } catch (const ShellViolation&) {
    ctx.R1 = 0.0;
    ctx.R2 = kInfinity;
  }
  if (ctx.R1 > 0.0) {
    const ShellDeltas d = shell_deltas(cfg.theta, ctx.R1, ctx.R2);
    const double d0 = d.d0, d1 = d.d1, d2 = d.d2;
    ctx.c1 = 0.5 * std::log(1.0 + 2.0 * (cos_angle(cfg.theta) + d0));
    ctx.c2 = 0.5 * std::log(1.0 + 4.0 / (d1 * d1));
    ctx.c3 = 2.0 / d2 * std::sqrt(1.0 + 4.0 / (d1 * d1));
    bool inside = cfg.mode == FlowMode::mct && ctx.kappa_min_initial > 0.0;
    for (double x : g.u) inside = inside && x >= ctx.c1 && x <= ctx.c2;
    for (double v : scalar_rhs_detail(g, cfg.grid, cfg.theta, cfg.mode).v) inside = inside && v <= ctx.c3;
    ctx.brackets_active = inside;
  }
  return ctx;
}

namespace {

TrajectoryRecord drive(const FlowConfig& cfg, FlowState s, const RunContext& ctx, const RunHooks& hooks, bool fresh) {
  TrajectoryRecord rec;
  rec.meta.config_hash = config_hash(cfg);
  rec.meta.sign_convention = to_string(resolved_boundary_sign());
  rec.meta.fitted_factor = fitted_speed_factor(cfg.grid, cfg.theta, cfg.mode);
  rec.meta.context = ctx;
  if (ctx.r_inf == kInfinity && cfg.mode == FlowMode::mct)
    rec.meta.warnings.push_back("initial volume reaches the flat-ball limit; distance measured to the flat ball");
  if (cfg.mode == FlowMode::mct && !(ctx.kappa_min_initial > 0.0))
    rec.meta.warnings.push_back("initial state is not strictly convex");

  const GraphState reference = cap_graph(CapParams{cfg.theta, ctx.r_inf, cfg.n()}, cfg.grid);
  const ShellRadii shell{ctx.R1, ctx.R2};

  s.graph = enforce_bc(std::move(s.graph), cfg.grid, cfg.theta);
  Assembly rhs = assemble(s.graph, cfg.grid, cfg.theta, cfg.mode);
  SurfaceSample sample = reconstruct(s.graph, cfg.grid);
  s.diag.maxF = max_abs(rhs.detail.F);
  s.diag.kappa_min = sample.kappa_min();
  s.diag.xe_nu_min = min_xe_nu(sample);

  auto record = [&] {
    TrajectoryRow row;
    row.step = s.step_index;
    row.t = s.graph.t;
    row.dt = s.dt_last;
    row.maxF = s.diag.maxF;
    row.kappa_min = s.diag.kappa_min;
    row.W = quermass_vector(sample, cfg.theta).W;
    double dist = 0.0;
    for (std::size_t k = 0; k < s.graph.u.size(); ++k) dist = std::max(dist, std::abs(s.graph.u[k] - reference.u[k]));
    row.dist_to_cap = dist;
    row.dissipation = dissipation(sample);
    row.xe_nu_min = s.diag.xe_nu_min;
    row.shell_violation = ctx.R1 > 0.0 ? shell_violation(s.graph, cfg.grid, cfg.theta, shell) : 0.0;
    rec.rows.push_back(row);
    if (hooks.on_row) hooks.on_row(row);
  };
  if (fresh) record();

  while (true) {
    if (s.diag.maxF < cfg.stop_tol) {
      rec.meta.stop_reason = "converged";
      rec.meta.converged = true;
      break;
    }
    if (s.graph.t >= cfg.t_max) {
      rec.meta.stop_reason = "t_max";
      break;
    }
    if (cfg.max_steps > 0 && s.step_index >= cfg.max_steps) {
      rec.meta.stop_reason = "max_steps";
      break;
    }
    double dt = base_dt(rhs, cfg);
    if (s.graph.t + dt > cfg.t_max) dt = cfg.t_max - s.graph.t;
    Advance adv = advance(s, rhs, cfg, ctx, dt);
    rec.meta.rejections += adv.rejections;
    s = std::move(adv.next);
    rhs = std::move(adv.rhs);
    sample = std::move(adv.sample);
    if (s.step_index % cfg.monitor_every == 0) record();
    if (cfg.checkpoint_every > 0 && s.step_index % cfg.checkpoint_every == 0 && hooks.on_checkpoint)
      hooks.on_checkpoint(s, ctx);
  }
  if (rec.rows.empty() || rec.rows.back().step != s.step_index) record();
  rec.final_graph = s.graph;
  rec.final_step = s.step_index;
  rec.final_dt = s.dt_last;
  if (rec.meta.stop_reason == "t_max")
    throw NotConverged("t_max reached with max|F| = " + std::to_string(s.diag.maxF), std::move(rec));
  return rec;
}

}  // namespace

TrajectoryRecord run(const FlowConfig& cfg, const GraphState& initial, const RunHooks& hooks) {
  cfg.validate();
  FlowState s;
  s.graph = project_bc(initial, cfg.grid, cfg.theta);
  const RunContext ctx = prepare_run(cfg, s.graph);
  return drive(cfg, std::move(s), ctx, hooks, true);
}

TrajectoryRecord resume(const FlowConfig& cfg, const FlowState& state, const RunContext& ctx, const RunHooks& hooks) {
  cfg.validate();
  return drive(cfg, state, ctx, hooks, false);
}

}  // namespace capflow
