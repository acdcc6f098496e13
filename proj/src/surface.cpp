#include "capflow/surface.hpp"

#include "capflow/errors.hpp"
#include "capflow/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

namespace capflow {

namespace {

using Eigen::Vector3d;

// (x_r, x_z) of the point with log-radius u at polar angle beta
std::pair<double, double> meridian(double u, double beta) {
  const double rho = std::exp(u);
  const double d = rho * rho + 2.0 * rho * std::cos(beta) + 1.0;
  return {2.0 * rho * std::sin(beta) / d, (rho * rho - 1.0) / d};
}

Vector3d embed(double u, double beta, double xi) {
  const auto [r, z] = meridian(u, beta);
  return {r * std::cos(xi), r * std::sin(xi), z};
}

double xe_normal(const Vec& x, const Vec& nu) {
  const int n = static_cast<int>(x.size()) - 1;
  return x(n) * x.dot(nu) - 0.5 * (x.squaredNorm() + 1.0) * nu(n);
}

void finish_curvatures(NodeGeometry& g) {
  Eigen::MatrixXd vectors;
  jacobi_eigen(g.shape, g.kappa, vectors);
  g.H = normalized_symmetric(g.kappa);
  g.xe_nu = xe_normal(g.x, g.nu);
}

// geometry of a 2-surface from a chart and its derivatives; returns the area factor |x1 x x2|
double local_geometry(NodeGeometry& g, const Vector3d& x, const Vector3d& x1, const Vector3d& x2,
                      const Vector3d& x11, const Vector3d& x12, const Vector3d& x22) {
  const Vector3d c = x1.cross(x2);
  const double g11 = x1.dot(x1), g12 = x1.dot(x2), g22 = x2.dot(x2);
  if (g11 * g22 - g12 * g12 < 1e-14) throw DegenerateMetric("induced metric determinant below 1e-14");
  const double jac = c.norm();
  const Vector3d nu = -c / jac;
  const Vector3d e1 = x1 / std::sqrt(g11);
  Vector3d e2 = x2 - x2.dot(e1) * e1;
  const double m = e2.norm();
  e2 /= m;
  Eigen::Matrix2d b;
  b << -x11.dot(nu), -x12.dot(nu), -x12.dot(nu), -x22.dot(nu);
  Eigen::Matrix2d p;
  p << 1.0 / std::sqrt(g11), 0.0, -x2.dot(e1) / (std::sqrt(g11) * m), 1.0 / m;
  g.x = x;
  g.nu = nu;
  g.frame.resize(3, 2);
  g.frame.col(0) = e1;
  g.frame.col(1) = e2;
  g.shape = p * b * p.transpose();
  finish_curvatures(g);
  return jac;
}

double trapezoid_weight(const HemisphereGrid& grid, int i) {
  const double h = grid.h_beta();
  return (i == 0 || i == grid.n_beta - 1) ? 0.5 * h : h;
}

// trapezoid with Gregory end corrections (fourth order)
double gregory_weight(const HemisphereGrid& grid, int i) {
  static constexpr double ends[3] = {3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0};
  const int k = std::min(i, grid.n_beta - 1 - i);
  return grid.h_beta() * (k < 3 ? ends[k] : 1.0);
}

// fourth-order central differences on the meridian; the curve is reflected
// through the pole and continued past the equator by two ghost values
SurfaceSample reconstruct_axisym(const GraphState& s, const HemisphereGrid& grid) {
  const int N = grid.n_beta, n = grid.n;
  const double h = grid.h_beta();
  std::vector<double> xr(N + 4), xz(N + 4);  // index i + 2 holds node i
  for (int i = 0; i < N; ++i) std::tie(xr[i + 2], xz[i + 2]) = meridian(s.u[i], grid.beta(i));
  const double g1 = s.ghost[0];
  const double g2 = 5.0 * g1 - 10.0 * s.u[N - 1] + 10.0 * s.u[N - 2] - 5.0 * s.u[N - 3] + s.u[N - 4];
  std::tie(xr[N + 2], xz[N + 2]) = meridian(g1, 0.5 * kPi + h);
  std::tie(xr[N + 3], xz[N + 3]) = meridian(g2, 0.5 * kPi + 2.0 * h);
  for (int k = 0; k < 2; ++k) {
    xr[k] = -xr[4 - k];
    xz[k] = xz[4 - k];
  }
  auto d1 = [&](const std::vector<double>& f, int k) {
    return (f[k - 2] - 8.0 * f[k - 1] + 8.0 * f[k + 1] - f[k + 2]) / (12.0 * h);
  };
  auto d2 = [&](const std::vector<double>& f, int k) {
    return (-f[k - 2] + 16.0 * f[k - 1] - 30.0 * f[k] + 16.0 * f[k + 1] - f[k + 2]) / (12.0 * h * h);
  };
  SurfaceSample out;
  out.grid = grid;
  out.nodes.resize(N);
  const double omega = sphere_area(n - 1);
  for (int i = 0; i < N; ++i) {
    const int k = i + 2;
    const double br = d1(xr, k), bz = d1(xz, k);
    const double bbr = d2(xr, k), bbz = d2(xz, k);
    const double len2 = br * br + bz * bz;
    if (len2 < 1e-14) throw DegenerateMetric("induced metric determinant below 1e-14");
    const double len = std::sqrt(len2);
    const double tr = br / len, tz = bz / len;
    const double nr = tz, nz = -tr;
    const double km = -(bbr * nr + bbz * nz) / len2;
    const double kp = i == 0 ? km : nr / xr[k];
    NodeGeometry& g = out.nodes[i];
    g.x = Vec::Zero(n + 1);
    g.x(0) = xr[k];
    g.x(n) = xz[k];
    g.nu = Vec::Zero(n + 1);
    g.nu(0) = nr;
    g.nu(n) = nz;
    g.frame = Eigen::MatrixXd::Zero(n + 1, n);
    g.frame(0, 0) = tr;
    g.frame(n, 0) = tz;
    for (int a = 1; a < n; ++a) g.frame(a, a) = 1.0;
    g.shape = Eigen::MatrixXd::Zero(n, n);
    g.shape(0, 0) = km;
    for (int a = 1; a < n; ++a) g.shape(a, a) = kp;
    g.kappa.resize(n);
    g.kappa(0) = km;
    for (int a = 1; a < n; ++a) g.kappa(a) = kp;
    std::sort(g.kappa.data(), g.kappa.data() + n);
    g.H = normalized_symmetric(g.kappa);
    g.xe_nu = xe_normal(g.x, g.nu);
    g.dA = omega * std::pow(std::abs(xr[k]), n - 1) * len * gregory_weight(grid, i);
  }
  Vec gx = Vec::Zero(n + 1);
  gx(0) = xr[N + 2];
  gx(n) = xz[N + 2];
  out.ghost_x = {gx};
  return out;
}

SurfaceSample reconstruct_full2d(const GraphState& s, const HemisphereGrid& grid) {
  const int N = grid.n_beta, M = grid.n_xi;
  const double h = grid.h_beta(), hx = grid.h_xi();
  // rows 0..N-1 plus the ghost row N
  std::vector<Vector3d> X((N + 1) * M);
  auto at = [&](int i, int j) -> Vector3d& { return X[i * M + ((j % M) + M) % M]; };
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < M; ++j) at(i, j) = embed(s.u[grid.index(i, j)], grid.beta(i), grid.xi(j));
  for (int j = 0; j < M; ++j) at(N, j) = embed(s.ghost[j], 0.5 * kPi + h, grid.xi(j));

  SurfaceSample out;
  out.grid = grid;
  out.nodes.resize(grid.nodes());

  // pole: fit modes 0..2 on the first ring in normal coordinates s = beta (cos xi, sin xi)
  {
    const Vector3d x0 = at(0, 0);
    Vector3d m0 = Vector3d::Zero(), c1 = Vector3d::Zero(), s1 = Vector3d::Zero();
    Vector3d c2 = Vector3d::Zero(), s2 = Vector3d::Zero();
    for (int j = 0; j < M; ++j) {
      const double xi = grid.xi(j);
      const Vector3d& v = at(1, j);
      m0 += v / M;
      c1 += 2.0 / M * std::cos(xi) * v;
      s1 += 2.0 / M * std::sin(xi) * v;
      c2 += 2.0 / M * std::cos(2 * xi) * v;
      s2 += 2.0 / M * std::sin(2 * xi) * v;
    }
    const Vector3d x1 = c1 / h, x2 = s1 / h;
    const Vector3d trace = 4.0 * (m0 - x0) / (h * h), diff = 4.0 * c2 / (h * h);
    const Vector3d x11 = 0.5 * (trace + diff), x22 = 0.5 * (trace - diff), x12 = 2.0 * s2 / (h * h);
    NodeGeometry pole;
    local_geometry(pole, x0, x1, x2, x11, x12, x22);
    pole.dA = 0.0;
    for (int j = 0; j < M; ++j) out.nodes[grid.index(0, j)] = pole;
  }

  parallel_for(static_cast<std::size_t>((N - 1) * M), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t q = lo; q < hi; ++q) {
      const int i = 1 + static_cast<int>(q) / M, j = static_cast<int>(q) % M;
      const Vector3d& x = at(i, j);
      const Vector3d xb = (at(i + 1, j) - at(i - 1, j)) / (2 * h);
      const Vector3d xbb = (at(i + 1, j) - 2 * x + at(i - 1, j)) / (h * h);
      const Vector3d xx = (at(i, j + 1) - at(i, j - 1)) / (2 * hx);
      const Vector3d xxx = (at(i, j + 1) - 2 * x + at(i, j - 1)) / (hx * hx);
      const Vector3d xbx =
          (at(i + 1, j + 1) - at(i + 1, j - 1) - at(i - 1, j + 1) + at(i - 1, j - 1)) / (4 * h * hx);
      NodeGeometry& g = out.nodes[grid.index(i, j)];
      const double jac = local_geometry(g, x, xb, xx, xbb, xbx, xxx);
      g.dA = jac * trapezoid_weight(grid, i) * hx;
    }
  });
  out.ghost_x.resize(M);
  for (int j = 0; j < M; ++j) out.ghost_x[j] = at(N, j);
  return out;
}

}  // namespace

double SurfaceSample::kappa_min() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& g : nodes) m = std::min(m, g.kappa(0));
  return m;
}

double SurfaceSample::kappa_max() const {
  double m = -std::numeric_limits<double>::infinity();
  for (const auto& g : nodes) m = std::max(m, g.kappa(g.kappa.size() - 1));
  return m;
}

double SurfaceSample::umbilicity_defect() const {
  double d = 0.0;
  for (const auto& g : nodes) {
    const double lo = g.kappa(0), hi = g.kappa(g.kappa.size() - 1);
    if (lo <= 0.0) return std::numeric_limits<double>::infinity();
    d = std::max(d, hi / lo - 1.0);
  }
  return d;
}

double SurfaceSample::total_area() const {
  std::vector<double> v(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) v[i] = nodes[i].dA;
  return pairwise_sum(v);
}

SurfaceSample reconstruct(const GraphState& state, const HemisphereGrid& grid) {
  if (static_cast<int>(state.u.size()) != grid.nodes() || static_cast<int>(state.ghost.size()) != grid.n_xi)
    throw InvalidInput("state does not match the grid");
  for (double v : state.u)
    if (!std::isfinite(v)) throw InvalidInput("graph values must be finite");
  return grid.axisym() ? reconstruct_axisym(state, grid) : reconstruct_full2d(state, grid);
}

namespace {

double shape_form(const NodeGeometry& g, const Vec& a, const Vec& b) {
  const Eigen::VectorXd pa = g.frame.transpose() * a, pb = g.frame.transpose() * b;
  return pa.dot(g.shape * pb);
}

Vec cross3(const Vec& a, const Vec& b) {
  return Vector3d(a(0), a(1), a(2)).cross(Vector3d(b(0), b(1), b(2)));
}

BoundaryFrame boundary_frame_axisym(const SurfaceSample& s) {
  const auto& grid = s.grid;
  const int N = grid.n_beta, n = grid.n;
  const double h = grid.h_beta();
  const NodeGeometry& g = s.nodes[N - 1];
  BoundaryFrame out;
  BoundaryFrame::Node b;
  const double xr = g.x(0), xz = g.x(n);
  b.N_bar = g.x / g.x.norm();
  b.nu = g.nu;
  b.mu = g.frame.col(0);
  const double alpha = std::atan2(xr, xz);
  b.nu_bar = Vec::Zero(n + 1);
  b.nu_bar(0) = std::cos(alpha);
  b.nu_bar(n) = -std::sin(alpha);
  b.h_mumu = g.shape(0, 0);
  b.h_mu_alpha = g.shape.row(0).tail(n - 1).transpose();
  b.h_alpha = g.shape.bottomRightCorner(n - 1, n - 1);
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n - 1, n - 1);
  b.hhat = (xz / xr) * id;
  b.htilde = (b.mu(0) / xr) * id;
  // parallel curvature along the meridian, one-sided in beta
  auto kp = [&](int i) { return s.nodes[i].shape(1, 1); };
  const double len = (s.ghost_x[0] - s.nodes[N - 2].x).norm() / (2 * h);
  const double dk = (3 * kp(N - 1) - 4 * kp(N - 2) + kp(N - 3)) / (2 * h) / len;
  b.codazzi = dk * id;
  b.ds = sphere_area(n - 1) * std::pow(xr, n - 1);
  out.nodes.push_back(b);
  return out;
}

BoundaryFrame boundary_frame_full2d(const SurfaceSample& s) {
  const auto& grid = s.grid;
  const int N = grid.n_beta, M = grid.n_xi;
  const double h = grid.h_beta(), hx = grid.h_xi();
  auto pos = [&](int i, int j) -> const Vec& { return s.at(i, ((j % M) + M) % M).x; };
  auto x_xi = [&](int i, int j) -> Vec { return (pos(i, j + 1) - pos(i, j - 1)) / (2 * hx); };
  auto unit_xi = [&](int i, int j) -> Vec { return x_xi(i, j).normalized(); };
  auto htt = [&](int i, int j) {
    const Vec t = unit_xi(i, j);
    return shape_form(s.at(i, ((j % M) + M) % M), t, t);
  };
  BoundaryFrame out;
  out.nodes.resize(M);
  for (int j = 0; j < M; ++j) {
    const NodeGeometry& g = s.at(N - 1, j);
    BoundaryFrame::Node& b = out.nodes[j];
    const Vec gx = x_xi(N - 1, j);
    const Vec gxx = (pos(N - 1, j + 1) - 2 * pos(N - 1, j) + pos(N - 1, j - 1)) / (hx * hx);
    const double l2 = gx.squaredNorm();
    const Vec t = gx / std::sqrt(l2);
    b.N_bar = g.x / g.x.norm();
    b.nu = g.nu;
    Vec e1 = g.frame.col(0);
    b.mu = (e1 - e1.dot(t) * t).normalized();
    b.nu_bar = cross3(t, b.N_bar);
    b.h_mumu = shape_form(g, b.mu, b.mu);
    b.h_mu_alpha = Eigen::VectorXd::Constant(1, shape_form(g, b.mu, t));
    b.h_alpha = Eigen::MatrixXd::Constant(1, 1, shape_form(g, t, t));
    b.hhat = Eigen::MatrixXd::Constant(1, 1, -gxx.dot(b.nu_bar) / l2);
    b.htilde = Eigen::MatrixXd::Constant(1, 1, -gxx.dot(b.mu) / l2);
    b.ds = std::sqrt(l2) * hx;

    // (nabla_mu h)(T, T) = mu(h(T, T)) - 2 h(nabla_mu T, T), T = unit x_xi field
    const Vec xb = (s.ghost_x[j] - pos(N - 2, j)) / (2 * h);
    Eigen::Matrix2d gram;
    gram << xb.dot(xb), xb.dot(gx), xb.dot(gx), l2;
    const Eigen::Vector2d ab = gram.ldlt().solve(Eigen::Vector2d(xb.dot(b.mu), gx.dot(b.mu)));
    const double f_beta = (3 * htt(N - 1, j) - 4 * htt(N - 2, j) + htt(N - 3, j)) / (2 * h);
    const double f_xi = (htt(N - 1, j + 1) - htt(N - 1, j - 1)) / (2 * hx);
    const Vec t_beta = (3 * unit_xi(N - 1, j) - 4 * unit_xi(N - 2, j) + unit_xi(N - 3, j)) / (2 * h);
    const Vec t_xi = (unit_xi(N - 1, j + 1) - unit_xi(N - 1, j - 1)) / (2 * hx);
    const Vec dt = ab(0) * t_beta + ab(1) * t_xi;
    const double val = ab(0) * f_beta + ab(1) * f_xi - 2.0 * shape_form(g, dt, t);
    b.codazzi = Eigen::MatrixXd::Constant(1, 1, val);
  }
  return out;
}

}  // namespace

BoundaryFrame boundary_frame(const SurfaceSample& sample) {
  return sample.grid.axisym() ? boundary_frame_axisym(sample) : boundary_frame_full2d(sample);
}

BoundaryRelations boundary_relations(const BoundaryFrame& frame, double theta) {
  const double ct = cos_angle(theta), st = sin_angle(theta);
  BoundaryRelations r;
  for (const auto& b : frame.nodes) {
    const int m = static_cast<int>(b.h_alpha.rows());
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(m, m);
    r.angle = std::max(r.angle, std::abs(b.N_bar.dot(b.nu) + ct));
    r.frame = std::max(r.frame, (b.N_bar - (st * b.mu - ct * b.nu)).cwiseAbs().maxCoeff());
    r.frame = std::max(r.frame, (b.nu_bar - (ct * b.mu + st * b.nu)).cwiseAbs().maxCoeff());
    if (m > 0) r.principal = std::max(r.principal, b.h_mu_alpha.cwiseAbs().maxCoeff());
    r.hhat = std::max(r.hhat, (b.h_alpha - (st * b.hhat - ct * id)).cwiseAbs().maxCoeff());
    r.htilde = std::max(r.htilde, (b.htilde - (ct / st * b.h_alpha + id / st)).cwiseAbs().maxCoeff());
    r.codazzi =
        std::max(r.codazzi, (b.codazzi - b.htilde * (b.h_mumu * id - b.h_alpha)).cwiseAbs().maxCoeff());
  }
  return r;
}

void write_obj(const SurfaceSample& s, const std::string& path, const Eigen::MatrixXd& rotation) {
  if (s.grid.n != 2) throw InvalidInput("OBJ export needs a 2-dimensional surface");
  const int N = s.grid.n_beta;
  const bool axisym = s.grid.axisym();
  const int M = axisym ? 64 : s.grid.n_xi;
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot open " + path);
  out << std::setprecision(10);
  auto emit = [&](Vec p) {
    if (rotation.size() > 0) p = rotation * p;
    out << "v " << p(0) << ' ' << p(1) << ' ' << p(2) << '\n';
  };
  auto point = [&](int i, int j) -> Vec {
    if (!axisym) return s.at(i, j).x;
    const Vec& m = s.nodes[i].x;
    const double xi = 2.0 * kPi * j / M;
    Vec p(3);
    p << m(0) * std::cos(xi), m(0) * std::sin(xi), m(2);
    return p;
  };
  emit(point(0, 0));
  for (int i = 1; i < N; ++i)
    for (int j = 0; j < M; ++j) emit(point(i, j));
  auto v = [&](int i, int j) { return i == 0 ? 1 : 2 + (i - 1) * M + (j % M); };
  for (int j = 0; j < M; ++j) out << "f " << v(0, 0) << ' ' << v(1, j + 1) << ' ' << v(1, j) << '\n';
  for (int i = 1; i + 1 < N; ++i)
    for (int j = 0; j < M; ++j) {
      out << "f " << v(i, j) << ' ' << v(i, j + 1) << ' ' << v(i + 1, j + 1) << '\n';
      out << "f " << v(i, j) << ' ' << v(i + 1, j + 1) << ' ' << v(i + 1, j) << '\n';
    }
}

void write_profile_csv(const SurfaceSample& s, const GraphState& state, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot open " + path);
  out << std::setprecision(17) << "beta,u,kappa_min,kappa_max\n";
  for (int i = 0; i < s.grid.n_beta; ++i) {
    const NodeGeometry& g = s.at(i, 0);
    out << s.grid.beta(i) << ',' << state.u[s.grid.index(i, 0)] << ',' << g.kappa(0) << ','
        << g.kappa(g.kappa.size() - 1) << '\n';
  }
}

}  // namespace capflow
