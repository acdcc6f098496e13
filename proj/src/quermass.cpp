#include "capflow/quermass.hpp"

#include "capflow/errors.hpp"
#include "capflow/numerics.hpp"

#include <cmath>

namespace capflow {

double integrate(const SurfaceSample& s, const std::vector<double>& values) {
  std::vector<double> terms(s.nodes.size());
  for (std::size_t q = 0; q < s.nodes.size(); ++q) terms[q] = values[q] * s.nodes[q].dA;
  return pairwise_sum(terms);
}

BoundaryRegion boundary_region(const SurfaceSample& s) {
  const auto& grid = s.grid;
  const int n = grid.n, N = grid.n_beta;
  BoundaryRegion out;
  if (grid.axisym()) {
    const Vec& x = s.nodes[N - 1].x;
    const double alpha = std::atan2(x(0), x(n));
    out.area = sphere_area(n - 1) * sin_power_integral(n - 1, alpha);
    out.length = sphere_area(n - 1) * std::pow(std::sin(alpha), n - 1);
    out.spherical = latitude_cap_quermass(alpha, n);
    return out;
  }
  const BoundaryFrame frame = boundary_frame(s);
  const int M = grid.n_xi;
  std::vector<double> seg(M), curv(M);
  bool pos = false, neg = false;
  for (int j = 0; j < M; ++j) {
    seg[j] = (s.at(N - 1, (j + 1) % M).x - s.at(N - 1, j).x).norm();
    const double kg = frame.nodes[j].hhat(0, 0);
    curv[j] = kg * frame.nodes[j].ds;
    pos = pos || kg > 0.0;
    neg = neg || kg < 0.0;
  }
  out.nonconvex = pos && neg;
  out.length = pairwise_sum(seg);
  const double total_curvature = pairwise_sum(curv);
  out.area = 2.0 * kPi - total_curvature;
  out.spherical = {out.area, out.length / 2.0, 0.5 * total_curvature + 0.5 * out.area};
  return out;
}

double enclosed_volume(const SurfaceSample& s) {
  std::vector<double> support(s.nodes.size());
  for (std::size_t q = 0; q < s.nodes.size(); ++q) support[q] = s.nodes[q].x.dot(s.nodes[q].nu);
  return (boundary_region(s).area + integrate(s, support)) / (s.grid.n + 1);
}

QuermassParts sample_parts(const SurfaceSample& s) {
  const int n = s.grid.n;
  QuermassParts q;
  const BoundaryRegion region = boundary_region(s);
  std::vector<double> support(s.nodes.size());
  for (std::size_t i = 0; i < s.nodes.size(); ++i) support[i] = s.nodes[i].x.dot(s.nodes[i].nu);
  q.volume = (region.area + integrate(s, support)) / (n + 1);
  q.area = s.total_area();
  q.int_H.assign(n + 1, 0.0);
  std::vector<double> hk(s.nodes.size());
  for (int k = 0; k <= n; ++k) {
    for (std::size_t i = 0; i < s.nodes.size(); ++i) hk[i] = s.nodes[i].H(k);
    q.int_H[k] = integrate(s, hk);
  }
  q.spherical = region.spherical;
  return q;
}

QuermassVector quermass_vector(const SurfaceSample& s, double theta, BoundarySign sign) {
  const QuermassParts parts = sample_parts(s);
  QuermassVector out;
  out.W = assemble_quermass(parts, theta, s.grid.n, sign);
  out.area = parts.area;
  out.boundary_area = parts.spherical[0];
  out.boundary_length = parts.spherical[1] * s.grid.n;
  out.spherical = parts.spherical;
  out.theta = theta;
  out.n = s.grid.n;
  out.sign = sign;
  if (!s.grid.axisym() && boundary_region(s).nonconvex)
    out.warnings.push_back("NonConvexBoundary: geodesic curvature of the boundary changes sign");
  return out;
}

QuermassVector quermass_vector(const SurfaceSample& s, double theta) {
  return quermass_vector(s, theta, resolved_boundary_sign());
}

double quermass_theta(const SurfaceSample& s, int k, double theta) {
  if (k < 0 || k > s.grid.n) throw InvalidInput("quermassintegral index out of range");
  return quermass_vector(s, theta).W[k];
}

std::vector<double> quermass_free_boundary(const SurfaceSample& s, BoundarySign sign) {
  return assemble_quermass_free_boundary(sample_parts(s), s.grid.n, sign);
}

double minkowski_residual(const SurfaceSample& s, int k, double theta) {
  if (k < 1 || k > s.grid.n) throw InvalidInput("Minkowski index must lie in [1, n]");
  const double ct = cos_angle(theta);
  const int n = s.grid.n;
  std::vector<double> g(s.nodes.size());
  for (std::size_t q = 0; q < s.nodes.size(); ++q) {
    const NodeGeometry& p = s.nodes[q];
    g[q] = p.H(k - 1) * (p.x(n) + ct * p.nu(n)) - p.H(k) * p.xe_nu;
  }
  return integrate(s, g);
}

double dissipation(const SurfaceSample& s) {
  const int n = s.grid.n;
  std::vector<double> g(s.nodes.size());
  for (std::size_t q = 0; q < s.nodes.size(); ++q) {
    const NodeGeometry& p = s.nodes[q];
    g[q] = (p.H(2) - p.H(1) * p.H(1)) * p.xe_nu;
  }
  return static_cast<double>(n * n) / (n + 1) * integrate(s, g);
}

}  // namespace capflow
