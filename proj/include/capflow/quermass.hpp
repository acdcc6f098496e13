#pragma once

#include "capflow/cap.hpp"
#include "capflow/surface.hpp"

#include <string>
#include <vector>

namespace capflow {

struct BoundaryRegion {
  double area = 0.0;               // |hat(partial Sigma)| in S^n
  double length = 0.0;             // |partial Sigma|
  std::vector<double> spherical;   // W_0^S .. W_n^S
  bool nonconvex = false;          // geodesic curvature changes sign
};

BoundaryRegion boundary_region(const SurfaceSample& sample);
double enclosed_volume(const SurfaceSample& sample);

struct QuermassVector {
  std::vector<double> W;
  double area = 0.0;
  double boundary_length = 0.0;
  double boundary_area = 0.0;
  std::vector<double> spherical;
  double theta = 0.0;
  int n = 2;
  BoundarySign sign = BoundarySign::general_as_typeset;
  std::vector<std::string> warnings;
};

QuermassParts sample_parts(const SurfaceSample& sample);
QuermassVector quermass_vector(const SurfaceSample& sample, double theta);
QuermassVector quermass_vector(const SurfaceSample& sample, double theta, BoundarySign sign);
double quermass_theta(const SurfaceSample& sample, int k, double theta);
// the theta = pi/2 assembly
std::vector<double> quermass_free_boundary(const SurfaceSample& sample, BoundarySign sign);

double minkowski_residual(const SurfaceSample& sample, int k, double theta);
// n^2/(n+1) int (H_2 - H_1^2) <X_e, nu> dA
double dissipation(const SurfaceSample& sample);
// int g dA with g evaluated per node
double integrate(const SurfaceSample& sample, const std::vector<double>& values);

}  // namespace capflow
