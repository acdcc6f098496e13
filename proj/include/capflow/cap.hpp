#pragma once

#include "capflow/grid.hpp"

#include <Eigen/Dense>
#include <limits>
#include <memory>
#include <vector>

namespace capflow {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct CapParams {
  double theta = 0.5 * 3.14159265358979323846;
  double r = 1.0;  // kInfinity for the flat ball
  int n = 2;

  bool flat() const { return r == kInfinity; }
  void validate() const;
};

double cap_center(const CapParams& p);

// angular data of the cap and of its half-space image sphere
struct CapShape {
  double alpha = 0.0;  // polar angle of the boundary circle on S^n
  double psi = 0.0;    // half-angle of the cap seen from the sphere centre (0 for flat)
  double c_y = 0.0;    // centre height of the image sphere in the half-space
  double R_y = 1.0;    // radius of the image sphere
};
CapShape cap_shape(const CapParams& p);

// u = log rho of the image graph, and its beta derivatives (analytic)
double cap_profile(const CapParams& p, double beta);
double cap_profile_slope(const CapParams& p, double beta);

// graph of the cap on the grid; the ghost row is the analytic continuation
GraphState cap_graph(const CapParams& p, const HemisphereGrid& grid);

// sign of the boundary constant k/(n-k+1) W_{k-1}^S in the quermassintegral assembly:
// general_as_typeset keeps the general formula as printed (constant enters with +),
// free_boundary_as_typeset keeps the free-boundary formula as printed (constant enters with -)
enum class BoundarySign { general_as_typeset, free_boundary_as_typeset };
const char* to_string(BoundarySign s);

// the convention passing the variational test on the exact cap family (computed once)
BoundarySign resolved_boundary_sign();

// ingredients for the assembly of W_{0..n}
struct QuermassParts {
  double volume = 0.0;
  double area = 0.0;
  std::vector<double> int_H;       // int_Sigma H_k dA, k = 0..n
  std::vector<double> spherical;   // W_k^{S^n} of the boundary region, k = 0..n
};

std::vector<double> assemble_quermass(const QuermassParts& parts, double theta, int n,
                                      BoundarySign sign);
// the theta = pi/2 formula, with the resolved sign of the boundary constant
std::vector<double> assemble_quermass_free_boundary(const QuermassParts& parts, int n,
                                                    BoundarySign sign);

// spherical quermassintegrals of a latitude cap of polar radius alpha in S^n
std::vector<double> latitude_cap_quermass(double alpha, int n);

QuermassParts cap_parts(const CapParams& p);
double cap_quermass(const CapParams& p, int k);
double cap_quermass(const CapParams& p, int k, BoundarySign sign);
std::vector<double> cap_quermass_all(const CapParams& p, BoundarySign sign);

// relative mismatch of dW_k/dr against the variational formula on the cap family
std::vector<double> cap_variational_defect(double theta, double r, int n, BoundarySign sign);

// f_k(infinity), the flat-ball value; f_k(0+) = 0 for every k
double cap_quermass_upper_limit(double theta, int n, int k);

class CapProfileTable {
 public:
  CapProfileTable(double theta, int n);
  static std::shared_ptr<const CapProfileTable> get(double theta, int n);

  double theta() const { return theta_; }
  int n() const { return n_; }
  const std::vector<double>& radii() const { return radii_; }
  const Eigen::MatrixXd& values() const { return values_; }  // row per radius, column per k

  // monotone cubic interpolation of log r as a function of f_k
  double guess_log_radius(int k, double value) const;

 private:
  double theta_;
  int n_;
  std::vector<double> radii_;
  Eigen::MatrixXd values_;
  Eigen::MatrixXd slopes_;  // d(log r)/d f_k at the knots
  std::vector<int> used_;   // knots in use per k
};

double cap_radius_from_quermass(double theta, int n, int k, double value);

// largest inscribed cap R1 and smallest circumscribed cap R2 bracketing a graph in u
// (R2 is infinite when the graph dips below the flat ball somewhere)
struct ShellRadii {
  double R1 = 0.0;
  double R2 = kInfinity;
};
ShellRadii shell_radii(const GraphState& state, const HemisphereGrid& grid, double theta, double tol = 0.0);
// max violation of u_{R2} <= u <= u_{R1} over the grid (<= 0 inside the shell)
double shell_violation(const GraphState& state, const HemisphereGrid& grid, double theta, const ShellRadii& shell);

// the constants delta_0 .. delta_4 of a cap shell; delta_0 = 0 for R2 infinite
struct ShellDeltas {
  double d0 = 0.0, d1 = 0.0, d2 = 0.0, d3 = 0.0, d4 = 0.0;
};
ShellDeltas shell_deltas(double theta, double R1, double R2);

}  // namespace capflow
