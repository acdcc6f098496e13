#pragma once

#include "capflow/geometry.hpp"
#include "capflow/grid.hpp"

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace capflow {

struct NodeGeometry {
  Vec x;                  // position in the ball
  Vec nu;                 // unit normal, outward from the enclosed domain
  Eigen::MatrixXd frame;  // (n+1) x n orthonormal tangent frame
  Eigen::MatrixXd shape;  // second fundamental form in that frame
  Eigen::VectorXd kappa;  // ascending
  Eigen::VectorXd H;      // normalized H_0 .. H_n
  double dA = 0.0;        // quadrature weight
  double xe_nu = 0.0;
};

struct SurfaceSample {
  HemisphereGrid grid;
  std::vector<NodeGeometry> nodes;
  std::vector<Vec> ghost_x;  // embedding of the ghost row beyond the equator

  const NodeGeometry& at(int i, int j) const { return nodes[grid.index(i, j)]; }
  double kappa_min() const;
  double kappa_max() const;
  // max over nodes of kappa_max / kappa_min - 1
  double umbilicity_defect() const;
  double total_area() const;
  int dim() const { return grid.n; }
};

SurfaceSample reconstruct(const GraphState& state, const HemisphereGrid& grid);

struct BoundaryFrame {
  struct Node {
    Vec N_bar, mu, nu_bar, nu;
    double h_mumu = 0.0;
    Eigen::VectorXd h_mu_alpha;  // h(mu, e_alpha)
    Eigen::MatrixXd h_alpha;     // h restricted to the boundary tangent space
    Eigen::MatrixXd hhat;        // second fundamental form of the boundary in S^n
    Eigen::MatrixXd htilde;      // second fundamental form of the boundary in Sigma
    Eigen::MatrixXd codazzi;     // (nabla_mu h)_{alpha beta}
    double ds = 0.0;             // boundary measure weight
  };
  std::vector<Node> nodes;
};

BoundaryFrame boundary_frame(const SurfaceSample& sample);

struct BoundaryRelations {
  double angle = 0.0;          // max |<N_bar, nu> + cos theta|
  double frame = 0.0;          // max |N_bar - (sin mu - cos nu)| and same for nu_bar
  double principal = 0.0;      // max |h(mu, e_alpha)|
  double hhat = 0.0;           // relation h = sin hhat - cos delta
  double htilde = 0.0;         // relation htilde = cot h + delta / sin
  double codazzi = 0.0;        // relation nabla_mu h = htilde (h_mumu delta - h)
};
BoundaryRelations boundary_relations(const BoundaryFrame& frame, double theta);

// OBJ mesh of a full2d sample; rotation maps e_{n+1} to the user direction
void write_obj(const SurfaceSample& sample, const std::string& path,
               const Eigen::MatrixXd& rotation = Eigen::MatrixXd());
// beta, u, kappa_min, kappa_max per latitude (axisym)
void write_profile_csv(const SurfaceSample& sample, const GraphState& state, const std::string& path);

}  // namespace capflow
