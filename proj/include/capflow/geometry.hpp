#pragma once

#include <Eigen/Dense>

namespace capflow {

inline constexpr double kTolGeom = 1e-12;

using Vec = Eigen::VectorXd;

struct BallPoint {
  Vec coordinates;
};

struct HalfSpacePolar {
  double rho = 1.0;
  double beta = 0.0;
  Vec xi;  // unit vector in R^n
};

struct Direction {
  Vec e;
  explicit Direction(Vec v);
  static Direction axis(int n);  // e_{n+1}
};

Vec xe_field(const BallPoint& x, const Direction& e);
HalfSpacePolar to_halfspace(const BallPoint& x);
BallPoint to_ball(const HalfSpacePolar& p);
double conformal_factor(double rho, double beta);

// the Moebius map on raw coordinates, both directions
Vec moebius(const Vec& x);
Vec moebius_inverse(const Vec& y);

// rotation R with R * e_{n+1} = e (det +1)
Eigen::MatrixXd rotation_from_axis(const Direction& e);

}  // namespace capflow
