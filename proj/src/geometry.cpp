#include "capflow/geometry.hpp"

#include "capflow/errors.hpp"

#include <cmath>

namespace capflow {

Direction::Direction(Vec v) : e(std::move(v)) {
  const double len = e.norm();
  if (e.size() < 3 || std::abs(len - 1.0) > 1e-6)
    throw InvalidInput("direction must be a unit vector of dimension >= 3");
  e /= len;
}

Direction Direction::axis(int n) {
  Vec v = Vec::Zero(n + 1);
  v(n) = 1.0;
  return Direction(v);
}

Vec xe_field(const BallPoint& x, const Direction& e) {
  const Vec& p = x.coordinates;
  return p.dot(e.e) * p - 0.5 * (p.squaredNorm() + 1.0) * e.e;
}

Vec moebius(const Vec& x) {
  const int n = static_cast<int>(x.size()) - 1;
  const double xn = x(n);
  const double xp2 = x.head(n).squaredNorm();
  const double denom = xp2 + (xn - 1.0) * (xn - 1.0);
  if (std::sqrt(denom) < kTolGeom) throw SingularPoint("Moebius map is singular at e");
  Vec y(n + 1);
  y.head(n) = 2.0 * x.head(n) / denom;
  y(n) = (1.0 - xp2 - xn * xn) / denom;
  return y;
}

Vec moebius_inverse(const Vec& y) {
  const int n = static_cast<int>(y.size()) - 1;
  const double yn = y(n);
  const double denom = y.head(n).squaredNorm() + (yn + 1.0) * (yn + 1.0);
  Vec x(n + 1);
  x.head(n) = 2.0 * y.head(n) / denom;
  x(n) = (y.squaredNorm() - 1.0) / denom;
  return x;
}

HalfSpacePolar to_halfspace(const BallPoint& x) {
  const Vec y = moebius(x.coordinates);
  const int n = static_cast<int>(y.size()) - 1;
  HalfSpacePolar p;
  p.rho = y.norm();
  const double yp = y.head(n).norm();
  p.beta = std::atan2(yp, std::max(y(n), 0.0));
  p.xi = Vec::Zero(n);
  if (yp > 0.0)
    p.xi = y.head(n) / yp;
  else
    p.xi(0) = 1.0;
  return p;
}

BallPoint to_ball(const HalfSpacePolar& p) {
  const int n = static_cast<int>(p.xi.size());
  Vec y(n + 1);
  y.head(n) = p.rho * std::sin(p.beta) * p.xi;
  y(n) = p.rho * std::cos(p.beta);
  return BallPoint{moebius_inverse(y)};
}

double conformal_factor(double rho, double beta) {
  return 2.0 / (rho * rho + 2.0 * rho * std::cos(beta) + 1.0);
}

Eigen::MatrixXd rotation_from_axis(const Direction& dir) {
  const int d = static_cast<int>(dir.e.size());
  Vec a = Vec::Zero(d);
  a(d - 1) = 1.0;
  const Vec& b = dir.e;
  // compose two Householder reflections: a -> b, then a sign fix on a vector orthogonal to b
  if ((a - b).norm() < 1e-15) return Eigen::MatrixXd::Identity(d, d);
  if ((a + b).norm() < 1e-15) {
    Eigen::MatrixXd r = Eigen::MatrixXd::Identity(d, d);
    r(0, 0) = -1.0;
    r(d - 1, d - 1) = -1.0;
    return r;
  }
  const Vec w = (a - b).normalized();
  Eigen::MatrixXd h1 = Eigen::MatrixXd::Identity(d, d) - 2.0 * w * w.transpose();
  // second reflection about a hyperplane containing b
  Vec t = Vec::Zero(d);
  int idx = 0;
  for (int i = 0; i < d; ++i)
    if (std::abs(b(i)) < std::abs(b(idx))) idx = i;
  t(idx) = 1.0;
  t -= t.dot(b) * b;
  t.normalize();
  Eigen::MatrixXd h2 = Eigen::MatrixXd::Identity(d, d) - 2.0 * t * t.transpose();
  return h2 * h1;
}

}  // namespace capflow
