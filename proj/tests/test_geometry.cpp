#include "capflow/errors.hpp"
#include "capflow/geometry.hpp"
#include "capflow/numerics.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace capflow;

namespace {

Vec unit(int dim, int axis) {
  Vec v = Vec::Zero(dim);
  v(axis) = 1.0;
  return v;
}

Vec random_ball_point(std::mt19937_64& rng, int dim, double radius) {
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u;
  Vec v(dim);
  for (int i = 0; i < dim; ++i) v(i) = g(rng);
  return v.normalized() * radius * std::pow(u(rng), 1.0 / dim);
}

}  // namespace

TEST_CASE("xe_field values") {
  for (int n : {2, 3}) {
    const Direction e = Direction::axis(n);
    CHECK((xe_field(BallPoint{Vec::Zero(n + 1)}, e) + 0.5 * e.e).norm() < 1e-15);
    CHECK(xe_field(BallPoint{e.e}, e).norm() < 1e-15);
    CHECK(xe_field(BallPoint{-e.e}, e).norm() < 1e-15);
  }
}

TEST_CASE("xe_field is tangential on the sphere") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  const Direction e = Direction::axis(2);
  for (int k = 0; k < 1000; ++k) {
    Vec x(3);
    for (int i = 0; i < 3; ++i) x(i) = g(rng);
    x.normalize();
    CHECK(std::abs(xe_field(BallPoint{x}, e).dot(x)) < kTolGeom);
  }
}

TEST_CASE("to_halfspace special points") {
  const int n = 2;
  HalfSpacePolar p = to_halfspace(BallPoint{Vec::Zero(n + 1)});
  CHECK(p.rho == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(p.beta == doctest::Approx(0.0));
  CHECK(to_halfspace(BallPoint{-unit(n + 1, n)}).rho < 1e-14);
  std::mt19937_64 rng(3);
  for (int k = 0; k < 200; ++k) {
    Vec x = random_ball_point(rng, n + 1, 0.999);
    x(n) = 0.0;
    CHECK(to_halfspace(BallPoint{x}).rho == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("to_ball special points") {
  HalfSpacePolar p;
  p.rho = 1.0;
  p.beta = 0.0;
  p.xi = unit(2, 0);
  CHECK(to_ball(p).coordinates.norm() < 1e-15);
  p.rho = 0.0;
  CHECK((to_ball(p).coordinates + unit(3, 2)).norm() < 1e-15);
}

TEST_CASE("round trip away from e") {
  std::mt19937_64 rng(11);
  for (int n : {2, 3}) {
    const Vec e = unit(n + 1, n);
    int tested = 0;
    double worst = 0.0;
    while (tested < 10000) {
      const Vec x = random_ball_point(rng, n + 1, 1.0);
      if ((x - e).norm() < 0.1) continue;
      const Vec back = to_ball(to_halfspace(BallPoint{x})).coordinates;
      worst = std::max(worst, (back - x).norm());
      ++tested;
    }
    CHECK(worst < 10 * kTolGeom);
  }
}

TEST_CASE("sphere maps to the boundary hyperplane") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  for (int k = 0; k < 500; ++k) {
    Vec x(3);
    for (int i = 0; i < 3; ++i) x(i) = g(rng);
    x.normalize();
    if ((x - unit(3, 2)).norm() < 0.1) continue;
    CHECK(to_halfspace(BallPoint{x}).beta == doctest::Approx(0.5 * kPi).epsilon(1e-12));
  }
  HalfSpacePolar p;
  p.rho = 0.7;
  p.beta = 0.5 * kPi;
  p.xi = Vec::Ones(2).normalized();
  CHECK(to_ball(p).coordinates.norm() == doctest::Approx(1.0).epsilon(kTolGeom));
}

TEST_CASE("conformal factor") {
  CHECK(conformal_factor(1.0, 0.5 * kPi) == doctest::Approx(1.0));
  CHECK(conformal_factor(1.0, 0.0) == doctest::Approx(0.5));
  std::mt19937_64 rng(13);
  for (int k = 0; k < 1000; ++k) {
    const Vec x = random_ball_point(rng, 3, 0.98);
    const HalfSpacePolar p = to_halfspace(BallPoint{x});
    const double ball_side = (x.head(2).squaredNorm() + (x(2) - 1.0) * (x(2) - 1.0)) / 2.0;
    CHECK(std::abs(conformal_factor(p.rho, p.beta) / ball_side - 1.0) < 1e-10);
  }
}

TEST_CASE("moebius map is conformal") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g;
  const double step = 1e-5;
  for (int k = 0; k < 200; ++k) {
    const Vec x = random_ball_point(rng, 3, 0.9);
    Eigen::Matrix3d q = Eigen::Matrix3d::NullaryExpr([&] { return g(rng); }).householderQr().householderQ();
    Eigen::MatrixXd J(3, 2);
    for (int c = 0; c < 2; ++c)
      J.col(c) = (moebius(x + step * q.col(c)) - moebius(x - step * q.col(c))) / (2 * step);
    const double a = J.col(0).norm(), b = J.col(1).norm();
    CHECK(std::abs(a - b) / a < 1e-6);
    CHECK(std::abs(J.col(0).dot(J.col(1))) / (a * b) < 1e-6);
  }
}

TEST_CASE("moebius inverse") {
  std::mt19937_64 rng(19);
  for (int k = 0; k < 1000; ++k) {
    const Vec x = random_ball_point(rng, 4, 0.95);
    CHECK((moebius_inverse(moebius(x)) - x).norm() < 1e-11);
  }
}

TEST_CASE("rotation onto a direction") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> g;
  for (int n : {2, 3}) {
    for (int k = 0; k < 20; ++k) {
      Vec v(n + 1);
      for (int i = 0; i < n + 1; ++i) v(i) = g(rng);
      const Direction e(v.normalized());
      const Eigen::MatrixXd R = rotation_from_axis(e);
      CHECK((R * unit(n + 1, n) - e.e).norm() < 1e-13);
      CHECK((R.transpose() * R - Eigen::MatrixXd::Identity(n + 1, n + 1)).norm() < 1e-13);
      CHECK(R.determinant() == doctest::Approx(1.0));
    }
    const Direction minus(-unit(n + 1, n));
    CHECK((rotation_from_axis(minus) * unit(n + 1, n) + unit(n + 1, n)).norm() < 1e-13);
  }
  CHECK_THROWS_AS(Direction(Vec::Zero(3)), InvalidInput);
}
