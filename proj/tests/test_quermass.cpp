#include "capflow/cap.hpp"
#include "capflow/numerics.hpp"
#include "capflow/quermass.hpp"
#include "capflow/surface.hpp"
#include "capflow/verify.hpp"

#include <doctest.h>

#include <cmath>

using namespace capflow;

namespace {

SurfaceSample cap_sample(double theta, double r, const HemisphereGrid& g) {
  return reconstruct(cap_graph(CapParams{theta, r, g.n}, g), g);
}

}  // namespace

TEST_CASE("enclosed volume oracles") {
  const HemisphereGrid g(GridMode::axisym, 2, 128);
  const double h2 = g.h_beta() * g.h_beta();
  CHECK(std::abs(enclosed_volume(cap_sample(0.5 * kPi, kInfinity, g)) - 2 * kPi / 3) < h2);
  CHECK(std::abs(enclosed_volume(cap_sample(0.5 * kPi, 1.0, g)) - kPi * (8 - 5 * std::sqrt(2.0)) / 6) < h2);
  const HemisphereGrid f(GridMode::full2d, 2, 32, 64);
  CHECK(std::abs(enclosed_volume(cap_sample(0.5 * kPi, 1.0, f)) - kPi * (8 - 5 * std::sqrt(2.0)) / 6) <
        f.h_beta() * f.h_beta());
}

TEST_CASE("support function sign on convex samples") {
  const HemisphereGrid g(GridMode::axisym, 2, 128);
  for (double theta : {kPi / 3, 0.5 * kPi}) {
    const RandomSample rs = random_convex_sample(theta, g, 7);
    for (const auto& node : rs.sample.nodes) CHECK(node.x.dot(node.nu) <= -cos_angle(theta) + 1e-9);
  }
}

TEST_CASE("boundary region of the flat ball") {
  const HemisphereGrid g(GridMode::axisym, 2, 128);
  const double h2 = g.h_beta() * g.h_beta();
  for (double theta : {kPi / 3, 0.5 * kPi}) {
    const BoundaryRegion b = boundary_region(cap_sample(theta, kInfinity, g));
    CHECK(std::abs(b.length - 2 * kPi * sin_angle(theta)) < h2);
    CHECK(std::abs(b.area - 2 * kPi * (1 - cos_angle(theta))) < h2);
  }
}

TEST_CASE("boundary region of caps matches the latitude cap") {
  for (double theta : {kPi / 3, 0.5 * kPi})
    for (double r : {0.5, 2.0}) {
      const CapParams p{theta, r, 2};
      const auto exact = latitude_cap_quermass(cap_shape(p).alpha, 2);
      std::vector<double> err, h;
      for (int N : {64, 128, 256}) {
        const HemisphereGrid g(GridMode::axisym, 2, N);
        err.push_back(std::abs(boundary_region(cap_sample(theta, r, g)).area - exact[0]));
        h.push_back(g.h_beta());
      }
      CHECK(err.back() < 1e-6);
      CHECK(order_row("region", err, h).min_order >= 1.9);
    }
}

TEST_CASE("quermassintegrals of caps") {
  for (double theta : {kPi / 3, 0.5 * kPi})
    for (double r : {0.5, 1.0, 2.0})
      for (int k = 0; k <= 2; ++k) {
        const double exact = cap_quermass(CapParams{theta, r, 2}, k);
        std::vector<double> err, h;
        for (int N : {64, 128, 256}) {
          const HemisphereGrid g(GridMode::axisym, 2, N);
          err.push_back(std::abs(quermass_theta(cap_sample(theta, r, g), k, theta) - exact));
          h.push_back(g.h_beta());
        }
        CHECK(order_row("quermass", err, h).min_order >= 1.9);
      }
  const HemisphereGrid g(GridMode::axisym, 2, 128);
  const SurfaceSample flat = cap_sample(0.5 * kPi, kInfinity, g);
  CHECK(std::abs(quermass_theta(flat, 1, 0.5 * kPi) - kPi / 3) < g.h_beta() * g.h_beta());
  CHECK(quermass_theta(flat, 0, 0.5 * kPi) == doctest::Approx(enclosed_volume(flat)));
}

TEST_CASE("quermassintegrals for n = 3") {
  const HemisphereGrid g(GridMode::axisym, 3, 128);
  for (int k = 0; k <= 3; ++k) {
    const double exact = cap_quermass(CapParams{kPi / 3, 1.0, 3}, k);
    CHECK(std::abs(quermass_theta(cap_sample(kPi / 3, 1.0, g), k, kPi / 3) - exact) < 1e-6);
  }
}

TEST_CASE("free-boundary assembly agrees at theta = pi/2") {
  const HemisphereGrid g(GridMode::axisym, 2, 128);
  for (std::uint64_t seed = 100; seed < 120; ++seed) {
    const RandomSample rs = random_convex_sample(0.5 * kPi, g, seed);
    const QuermassVector q = quermass_vector(rs.sample, 0.5 * kPi);
    const auto fb = quermass_free_boundary(rs.sample, q.sign);
    for (int k = 0; k <= 2; ++k) CHECK(std::abs(q.W[k] - fb[k]) < 1e-12 * std::max(1.0, std::abs(fb[k])));
  }
}

TEST_CASE("Minkowski residual") {
  const double theta = kPi / 3;
  double prev = 0.0;
  for (int N : {64, 128}) {
    const HemisphereGrid g(GridMode::axisym, 2, N);
    const double res = std::abs(minkowski_residual(cap_sample(theta, 1.0, g), 1, theta));
    if (prev > 0.0) CHECK(prev / res >= 3.5);
    prev = res;
  }
  const HemisphereGrid g(GridMode::axisym, 2, 128);
  for (int k = 1; k <= 2; ++k) CHECK(std::abs(minkowski_residual(cap_sample(theta, kInfinity, g), k, theta)) < 1e-8);
  const HemisphereGrid fine(GridMode::axisym, 2, 256);
  const RandomSample rs = random_convex_sample(theta, fine, 5);
  for (int k = 1; k <= 2; ++k) CHECK(std::abs(minkowski_residual(rs.sample, k, theta)) <= 5e-3);
}

TEST_CASE("dissipation vanishes on caps") {
  const HemisphereGrid g(GridMode::axisym, 2, 128);
  CHECK(std::abs(dissipation(cap_sample(kPi / 3, 1.0, g))) < 1e-8);
}
