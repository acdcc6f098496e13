#include "capflow/numerics.hpp"

#include "capflow/errors.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <thread>

namespace capflow {

double cos_angle(double theta) {
  if (std::abs(theta - kPi / 2) < 1e-14) return 0.0;
  return std::cos(theta);
}

double sin_angle(double theta) {
  if (std::abs(theta - kPi / 2) < 1e-14) return 1.0;
  return std::sin(theta);
}

double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.subspan(0, half)) + pairwise_sum(v.subspan(half));
}

double sphere_area(int m) {
  return 2.0 * std::pow(kPi, 0.5 * (m + 1)) / std::tgamma(0.5 * (m + 1));
}

double ball_volume(int m) { return std::pow(kPi, 0.5 * m) / std::tgamma(0.5 * m + 1.0); }

double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double b = 1.0;
  for (int i = 1; i <= k; ++i) b = b * (n - k + i) / i;
  return b;
}

double sin_power_integral(int m, double g) {
  if (g == 0.0) return 0.0;
  // 1 - cos g without cancellation
  const double s2 = std::sin(0.5 * g);
  const double omc = 2.0 * s2 * s2;
  const double c = std::cos(g);
  auto f = [m](double t) { return std::pow(std::sin(t), m); };
  // short ranges: the integrand is a polynomial to working precision, and the
  // closed form for m = 2 cancels
  if (m >= 2 && g <= 0.5) return boost::math::quadrature::gauss<double, 30>::integrate(f, 0.0, g);
  switch (m) {
    case 0:
      return g;
    case 1:
      return omc;
    case 2:
      return 0.5 * (g - std::sin(g) * c);
    case 3:
      return omc * omc * (2.0 + c) / 3.0;
    default:
      break;
  }
  double err = 0.0;
  const double val = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      f, 0.0, g, 15, 1e-14, &err);
  if (!(err <= 1e-11 * std::abs(val) + 1e-16))
    throw QuadratureFailure("sin-power quadrature did not reach tolerance");
  return val;
}

double sin_power_integral(int m, double a, double b) {
  return sin_power_integral(m, b) - sin_power_integral(m, a);
}

Eigen::VectorXd normalized_symmetric(const Eigen::VectorXd& kappa) {
  const int n = static_cast<int>(kappa.size());
  Eigen::VectorXd e = Eigen::VectorXd::Zero(n + 1);
  e(0) = 1.0;
  for (int i = 0; i < n; ++i)
    for (int k = i + 1; k >= 1; --k) e(k) += kappa(i) * e(k - 1);
  for (int k = 0; k <= n; ++k) e(k) /= binomial(n, k);
  return e;
}

void jacobi_eigen(const Eigen::MatrixXd& a_in, Eigen::VectorXd& values, Eigen::MatrixXd& vectors) {
  const int n = static_cast<int>(a_in.rows());
  Eigen::MatrixXd a = 0.5 * (a_in + a_in.transpose());
  vectors = Eigen::MatrixXd::Identity(n, n);
  for (int sweep = 0; sweep < 60; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-30 * std::max(1.0, a.squaredNorm())) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        const double tau = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (tau >= 0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          const double vkp = vectors(k, p), vkq = vectors(k, q);
          vectors(k, p) = c * vkp - s * vkq;
          vectors(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int i, int j) { return a(i, i) < a(j, j); });
  values.resize(n);
  Eigen::MatrixXd sorted(n, n);
  for (int i = 0; i < n; ++i) {
    values(i) = a(order[i], order[i]);
    sorted.col(i) = vectors.col(order[i]);
  }
  vectors = sorted;
}

int worker_count() {
  static const int count = [] {
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw <= 0) hw = 1;
    if (const char* env = std::getenv("CAPFLOW_THREADS")) {
      const int cap = std::atoi(env);
      if (cap >= 1) return cap;
    }
    return hw;
  }();
  return count;
}

void parallel_for(std::size_t count, const std::function<void(std::size_t, std::size_t)>& body,
                  std::size_t grain) {
  const int workers = worker_count();
  if (workers <= 1 || count < 2 * grain) {
    body(0, count);
    return;
  }
  const std::size_t chunks = std::min<std::size_t>(workers, count / grain);
  std::vector<std::exception_ptr> errors(chunks);
  {
    std::vector<std::jthread> pool;
    pool.reserve(chunks);
    for (std::size_t c = 0; c < chunks; ++c) {
      const std::size_t lo = count * c / chunks, hi = count * (c + 1) / chunks;
      pool.emplace_back([&body, &errors, c, lo, hi] {
        try {
          body(lo, hi);
        } catch (...) {
          errors[c] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

double observed_order(double e1, double e2, double h1, double h2) {
  return std::log(e1 / e2) / std::log(h1 / h2);
}

}  // namespace capflow
