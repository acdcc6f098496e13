#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace capflow {

inline constexpr double kPi = 3.14159265358979323846;

// cos/sin of the contact angle; theta = pi/2 is snapped so cos is exactly 0
double cos_angle(double theta);
double sin_angle(double theta);

// fixed-order pairwise summation, independent of thread count
double pairwise_sum(std::span<const double> v);

// |S^m|, area of the unit m-sphere in R^{m+1}
double sphere_area(int m);
// volume of the unit m-ball
double ball_volume(int m);
double binomial(int n, int k);

// int_0^g sin^m(t) dt; closed forms for m <= 3, adaptive Gauss-Kronrod otherwise
double sin_power_integral(int m, double g);
double sin_power_integral(int m, double a, double b);

// normalized elementary symmetric functions H_0..H_n of kappa
Eigen::VectorXd normalized_symmetric(const Eigen::VectorXd& kappa);

// eigenvalues (ascending) and eigenvectors of a small symmetric matrix, cyclic Jacobi
void jacobi_eigen(const Eigen::MatrixXd& a, Eigen::VectorXd& values, Eigen::MatrixXd& vectors);

// worker count, read once from CAPFLOW_THREADS (default: hardware concurrency)
int worker_count();
// static-chunked parallel loop over [0, count); serial below the grain size
void parallel_for(std::size_t count, const std::function<void(std::size_t, std::size_t)>& body,
                  std::size_t grain = 2048);

// observed order log(e1/e2)/log(h1/h2)
double observed_order(double e1, double e2, double h1, double h2);

}  // namespace capflow
