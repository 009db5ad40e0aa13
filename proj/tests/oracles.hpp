#pragma once

// Reference values computed without the library's solver or spectral machinery.

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>

namespace oracle {

inline constexpr double pi = std::numbers::pi;

inline double gamma(int k) { return 2.0 * pi * pi * k * k; }

/// Partition sum over |k| <= K of exp(-gamma_k / T).
inline double theta_sum(double T, int K) {
  double z = 0.0;
  for (int k = -K; k <= K; ++k) z += std::exp(-gamma(k) / T);
  return z;
}

/// Constant chemical potential for n0 = 1: sum_k exp(-(gamma_k + A)/T) = 1.
inline double uniform_potential(double T, int K) { return T * std::log(theta_sum(T, K)); }

/// Constant potential of the penalized uniform problem, theta e^{-A/T} = 1 + eps A
/// (scalar Newton iteration).
inline double uniform_penalized_potential(double T, int K, double eps) {
  const double z = theta_sum(T, K);
  double A = T * std::log(z);
  for (int i = 0; i < 100; ++i) {
    const double f = z * std::exp(-A / T) - 1.0 - eps * A;
    const double df = -z * std::exp(-A / T) / T - eps;
    const double step = f / df;
    A -= step;
    if (std::abs(step) <= 1e-16 * (1.0 + std::abs(A))) break;
  }
  return A;
}

/// Energy of the uniform minimizer: sum gamma_k e^{-gamma_k/T} / theta.
inline double uniform_energy(double T, int K) {
  double num = 0.0;
  for (int k = -K; k <= K; ++k) num += gamma(k) * std::exp(-gamma(k) / T);
  return num / theta_sum(T, K);
}

/// Entropy of the uniform minimizer, eigenvalues e^{-gamma_k/T}/theta.
inline double uniform_entropy(double T, int K) {
  const double z = theta_sum(T, K);
  double s = 0.0;
  for (int k = -K; k <= K; ++k) {
    const double p = std::exp(-gamma(k) / T) / z;
    if (p > 0.0) s += p * std::log(p) - p;
  }
  return s;
}

/// Composite Simpson rule with n (even) panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n) {
  if (n % 2) ++n;
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

/// exp(-beta M) by scaling and squaring (Eigen MatrixFunctions).
inline Eigen::MatrixXcd expm(const Eigen::MatrixXcd& M, double beta) {
  const Eigen::MatrixXcd scaled = -beta * M;
  return scaled.exp();
}

}  // namespace oracle
