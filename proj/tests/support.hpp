#pragma once

#include <Eigen/Dense>

#include <random>
#include <vector>

#include "qmaxwell/density_operator.hpp"
#include "qmaxwell/grid.hpp"

namespace support {

/// Real trigonometric polynomial with N(0,1) coefficients up to `modes`.
inline qmx::Field random_band_limited(std::mt19937_64& rng, const qmx::SpectralGrid& g, int modes,
                                      double scale = 1.0) {
  std::normal_distribution<double> n;
  std::vector<double> a(modes + 1), b(modes + 1);
  for (int k = 0; k <= modes; ++k) {
    a[k] = scale * n(rng);
    b[k] = scale * n(rng);
  }
  return qmx::Field::sample(g, [&](double x) {
    double v = a[0];
    for (int k = 1; k <= modes; ++k)
      v += a[k] * std::cos(qmx::kTwoPi * k * x) + b[k] * std::sin(qmx::kTwoPi * k * x);
    return v;
  });
}

/// B B^* with Gaussian B whose rows decay like (1 + |k|)^{-decay}, rescaled
/// to trace `trace`.
inline Eigen::MatrixXcd random_psd(std::mt19937_64& rng, const qmx::SpectralGrid& g, double decay, double trace,
                                   int rank = -1) {
  std::normal_distribution<double> n;
  const int r = rank < 0 ? g.D : rank;
  Eigen::MatrixXcd B(g.D, r);
  for (int i = 0; i < g.D; ++i) {
    const double w = std::pow(1.0 + std::abs(g.modes[i]), -decay);
    for (int c = 0; c < r; ++c) B(i, c) = qmx::cplx(n(rng), n(rng)) * w;
  }
  Eigen::MatrixXcd M = B * B.adjoint();
  M = 0.5 * (M + M.adjoint());
  return M * (trace / M.trace().real());
}

}  // namespace support
