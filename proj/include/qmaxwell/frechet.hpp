#pragma once

// Frechet derivative of H -> exp(-beta H) in divided-difference form.
//
// For H = sum_k lambda_k |phi_k><phi_k| and a Hermitian perturbation V,
//   d/dh exp(-beta (H + h V)) at h = 0  =  Phi (S o (Phi^* V Phi)) Phi^*,
// where S(m,k) is the first divided difference of lambda -> exp(-beta lambda).

#include <Eigen/Dense>

#include <cmath>

#include "qmaxwell/density_operator.hpp"
#include "qmaxwell/errors.hpp"
#include "qmaxwell/grid.hpp"

namespace qmx {

/// Relative eigenvalue gap below which the midpoint derivative replaces the
/// divided difference.
inline constexpr double kDegeneracyThreshold = 1e-8;

struct VarsigmaTable {
  double beta = 0.0;
  Eigen::VectorXd lambdas;
  Eigen::MatrixXd table;  ///< symmetric, entrywise <= 0
};

/// Divided difference of exp(-beta x) between a and b.
inline double exp_divided_difference(double a, double b, double beta, double threshold) {
  if (a == b) return -beta * std::exp(-beta * a);
  const double lo = std::min(a, b);
  const double hi = std::max(a, b);
  const double gap = hi - lo;
  if (gap <= threshold * (1.0 + std::abs(lo) + std::abs(hi)))
    return -beta * std::exp(-beta * 0.5 * (lo + hi));
  // e^{-beta lo} (e^{-beta gap} - 1) / gap, free of cancellation
  return std::exp(-beta * lo) * std::expm1(-beta * gap) / gap;
}

inline VarsigmaTable varsigma_table(const Eigen::VectorXd& lambdas, double beta,
                                    double degeneracy_threshold = kDegeneracyThreshold) {
  if (!(beta > 0.0)) throw InvalidArgument("inverse temperature beta must be positive");
  if (!lambdas.allFinite()) throw InvalidArgument("eigenvalues must be finite");
  const Eigen::Index d = lambdas.size();
  VarsigmaTable t{beta, lambdas, Eigen::MatrixXd(d, d)};
  for (Eigen::Index m = 0; m < d; ++m) {
    t.table(m, m) = -beta * std::exp(-beta * lambdas(m));
    for (Eigen::Index k = m + 1; k < d; ++k) {
      const double v = exp_divided_difference(lambdas(m), lambdas(k), beta, degeneracy_threshold);
      t.table(m, k) = v;
      t.table(k, m) = v;
    }
  }
  return t;
}

/// Z applied to a Hermitian perturbation matrix V (basis representation).
inline Eigen::MatrixXcd apply_Z(double beta, const HamiltonianSpectrum& spec, const Eigen::MatrixXcd& V) {
  const SpectralGrid& g = *spec.grid;
  if (V.rows() != g.D || V.cols() != g.D) throw InvalidArgument("perturbation must be D x D");
  const VarsigmaTable s = varsigma_table(spec.lambdas, beta);
  const Eigen::MatrixXcd& phi = spec.vectors;
  const Eigen::MatrixXcd M = phi.adjoint() * V * phi;
  const Eigen::MatrixXcd weighted = s.table.cast<cplx>().cwiseProduct(M);
  Eigen::MatrixXcd Z = phi * weighted * phi.adjoint();
  return 0.5 * (Z + Z.adjoint());
}

/// Z[beta, rho](sigma) for a perturbation entering through its density n[sigma].
inline Eigen::MatrixXcd apply_Z(double beta, const HamiltonianSpectrum& spec, const Field& sigma_density) {
  if (!sigma_density.is_real()) throw InvalidArgument("n[sigma] must be real-valued");
  require_on_grid(sigma_density, *spec.grid);
  return apply_Z(beta, spec, multiplication_matrix(sigma_density, *spec.grid));
}

/// Tr(Z Galerkin(n[sigma])) computed by matrix product.
inline double z_quadratic_form(const Eigen::MatrixXcd& Z, const Field& sigma_density, const SpectralGrid& g) {
  if (!sigma_density.is_real()) throw InvalidArgument("n[sigma] must be real-valued");
  const Eigen::MatrixXcd V = multiplication_matrix(sigma_density, g);
  if (Z.rows() != V.rows() || Z.cols() != V.cols()) throw InvalidArgument("Z and n[sigma] live on different bases");
  return (Z * V).trace().real();
}

/// The same quantity as the nonpositive sum sum_{m,k} S(m,k) |(phi_k, n phi_m)|^2.
inline double z_quadratic_form_spectral(double beta, const HamiltonianSpectrum& spec, const Field& sigma_density) {
  const SpectralGrid& g = *spec.grid;
  const Eigen::MatrixXcd M = spec.vectors.adjoint() * multiplication_matrix(sigma_density, g) * spec.vectors;
  const VarsigmaTable s = varsigma_table(spec.lambdas, beta);
  return (s.table.array() * M.cwiseAbs2().array()).sum();
}

}  // namespace qmx
