#pragma once

// Density operators in the plane-wave basis and the functionals built on
// them: local moments, kinetic energy, von Neumann entropy, free energy and
// the gauge transform e^{if} rho e^{-if}.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>

#include "qmaxwell/errors.hpp"
#include "qmaxwell/grid.hpp"

namespace qmx {

inline constexpr double kHermitianTolerance = 1e-12;
inline constexpr double kPsdTolerance = 1e-12;
/// Eigenvalues below this floor contribute 0 to s(x) = x log x - x.
inline constexpr double kEntropyFloor = 1e-300;
/// Circulation of u0 must lie within this distance of 2 pi Z.
inline constexpr double kCirculationTolerance = 1e-8;

/// Eigendecomposition of H = H0 + A (eigenvalues ascending).
struct HamiltonianSpectrum {
  Eigen::VectorXd lambdas;
  Eigen::MatrixXcd vectors;
  GridPtr grid;
};

inline HamiltonianSpectrum diagonalize(const Eigen::MatrixXcd& H, GridPtr grid) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(H);
  if (solver.info() != Eigen::Success) throw EigensolverError("Hermitian eigensolver did not converge");
  if (!solver.eigenvalues().allFinite()) throw EigensolverError("non-finite eigenvalues");
  return {solver.eigenvalues(), solver.eigenvectors(), std::move(grid)};
}

/// H = diag(gamma) + Galerkin(A).
inline Eigen::MatrixXcd hamiltonian_matrix(const Field& A, const SpectralGrid& g) {
  if (!A.is_real()) throw InvalidArgument("potential A must be real-valued");
  Eigen::MatrixXcd H = multiplication_matrix(A, g);
  H.diagonal() += g.gamma.cast<cplx>();
  // the Galerkin matrix of a real field is Hermitian up to roundoff
  return 0.5 * (H + H.adjoint());
}

inline HamiltonianSpectrum hamiltonian_spectrum(const Field& A, GridPtr grid) {
  require_on_grid(A, *grid);
  return diagonalize(hamiltonian_matrix(A, *grid), grid);
}

/// Hermitian positive semidefinite operator with a cached eigendecomposition.
/// Eigenvalues are kept in descending order and clamped at zero.
class DensityOperator {
 public:
  /// Validates Hermiticity and positivity of `matrix`.
  static DensityOperator from_matrix(const Eigen::MatrixXcd& matrix, GridPtr grid) {
    const SpectralGrid& g = *grid;
    if (matrix.rows() != g.D || matrix.cols() != g.D)
      throw InvalidArgument("density matrix must be D x D with D=" + std::to_string(g.D));
    const double norm = matrix.norm();
    if ((matrix - matrix.adjoint()).norm() > kHermitianTolerance * std::max(norm, 1e-300))
      throw InvalidArgument("density matrix is not Hermitian");
    const Eigen::MatrixXcd herm = 0.5 * (matrix + matrix.adjoint());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(herm);
    if (solver.info() != Eigen::Success) throw EigensolverError("Hermitian eigensolver did not converge");
    return from_spectrum(solver.eigenvalues(), solver.eigenvectors(), std::move(grid));
  }

  /// Builds rho = sum_p w_p |v_p><v_p|. Columns of `vectors` are assumed
  /// orthonormal; fewer than D columns describe a rank-deficient operator.
  static DensityOperator from_spectrum(const Eigen::VectorXd& weights, const Eigen::MatrixXcd& vectors,
                                       GridPtr grid) {
    const SpectralGrid& g = *grid;
    if (vectors.rows() != g.D || vectors.cols() != weights.size())
      throw InvalidArgument("spectral data does not match the basis dimension");
    if (!weights.allFinite()) throw NotPositiveError("non-finite eigenvalue in density operator");
    const double top = weights.size() ? weights.maxCoeff() : 0.0;
    const double clamp = kPsdTolerance * (1.0 + std::max(top, 0.0));
    DensityOperator rho;
    rho.grid_ = std::move(grid);
    std::vector<Eigen::Index> order(weights.size());
    for (Eigen::Index i = 0; i < weights.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return weights(a) > weights(b); });
    rho.eigenvalues_.resize(weights.size());
    rho.eigenvectors_.resize(g.D, weights.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
      double w = weights(order[i]);
      if (w < -clamp)
        throw NotPositiveError("density operator has eigenvalue " + std::to_string(w) +
                               " below the PSD tolerance");
      rho.eigenvalues_(i) = std::max(w, 0.0);
      rho.eigenvectors_.col(i) = vectors.col(order[i]);
    }
    rho.matrix_ = rho.eigenvectors_ * rho.eigenvalues_.cast<cplx>().asDiagonal() * rho.eigenvectors_.adjoint();
    return rho;
  }

  const Eigen::MatrixXcd& matrix() const { return matrix_; }
  /// Descending, clamped at 0.
  const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
  const Eigen::MatrixXcd& eigenvectors() const { return eigenvectors_; }
  const SpectralGrid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  double trace() const { return eigenvalues_.sum(); }

  /// Eigenfunctions sampled on the collocation nodes (N x rank).
  Eigen::MatrixXcd eigenfunctions() const { return grid_->synthesis * eigenvectors_; }

 private:
  Eigen::MatrixXcd matrix_;
  Eigen::VectorXd eigenvalues_;
  Eigen::MatrixXcd eigenvectors_;
  GridPtr grid_;
};

/// Gibbs state exp(-H/T) for a diagonalized Hamiltonian.
inline DensityOperator gibbs_state(const HamiltonianSpectrum& spec, double T) {
  if (!(T > 0.0)) throw InvalidArgument("temperature must be positive");
  Eigen::VectorXd w = (-spec.lambdas / T).array().exp();
  if (!w.allFinite()) throw InvalidArgument("exp(-H/T) overflows; potential too negative for this T");
  return DensityOperator::from_spectrum(w, spec.vectors, spec.grid);
}

inline DensityOperator density_from_hamiltonian(const Field& A, double T, GridPtr grid) {
  if (!(T > 0.0)) throw InvalidArgument("temperature must be positive");
  return gibbs_state(hamiltonian_spectrum(A, std::move(grid)), T);
}

// ---------------------------------------------------------------------------

struct Moments {
  Field n;        ///< local density
  Field current;  ///< n u
  Field k;        ///< kinetic-energy density
  Field w;        ///< total energy density k - Lap(n)/8
};

/// Local moments evaluated through the eigenfunctions. w is assembled from
/// its own pointwise formula 1/4 sum rho_p (|phi_p'|^2 - Re conj(phi_p) phi_p'')
/// rather than from k and n, so the identity w = k - Lap(n)/8 is checkable.
inline Moments moments(const DensityOperator& rho) {
  const SpectralGrid& g = rho.grid();
  const Eigen::MatrixXcd& C = rho.eigenvectors();
  const Eigen::MatrixXcd phi = g.synthesis * C;
  const Eigen::MatrixXcd dphi = g.gradient * C;
  const Eigen::MatrixXcd d2phi = g.laplacian * C;
  const Eigen::VectorXd& w = rho.eigenvalues();

  const Eigen::VectorXd n = phi.cwiseAbs2() * w;
  const Eigen::VectorXd current = phi.conjugate().cwiseProduct(dphi).imag() * w;
  const Eigen::VectorXd grad2 = dphi.cwiseAbs2() * w;
  const Eigen::VectorXd curv = phi.conjugate().cwiseProduct(d2phi).real() * w;
  return {Field::real(n), Field::real(current), Field::real(0.5 * grad2), Field::real(0.25 * (grad2 - curv))};
}

/// Moments evaluated pointwise at arbitrary nodes (e.g. the nodes of a
/// coarser grid for an operator living on an enlarged basis).
inline Moments moments_at(const DensityOperator& rho, const Eigen::VectorXd& nodes) {
  const SpectralGrid& g = rho.grid();
  const Eigen::Index n = nodes.size();
  Eigen::MatrixXcd S(n, g.D), G(n, g.D), L(n, g.D);
  for (int i = 0; i < g.D; ++i) {
    const cplx ik(0.0, kTwoPi * g.modes[i]);
    for (Eigen::Index j = 0; j < n; ++j) {
      const cplx e = std::polar(1.0, kTwoPi * g.modes[i] * nodes(j));
      S(j, i) = e;
      G(j, i) = ik * e;
      L(j, i) = ik * ik * e;
    }
  }
  const Eigen::MatrixXcd& C = rho.eigenvectors();
  const Eigen::MatrixXcd phi = S * C, dphi = G * C, d2phi = L * C;
  const Eigen::VectorXd& w = rho.eigenvalues();
  const Eigen::VectorXd grad2 = dphi.cwiseAbs2() * w;
  const Eigen::VectorXd curv = phi.conjugate().cwiseProduct(d2phi).real() * w;
  return {Field::real(phi.cwiseAbs2() * w), Field::real(phi.conjugate().cwiseProduct(dphi).imag() * w),
          Field::real(0.5 * grad2), Field::real(0.25 * (grad2 - curv))};
}

inline Eigen::VectorXd density(const DensityOperator& rho) {
  return rho.eigenfunctions().cwiseAbs2() * rho.eigenvalues();
}

/// Tr(sqrt(H0) rho sqrt(H0)); H0 is diagonal in the basis.
inline double energy(const DensityOperator& rho) {
  return (rho.grid().gamma.array() * rho.matrix().diagonal().real().array()).sum();
}

/// s(x) = x log x - x, extended by s(0) = 0.
inline double entropy_density(double x) {
  if (x < kEntropyFloor) return 0.0;
  return x * std::log(x) - x;
}

inline double entropy(const Eigen::VectorXd& eigenvalues) {
  double s = 0.0;
  for (double x : eigenvalues) s += entropy_density(x);
  return s;
}

inline double entropy(const DensityOperator& rho) { return entropy(rho.eigenvalues()); }

inline double free_energy(const DensityOperator& rho, double T) {
  if (!(T > 0.0)) throw InvalidArgument("temperature must be positive");
  return energy(rho) + T * entropy(rho);
}

// ---------------------------------------------------------------------------
// Gauge transform.

/// Phase f(x) = int_0^x u0 split as f = 2 pi q x + g(x) with g periodic.
struct GaugePhase {
  int winding = 0;             ///< q, circulation / (2 pi)
  Eigen::VectorXcd periodic;   ///< FFT-order coefficients of g on the source grid
};

inline GaugePhase gauge_phase(const Field& u0, const SpectralGrid& g) {
  require_on_grid(u0, g);
  if (!u0.is_real()) throw InvalidArgument("velocity u0 must be real-valued");
  const double circulation = integrate(u0, g);
  const double q = std::round(circulation / kTwoPi);
  if (std::abs(circulation - kTwoPi * q) > kCirculationTolerance)
    throw CirculationError(
        "circulation of u0 is " + std::to_string(circulation) +
            ", not an integer multiple of 2 pi: exp(i int_0^x u0) is not single-valued on the torus",
        circulation);
  GaugePhase phase;
  phase.winding = static_cast<int>(q);
  phase.periodic = forward_transform(u0);
  for (int j = 0; j < g.N; ++j) {
    const int k = fft_frequency(j, g.N);
    if (k == 0 || (g.N % 2 == 0 && j == g.N / 2))
      phase.periodic(j) = 0.0;
    else
      phase.periodic(j) /= cplx(0.0, kTwoPi * k);
  }
  // pin g(0) = 0 so that f(0) = 0
  phase.periodic(0) = -phase.periodic.sum();
  return phase;
}

namespace detail {

/// Samples of a real periodic function given by FFT-order coefficients on a
/// finer n-point grid.
inline Eigen::VectorXd evaluate_coefficients(const Eigen::VectorXcd& coeffs, int n) {
  return resample(inverse_transform(coeffs), n).real();
}

/// Coefficients of exp(i g) on an adaptively refined grid; tail below
/// `threshold` dropped. Returns FFT-order coefficients and their extent.
inline std::pair<Eigen::VectorXcd, int> phase_coefficients(const GaugePhase& phase, double threshold) {
  int n = std::max<int>(64, 4 * static_cast<int>(phase.periodic.size()));
  for (int attempt = 0; attempt < 8; ++attempt, n *= 2) {
    const Eigen::VectorXd gvals = evaluate_coefficients(phase.periodic, n);
    Eigen::VectorXcd e(n);
    for (int j = 0; j < n; ++j) e(j) = std::polar(1.0, gvals(j));
    Eigen::VectorXcd c = forward_transform(e);
    for (Eigen::Index j = 0; j < c.size(); ++j)
      if (std::abs(c(j)) <= threshold) c(j) = 0.0;
    const int extent = spectral_extent(c, threshold);
    if (4 * extent < n) return {std::move(c), extent};
  }
  throw InvalidArgument("gauge phase exp(i int u0) is not resolvable; u0 oscillates too strongly");
}

}  // namespace detail

/// Conjugates rho by multiplication with e^{if}, f(x) = int_0^x u0. The
/// result lives on a basis enlarged by the winding number plus the spectral
/// extent of the periodic part of the phase; eigenvalues are unchanged.
inline DensityOperator gauge_transform(const DensityOperator& rho, const Field& u0) {
  const SpectralGrid& g = rho.grid();
  const GaugePhase phase = gauge_phase(u0, g);
  if (phase.winding == 0 && phase.periodic.cwiseAbs().maxCoeff() == 0.0) return rho;

  const auto [coeffs, extent] = detail::phase_coefficients(phase, 1e-16);
  const int n = static_cast<int>(coeffs.size());
  const int new_K = g.K + std::abs(phase.winding) + extent;
  GridPtr target = new_K == g.K ? rho.grid_ptr() : build_grid(new_K);

  // U(k', k) = coefficient of e^{i f} at k' - k
  Eigen::MatrixXcd U = Eigen::MatrixXcd::Zero(target->D, g.D);
  for (int r = 0; r < target->D; ++r)
    for (int s = 0; s < g.D; ++s) {
      const int shift = target->modes[r] - g.modes[s] - phase.winding;
      if (std::abs(shift) <= extent) U(r, s) = coeffs(((shift % n) + n) % n);
    }
  return DensityOperator::from_spectrum(rho.eigenvalues(), U * rho.eigenvectors(), target);
}

/// Rank-one operator |psi><psi| with psi = e^{if} sqrt(n0), on the smallest
/// basis (at least `min_K`) that resolves psi to roundoff.
inline DensityOperator pure_state(const Field& n0, const Field& u0, const SpectralGrid& g, int min_K) {
  require_on_grid(n0, g);
  if (!n0.is_real()) throw InvalidArgument("density n0 must be real-valued");
  const GaugePhase phase = gauge_phase(u0, g);
  for (int n = std::max(256, 8 * g.N); n <= (1 << 16); n *= 2) {
    const Eigen::VectorXd nvals = resample(n0, n).real_values();
    if (nvals.minCoeff() <= 0.0) throw InvalidArgument("density n0 must be positive");
    const Eigen::VectorXd gvals = detail::evaluate_coefficients(phase.periodic, n);
    Eigen::VectorXcd psi(n);
    for (int j = 0; j < n; ++j) {
      const double x = static_cast<double>(j) / n;
      psi(j) = std::sqrt(nvals(j)) * std::polar(1.0, kTwoPi * phase.winding * x + gvals(j));
    }
    const Eigen::VectorXcd c = forward_transform(psi);
    const double threshold = 1e-16 * c.cwiseAbs().maxCoeff();
    const int extent = spectral_extent(c, threshold);
    if (4 * extent >= n) continue;
    GridPtr target = build_grid(std::max(min_K, extent));
    Eigen::VectorXcd v(target->D);
    for (int i = 0; i < target->D; ++i) {
      const int k = target->modes[i];
      v(i) = std::abs(k) <= extent ? c(((k % n) + n) % n) : cplx(0.0);
    }
    const double mass = v.squaredNorm();
    Eigen::VectorXd w(1);
    w(0) = mass;
    return DensityOperator::from_spectrum(w, v / std::sqrt(mass), target);
  }
  throw InvalidArgument("sqrt(n0) exp(i f) is not resolvable on any refinement");
}

}  // namespace qmx
