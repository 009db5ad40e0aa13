#pragma once

// Plane-wave discretization of the unit torus [0,1).
//
// Basis functions are e_k(x) = exp(2 pi i k x) for |k| <= K, stored in the
// fixed order 0, +1, -1, +2, -2, ..., +K, -K. Every D x D matrix in the
// library uses this order. Fields are sampled on the N equispaced nodes
// x_j = j / N, and integrals use the periodic trapezoid rule.

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <cstdlib>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "qmaxwell/errors.hpp"

namespace qmx {

using cplx = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Imaginary parts of a real-tagged field must stay below this fraction of
/// the field's sup norm (plus one).
inline constexpr double kRealTolerance = 1e-12;

struct SpectralGrid {
  int K = 0;  ///< mode cutoff
  int D = 1;  ///< basis dimension 2K+1
  int N = 0;  ///< collocation nodes
  std::vector<int> modes;       ///< modes[i] is the wave number of basis index i
  Eigen::VectorXd gamma;        ///< spectrum of -1/2 d^2/dx^2: 2 pi^2 k^2
  Eigen::VectorXd nodes;        ///< x_j = j / N
  Eigen::MatrixXcd synthesis;   ///< N x D, e_k(x_j)
  Eigen::MatrixXcd gradient;    ///< N x D, e_k'(x_j)
  Eigen::MatrixXcd laplacian;   ///< N x D, e_k''(x_j)

  /// Basis index of wave number k (|k| <= K).
  int index_of(int k) const {
    if (std::abs(k) > K) throw InvalidArgument("mode outside the basis cutoff");
    return k > 0 ? 2 * k - 1 : -2 * k;
  }
};

using GridPtr = std::shared_ptr<const SpectralGrid>;

/// Wave number carried by position j of a length-n FFT coefficient vector.
inline int fft_frequency(int j, int n) { return j <= (n - 1) / 2 ? j : j - n; }

/// Smallest 5-smooth integer >= n.
inline int next_smooth_size(int n) {
  for (int m = std::max(n, 1);; ++m) {
    int r = m;
    for (int p : {2, 3, 5})
      while (r % p == 0) r /= p;
    if (r == 1) return m;
  }
}

/// Default collocation count: 3D rounded up to a 5-smooth size.
inline int default_collocation(int K) { return next_smooth_size(3 * (2 * K + 1)); }

inline GridPtr build_grid(int K, int N) {
  if (K < 0) throw InvalidArgument("mode cutoff K must be >= 0");
  const int D = 2 * K + 1;
  if (N < 2 * D)
    throw InvalidArgument("collocation count N=" + std::to_string(N) +
                          " is below 2(2K+1)=" + std::to_string(2 * D) +
                          "; products of basis functions would alias");
  auto g = std::make_shared<SpectralGrid>();
  g->K = K;
  g->D = D;
  g->N = N;
  g->modes.resize(D);
  g->gamma.resize(D);
  for (int i = 0; i < D; ++i) {
    const int k = (i == 0) ? 0 : ((i % 2 == 1) ? (i + 1) / 2 : -(i / 2));
    g->modes[i] = k;
    g->gamma(i) = 2.0 * kPi * kPi * static_cast<double>(k) * k;
  }
  g->nodes.resize(N);
  for (int j = 0; j < N; ++j) g->nodes(j) = static_cast<double>(j) / N;
  g->synthesis.resize(N, D);
  g->gradient.resize(N, D);
  g->laplacian.resize(N, D);
  for (int i = 0; i < D; ++i) {
    const double k = g->modes[i];
    const cplx ik(0.0, kTwoPi * k);
    for (int j = 0; j < N; ++j) {
      // reduce k*j mod N first so the phase is exact for large products
      const long long kj = (static_cast<long long>(g->modes[i]) * j) % N;
      const cplx e = std::polar(1.0, kTwoPi * static_cast<double>(kj) / N);
      g->synthesis(j, i) = e;
      g->gradient(j, i) = ik * e;
      g->laplacian(j, i) = ik * ik * e;
    }
  }
  return g;
}

inline GridPtr build_grid(int K) { return build_grid(K, default_collocation(K)); }

// ---------------------------------------------------------------------------

enum class Parity { real, complex };

/// Periodic function sampled on the collocation nodes.
class Field {
 public:
  Field() = default;

  static Field real(Eigen::VectorXd values) {
    Field f;
    f.values_ = values.cast<cplx>();
    f.parity_ = Parity::real;
    return f;
  }

  static Field complex(Eigen::VectorXcd values) {
    Field f;
    f.values_ = std::move(values);
    f.parity_ = Parity::complex;
    return f;
  }

  /// Tags as real when the imaginary parts are roundoff, complex otherwise.
  static Field infer(Eigen::VectorXcd values) {
    const double scale = 1.0 + values.cwiseAbs().maxCoeff();
    if (values.size() == 0 || values.imag().cwiseAbs().maxCoeff() <= kRealTolerance * scale)
      return real(values.real());
    return complex(std::move(values));
  }

  static Field constant(const SpectralGrid& g, double c) {
    return real(Eigen::VectorXd::Constant(g.N, c));
  }

  template <class F>
  static Field sample(const SpectralGrid& g, F&& fn) {
    Eigen::VectorXd v(g.N);
    for (int j = 0; j < g.N; ++j) v(j) = fn(g.nodes(j));
    return real(std::move(v));
  }

  Eigen::Index size() const { return values_.size(); }
  Parity parity() const { return parity_; }
  bool is_real() const { return parity_ == Parity::real; }
  const Eigen::VectorXcd& values() const { return values_; }

  /// Real samples; throws for complex-tagged fields.
  Eigen::VectorXd real_values() const {
    if (!is_real()) throw InvalidArgument("expected a real-valued field");
    return values_.real();
  }

 private:
  Eigen::VectorXcd values_;
  Parity parity_ = Parity::real;
};

inline void require_on_grid(const Field& f, const SpectralGrid& g) {
  if (f.size() != g.N)
    throw InvalidArgument("field has " + std::to_string(f.size()) +
                          " samples but the grid has N=" + std::to_string(g.N));
}

// ---------------------------------------------------------------------------
// Transforms. Coefficients c satisfy f(x_j) = sum_k c_k e^{2 pi i k x_j}, stored
// in FFT order (see fft_frequency).

inline Eigen::VectorXcd forward_transform(const Eigen::VectorXcd& samples) {
  Eigen::FFT<double> fft;
  std::vector<cplx> in(samples.data(), samples.data() + samples.size());
  std::vector<cplx> out;
  fft.fwd(out, in);
  Eigen::VectorXcd c(samples.size());
  const double inv_n = 1.0 / static_cast<double>(samples.size());
  for (Eigen::Index j = 0; j < samples.size(); ++j) c(j) = out[j] * inv_n;
  return c;
}

inline Eigen::VectorXcd inverse_transform(const Eigen::VectorXcd& coeffs) {
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::Unscaled);
  std::vector<cplx> in(coeffs.data(), coeffs.data() + coeffs.size());
  std::vector<cplx> out;
  fft.inv(out, in);
  return Eigen::Map<Eigen::VectorXcd>(out.data(), static_cast<Eigen::Index>(out.size()));
}

inline Eigen::VectorXcd forward_transform(const Field& f) { return forward_transform(f.values()); }

/// Spectral derivative. The Nyquist mode of an even-length grid is dropped.
inline Field differentiate(const Field& f, const SpectralGrid& g) {
  require_on_grid(f, g);
  Eigen::VectorXcd c = forward_transform(f);
  const int n = g.N;
  for (int j = 0; j < n; ++j) {
    const int k = fft_frequency(j, n);
    if (n % 2 == 0 && j == n / 2)
      c(j) = 0.0;
    else
      c(j) *= cplx(0.0, kTwoPi * k);
  }
  Eigen::VectorXcd v = inverse_transform(c);
  if (f.is_real()) return Field::real(v.real());
  return Field::complex(std::move(v));
}

inline Field laplacian(const Field& f, const SpectralGrid& g) {
  return differentiate(differentiate(f, g), g);
}

/// Periodic trapezoid rule: (1/N) sum_j f(x_j).
inline double integrate(const Field& f, const SpectralGrid& g) {
  require_on_grid(f, g);
  if (!f.is_real()) throw InvalidArgument("integrate expects a real field; use integrate_complex");
  return f.values().real().mean();
}

inline cplx integrate_complex(const Field& f, const SpectralGrid& g) {
  require_on_grid(f, g);
  return f.values().mean();
}

inline double l2_norm(const Eigen::VectorXd& samples) {
  return std::sqrt(samples.squaredNorm() / static_cast<double>(samples.size()));
}

inline double l2_norm(const Field& f) {
  return std::sqrt(f.values().squaredNorm() / static_cast<double>(f.size()));
}

/// Trigonometric interpolation onto an n-point grid (zero padding or
/// truncation of the Fourier series). An even-grid Nyquist coefficient is
/// split symmetrically when padding.
inline Eigen::VectorXcd resample(const Eigen::VectorXcd& samples, int n) {
  const int m = static_cast<int>(samples.size());
  if (m == n) return samples;
  const Eigen::VectorXcd c = forward_transform(samples);
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(n);
  for (int j = 0; j < m; ++j) {
    int k = fft_frequency(j, m);
    cplx value = c(j);
    if (m % 2 == 0 && j == m / 2) {
      // Nyquist coefficient represents cos(pi m x); split between +-m/2.
      if (2 * (m / 2) < n) {
        out(m / 2) += 0.5 * value;
        out(n - m / 2) += 0.5 * value;
      }
      continue;
    }
    if (2 * std::abs(k) >= n) continue;
    out((k % n + n) % n) += value;
  }
  return inverse_transform(out);
}

inline Field resample(const Field& f, int n) {
  Eigen::VectorXcd v = resample(f.values(), n);
  if (f.is_real()) return Field::real(v.real());
  return Field::complex(std::move(v));
}

/// Largest |k| among coefficients whose magnitude exceeds `threshold`.
inline int spectral_extent(const Eigen::VectorXcd& coeffs, double threshold) {
  int extent = 0;
  const int n = static_cast<int>(coeffs.size());
  for (int j = 0; j < n; ++j)
    if (std::abs(coeffs(j)) > threshold) extent = std::max(extent, std::abs(fft_frequency(j, n)));
  return extent;
}

/// Galerkin matrix of multiplication by `a`: entries (e_k, a e_m) computed
/// from the collocation coefficients of a. Exact when a is band-limited to
/// |k| < N/2.
inline Eigen::MatrixXcd multiplication_matrix(const Field& a, const SpectralGrid& g) {
  require_on_grid(a, g);
  const Eigen::VectorXcd c = forward_transform(a);
  Eigen::MatrixXcd m(g.D, g.D);
  for (int r = 0; r < g.D; ++r)
    for (int s = 0; s < g.D; ++s) {
      const int diff = g.modes[r] - g.modes[s];
      m(r, s) = c(((diff % g.N) + g.N) % g.N);
    }
  return m;
}

/// Diagonal of the kernel of a matrix in the basis: n(x_j) = sum_{km} R_km
/// e_k(x_j) conj(e_m(x_j)). Works for any square matrix R; real for Hermitian R.
inline Eigen::VectorXd density_of_matrix(const Eigen::MatrixXcd& R, const SpectralGrid& g) {
  const Eigen::MatrixXcd left = g.synthesis * R;
  return left.cwiseProduct(g.synthesis.conjugate()).rowwise().sum().real();
}

}  // namespace qmx
