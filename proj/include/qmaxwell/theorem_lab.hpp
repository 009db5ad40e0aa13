#pragma once

// Numerical experiments on the temperature dependence of the two-moment
// minimizer and on the appendix operator inequalities.

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "qmaxwell/density_operator.hpp"
#include "qmaxwell/errors.hpp"
#include "qmaxwell/frechet.hpp"
#include "qmaxwell/grid.hpp"
#include "qmaxwell/moment_matcher.hpp"
#include "qmaxwell/solver.hpp"

namespace qmx {

/// Runs body(i) for i in [0, count) on up to `threads` workers (0 = hardware
/// concurrency). Results must be written to slot i by the body.
template <class Body>
void parallel_for(std::size_t count, unsigned threads, Body&& body) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = next++; i < count; i = next++) body(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// `count` geometrically spaced temperatures from T_min to T_max inclusive.
inline std::vector<double> geometric_grid(double T_min, double T_max, int count) {
  if (!(T_min > 0.0 && T_max > T_min)) throw InvalidArgument("temperature grid needs 0 < T_min < T_max");
  if (count < 2) throw InvalidArgument("temperature grid needs at least 2 points");
  std::vector<double> Ts(count);
  const double ratio = std::log(T_max / T_min);
  for (int i = 0; i < count; ++i) Ts[i] = T_min * std::exp(ratio * i / (count - 1));
  Ts.back() = T_max;
  return Ts;
}

/// Geometric grid with (at least) `per_decade` intervals per factor of 10.
inline std::vector<double> geometric_grid_per_decade(double T_min, double T_max, int per_decade) {
  if (per_decade < 1) throw InvalidArgument("points per decade must be >= 1");
  if (!(T_min > 0.0 && T_max > T_min)) throw InvalidArgument("temperature grid needs 0 < T_min < T_max");
  const int intervals = static_cast<int>(std::ceil(per_decade * std::log10(T_max / T_min) - 1e-9));
  return geometric_grid(T_min, T_max, std::max(intervals, 1) + 1);
}

/// Inserts the geometric midpoint between consecutive temperatures.
inline std::vector<double> refine_grid(const std::vector<double>& Ts) {
  std::vector<double> out;
  for (std::size_t i = 0; i < Ts.size(); ++i) {
    if (i > 0) out.push_back(std::sqrt(Ts[i - 1] * Ts[i]));
    out.push_back(Ts[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Temperature scan

struct ScanRow {
  double T = 0.0;
  bool ok = false;
  std::string error;
  double energy = std::numeric_limits<double>::quiet_NaN();
  double entropy = std::numeric_limits<double>::quiet_NaN();
  double free_energy = std::numeric_limits<double>::quiet_NaN();
  double norm_A = std::numeric_limits<double>::quiet_NaN();
  double epsilon = std::numeric_limits<double>::quiet_NaN();  ///< last rung
  double constraint_residual = std::numeric_limits<double>::quiet_NaN();
  double fixed_point_residual = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  bool noise_limited = false;
};

struct TemperatureScan {
  std::vector<ScanRow> rows;
  PenalizedSolveOptions options;
  double m0 = 0.0;

  std::vector<double> temperatures() const {
    std::vector<double> Ts;
    for (const auto& r : rows) Ts.push_back(r.T);
    return Ts;
  }
  bool all_ok() const {
    return std::all_of(rows.begin(), rows.end(), [](const ScanRow& r) { return r.ok; });
  }
};

/// Independent two-moment solves at each temperature (each from A = 0), so
/// rows do not depend on scheduling.
inline TemperatureScan temperature_scan(const Field& n0, const Field& u0, const std::vector<double>& Ts, GridPtr grid,
                                        const PenalizedSolveOptions& opts = {}, unsigned threads = 1) {
  if (Ts.size() < 3) throw InvalidArgument("temperature scan needs at least 3 temperatures");
  for (std::size_t i = 0; i < Ts.size(); ++i) {
    if (!(Ts[i] > 0.0)) throw InvalidArgument("scan temperatures must be positive");
    if (i > 0 && !(Ts[i] > Ts[i - 1])) throw InvalidArgument("scan temperatures must be strictly increasing");
  }
  opts.validate();
  TemperatureScan scan;
  scan.options = opts;
  scan.m0 = compute_m0(n0, u0, *grid);
  (void)gauge_phase(u0, *grid);
  scan.rows.resize(Ts.size());
  parallel_for(Ts.size(), threads, [&](std::size_t i) {
    ScanRow row;
    row.T = Ts[i];
    try {
      const TwoMomentSolution s = solve_two_moment(n0, u0, Ts[i], grid, opts);
      const RungRecord& last = s.report.last();
      row.ok = true;
      row.energy = energy(s.rho);
      row.entropy = entropy(s.rho);
      row.free_energy = row.energy + Ts[i] * row.entropy;
      row.norm_A = last.norm_A;
      row.epsilon = last.epsilon;
      row.constraint_residual = last.constraint_residual;
      row.fixed_point_residual = last.fixed_point_residual;
      row.iterations = s.report.total_iterations();
      for (const auto& r : s.report.rungs) row.noise_limited = row.noise_limited || r.noise_limited;
    } catch (const Error& e) {
      row.error = e.what();
    }
    scan.rows[i] = std::move(row);
  });
  return scan;
}

// ---------------------------------------------------------------------------
// Monotonicity

struct MonotonicityReport {
  double margin = 0.0;                 ///< required |secant difference|
  std::vector<double> energy_steps;    ///< E_{i+1} - E_i
  std::vector<double> entropy_steps;   ///< S_{i+1} - S_i
  std::vector<double> energy_slopes;   ///< (E_{i+1} - E_i) / (T_{i+1} - T_i)
  std::vector<double> entropy_slopes;
  int energy_violations = 0;  ///< steps with E_{i+1} - E_i <= margin
  int entropy_violations = 0; ///< steps with S_i - S_{i+1} <= margin
  int failed_rows = 0;
  bool energy_increasing() const { return energy_violations == 0 && failed_rows == 0; }
  bool entropy_decreasing() const { return entropy_violations == 0 && failed_rows == 0; }
  bool pass() const { return energy_increasing() && entropy_decreasing(); }
};

/// Strict monotonicity is attested only where consecutive differences exceed
/// `margin` (default: 10 x the inner fixed-point tolerance).
inline MonotonicityReport check_monotonicity(const TemperatureScan& scan, std::optional<double> margin = std::nullopt) {
  MonotonicityReport rep;
  rep.margin = margin.value_or(10.0 * scan.options.tol_fixed_point);
  for (const auto& r : scan.rows) rep.failed_rows += r.ok ? 0 : 1;
  for (std::size_t i = 0; i + 1 < scan.rows.size(); ++i) {
    const ScanRow& a = scan.rows[i];
    const ScanRow& b = scan.rows[i + 1];
    const double dE = b.energy - a.energy;
    const double dS = b.entropy - a.entropy;
    rep.energy_steps.push_back(dE);
    rep.entropy_steps.push_back(dS);
    rep.energy_slopes.push_back(dE / (b.T - a.T));
    rep.entropy_slopes.push_back(dS / (b.T - a.T));
    if (!(dE > rep.margin)) ++rep.energy_violations;
    if (!(-dS > rep.margin)) ++rep.entropy_violations;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Energy-entropy relation
//
// For the penalized minimizer F_eps(T) = E + T S + (eps/2) ||A||^2 and
// dF_eps/dT = S, hence
//   E(T2) - E(T1) = int_{T1}^{T2} S dT - (T2 S2 - T1 S1) - (eps/2)(||A2||^2 - ||A1||^2).
// The last term vanishes in the limit eps -> 0.

struct RelationRow {
  double T1 = 0.0;
  double T2 = 0.0;
  double lhs = 0.0;     ///< E(T2) - E(T1)
  double rhs = 0.0;
  double defect = 0.0;  ///< |lhs - rhs| / |lhs| (0 for T1 == T2)
};

struct RelationReport {
  std::vector<RelationRow> rows;
  double max_defect = 0.0;
};

inline RelationReport check_energy_entropy_relation(const TemperatureScan& scan) {
  const auto& rows = scan.rows;
  const std::size_t n = rows.size();
  if (n < 2) throw InvalidArgument("relation check needs at least 2 scan rows");
  for (const auto& r : rows)
    if (!r.ok) throw SolverError("relation check needs a complete scan (failure at T=" + std::to_string(r.T) + ")");
  // cumulative trapezoid of S
  std::vector<double> cumulative(n, 0.0);
  for (std::size_t i = 1; i < n; ++i)
    cumulative[i] = cumulative[i - 1] + 0.5 * (rows[i].entropy + rows[i - 1].entropy) * (rows[i].T - rows[i - 1].T);
  RelationReport rep;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const ScanRow& a = rows[i];
      const ScanRow& b = rows[j];
      RelationRow r{a.T, b.T};
      r.lhs = b.energy - a.energy;
      const double penalty =
          0.5 * (b.epsilon * b.norm_A * b.norm_A - a.epsilon * a.norm_A * a.norm_A);
      r.rhs = (cumulative[j] - cumulative[i]) - (b.T * b.entropy - a.T * a.entropy) - penalty;
      const double diff = std::abs(r.lhs - r.rhs);
      r.defect = diff == 0.0 ? 0.0 : diff / std::abs(r.lhs);
      rep.max_defect = std::max(rep.max_defect, r.defect);
      rep.rows.push_back(r);
    }
  return rep;
}

// ---------------------------------------------------------------------------
// T -> 0

struct ZeroTRow {
  double T = 0.0;
  double energy = 0.0;
  double gap = 0.0;  ///< E_T - m0
};

struct ZeroTLimit {
  double m0 = 0.0;
  std::vector<ZeroTRow> rows;
  std::string truncated_by;  ///< solver message if the sequence stopped early
};

/// Sequential solves along a decreasing temperature sequence, warm-started
/// from the previous temperature.
inline ZeroTLimit zero_T_limit(const Field& n0, const Field& u0, const std::vector<double>& Ts, GridPtr grid,
                               const PenalizedSolveOptions& opts = {}) {
  for (std::size_t i = 0; i < Ts.size(); ++i) {
    if (!(Ts[i] > 0.0)) throw InvalidArgument("temperatures must be positive");
    if (i > 0 && !(Ts[i] < Ts[i - 1])) throw InvalidArgument("temperature sequence must be strictly decreasing");
  }
  ZeroTLimit out;
  out.m0 = compute_m0(n0, u0, *grid);
  std::optional<Field> warm;
  for (double T : Ts) {
    try {
      TwoMomentSolution s = solve_two_moment(n0, u0, T, grid, opts, warm);
      warm = s.A;
      const double e = energy(s.rho);
      out.rows.push_back({T, e, e - out.m0});
    } catch (const Error& e) {
      out.truncated_by = e.what();
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Randomized operator inequalities

namespace detail {

/// Per-trial generator derived from (seed, trial) only.
inline std::mt19937_64 trial_rng(std::uint64_t seed, std::uint64_t trial) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(trial >> 32)};
  return std::mt19937_64(seq);
}

inline Eigen::VectorXcd random_decaying_vector(std::mt19937_64& rng, const SpectralGrid& g, double decay) {
  std::normal_distribution<double> normal;
  Eigen::VectorXcd v(g.D);
  for (int i = 0; i < g.D; ++i) {
    const double w = std::pow(1.0 + std::abs(g.modes[i]), -decay);
    v(i) = cplx(normal(rng), normal(rng)) * w;
  }
  return v;
}

/// Random real potential with modes |k| <= 4.
inline Field random_potential(std::mt19937_64& rng, const SpectralGrid& g, double amplitude) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double a[5], b[5];
  for (int k = 0; k < 5; ++k) {
    a[k] = u(rng) / (1.0 + k);
    b[k] = u(rng) / (1.0 + k);
  }
  return Field::sample(g, [&](double x) {
    double v = a[0];
    for (int k = 1; k < 5; ++k) v += a[k] * std::cos(kTwoPi * k * x) + b[k] * std::sin(kTwoPi * k * x);
    return amplitude * v;
  });
}

}  // namespace detail

enum class OperatorFamily { hermitian_square, gibbs, rank_mixture };

inline std::string to_string(OperatorFamily f) {
  switch (f) {
    case OperatorFamily::hermitian_square: return "hermitian_square";
    case OperatorFamily::gibbs: return "gibbs";
    case OperatorFamily::rank_mixture: return "rank_mixture";
  }
  return "unknown";
}

/// One random operator drawn on the fine grid together with its restriction
/// to the coarse basis. Draws have E > 0 (non-constant modes are populated).
struct OperatorPair {
  OperatorFamily family;
  Eigen::MatrixXcd fine;
  Eigen::MatrixXcd coarse;
};

inline OperatorPair random_operator_pair(std::uint64_t seed, std::uint64_t trial, const SpectralGrid& coarse,
                                         const SpectralGrid& fine) {
  std::mt19937_64 rng = detail::trial_rng(seed, trial);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto family = static_cast<OperatorFamily>(trial % 3);
  OperatorPair out{family, {}, {}};
  switch (family) {
    case OperatorFamily::hermitian_square: {
      const double decay = 1.0 + 2.0 * unit(rng);
      const double scale = 0.2 + 4.0 * unit(rng);
      Eigen::MatrixXcd B(fine.D, fine.D);
      for (int c = 0; c < fine.D; ++c) B.col(c) = detail::random_decaying_vector(rng, fine, decay);
      B /= std::sqrt(static_cast<double>(fine.D));
      out.fine = scale * B * B.adjoint();
      // the K ordering is a prefix of the 2K ordering
      const Eigen::MatrixXcd Bc = B.topRows(coarse.D);
      out.coarse = scale * Bc * Bc.adjoint();
      break;
    }
    case OperatorFamily::gibbs: {
      const double T = 0.5 + 9.5 * unit(rng);
      const double amplitude = 10.0 * unit(rng);
      const double shift = -T * (0.5 + 1.5 * unit(rng));
      Field Af = detail::random_potential(rng, fine, amplitude);
      Af = Field::real(Af.real_values().array() + shift);
      const Field Ac = Field::real(resample(Af, coarse.N).real_values());
      auto gibbs_matrix = [&](const Field& A, const SpectralGrid& g) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(hamiltonian_matrix(A, g));
        const Eigen::VectorXd w = (-es.eigenvalues() / T).array().exp();
        return Eigen::MatrixXcd(es.eigenvectors() * w.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint());
      };
      out.fine = gibbs_matrix(Af, fine);
      out.coarse = gibbs_matrix(Ac, coarse);
      break;
    }
    case OperatorFamily::rank_mixture: {
      const int rank = 1 + static_cast<int>(unit(rng) * 5.0);
      const double decay = 1.0 + 2.0 * unit(rng);
      out.fine = Eigen::MatrixXcd::Zero(fine.D, fine.D);
      out.coarse = Eigen::MatrixXcd::Zero(coarse.D, coarse.D);
      for (int r = 0; r < rank; ++r) {
        const double weight = 0.1 + 3.0 * unit(rng);
        Eigen::VectorXcd v = detail::random_decaying_vector(rng, fine, decay);
        v.normalize();
        const Eigen::VectorXcd vc = v.head(coarse.D);
        out.fine += weight * v * v.adjoint();
        out.coarse += weight * vc * vc.adjoint();
      }
      break;
    }
  }
  out.fine = 0.5 * (out.fine + out.fine.adjoint());
  out.coarse = 0.5 * (out.coarse + out.coarse.adjoint());
  return out;
}

/// Left/right ratios of the appendix inequalities for one operator.
struct InequalityRatios {
  double souslin = 0.0;   ///< -S / E^{1/2}
  double estlog = 0.0;    ///< Tr(rho log rho) / (|rho|_1 log |rho|_1), trace rescaled above 1
  double ninfty = 0.0;    ///< |n|_inf / (|rho|_2^{1/4} |rho|_E^{3/4})
  double gradnl2 = 0.0;   ///< |n'|_2 / (|rho|_1^{1/4} |rho|_E^{3/4})
  double lieb2 = 0.0;     ///< Tr rho^{2/3} / E^{2/3}
};

inline InequalityRatios inequality_ratios(const DensityOperator& rho) {
  const SpectralGrid& g = rho.grid();
  const Eigen::VectorXd& w = rho.eigenvalues();
  const double trace = w.sum();
  const double E = energy(rho);
  const double norm_E = trace + E;  // Tr((1 + H0)^{1/2} rho (1 + H0)^{1/2})
  const Field n = Field::real(density(rho));
  InequalityRatios r;
  r.souslin = -entropy(rho) / std::sqrt(E);
  {
    // Trace normalized to 2 so that log |rho|_1 > 0.
    const double c = 2.0 / trace;
    double lhs = 0.0;
    for (double x : w)
      if (c * x >= kEntropyFloor) lhs += c * x * std::log(c * x);
    r.estlog = lhs / (2.0 * std::log(2.0));
  }
  r.ninfty = n.real_values().cwiseAbs().maxCoeff() / (std::pow(w.norm(), 0.25) * std::pow(norm_E, 0.75));
  r.gradnl2 = l2_norm(differentiate(n, g)) / (std::pow(trace, 0.25) * std::pow(norm_E, 0.75));
  r.lieb2 = w.array().pow(2.0 / 3.0).sum() / std::pow(E, 2.0 / 3.0);
  return r;
}

struct InequalityRow {
  std::string name;
  double max_ratio_K = 0.0;
  double max_ratio_2K = 0.0;
  bool pass = false;
};

struct InequalityReport {
  int K = 0;
  int trials = 0;
  std::uint64_t seed = 0;
  std::vector<InequalityRow> rows;
  double negZ_max_normalized = 0.0;     ///< max Tr(Z n[sigma]) / scale
  std::vector<int> varsigma_K;          ///< cutoffs K, 2K, 4K
  std::vector<double> varsigma_sums;    ///< sum |varsigma| at each cutoff
  bool pass() const {
    return std::all_of(rows.begin(), rows.end(), [](const InequalityRow& r) { return r.pass; });
  }
};

/// Tolerance factor for the K-doubling stability of the ratio maxima.
inline constexpr double kRatioStability = 2.0;
inline constexpr double kNegZTolerance = 1e-12;

/// Normalized value of Tr(Z[beta, rho](sigma) n[sigma]) for a random real
/// potential and random perturbation density; <= 0 in exact arithmetic.
/// The scale is beta e^{-beta lambda_min} ||Galerkin(n[sigma])||_F^2, an upper
/// bound of the magnitude.
inline double negZ_trial(std::uint64_t seed, std::uint64_t trial, GridPtr grid) {
  std::mt19937_64 rng = detail::trial_rng(seed ^ 0x5a5a5a5aULL, trial);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double beta = 0.1 + 4.9 * unit(rng);
  const Field A = detail::random_potential(rng, *grid, 20.0 * unit(rng));
  const Field sigma = detail::random_potential(rng, *grid, 0.1 + 5.0 * unit(rng));
  const HamiltonianSpectrum spec = hamiltonian_spectrum(A, grid);
  const Eigen::MatrixXcd V = multiplication_matrix(sigma, *grid);
  const Eigen::MatrixXcd Z = apply_Z(beta, spec, V);
  const double q = z_quadratic_form(Z, sigma, *grid);
  const double scale = beta * std::exp(-beta * spec.lambdas.minCoeff()) * V.squaredNorm();
  return q / scale;
}

/// Sum of |varsigma_{m,k}| for H = H0 + A at beta = 1.
inline double varsigma_abs_sum(const Field& A_fine, int K) {
  GridPtr g = build_grid(K);
  const Field A = Field::real(resample(A_fine, g->N).real_values());
  const HamiltonianSpectrum spec = hamiltonian_spectrum(A, g);
  return varsigma_table(spec.lambdas, 1.0).table.cwiseAbs().sum();
}

inline InequalityReport inequality_suite(std::uint64_t seed, int trials, int K = 8, unsigned threads = 1) {
  if (trials < 1) throw InvalidArgument("trials must be >= 1");
  if (K < 1) throw InvalidArgument("inequality suite needs K >= 1");
  GridPtr coarse = build_grid(K);
  GridPtr fine = build_grid(2 * K);
  InequalityReport rep;
  rep.K = K;
  rep.trials = trials;
  rep.seed = seed;

  std::vector<InequalityRatios> rc(trials), rf(trials);
  std::vector<double> negz(trials);
  parallel_for(static_cast<std::size_t>(trials), threads, [&](std::size_t t) {
    const OperatorPair p = random_operator_pair(seed, t, *coarse, *fine);
    rc[t] = inequality_ratios(DensityOperator::from_matrix(p.coarse, coarse));
    rf[t] = inequality_ratios(DensityOperator::from_matrix(p.fine, fine));
    negz[t] = negZ_trial(seed, t, coarse);
  });

  auto add = [&](const std::string& name, double InequalityRatios::*field, bool bounded_by_one) {
    InequalityRow row{name, -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (int t = 0; t < trials; ++t) {
      row.max_ratio_K = std::max(row.max_ratio_K, rc[t].*field);
      row.max_ratio_2K = std::max(row.max_ratio_2K, rf[t].*field);
    }
    const double lo = std::min(row.max_ratio_K, row.max_ratio_2K);
    const double hi = std::max(row.max_ratio_K, row.max_ratio_2K);
    row.pass = std::isfinite(hi) && lo > 0.0 && hi <= kRatioStability * lo;
    if (bounded_by_one) row.pass = row.pass && hi <= 1.0 + 1e-12;
    rep.rows.push_back(row);
  };
  add("souslin", &InequalityRatios::souslin, false);
  add("estlog", &InequalityRatios::estlog, true);
  add("ninfty", &InequalityRatios::ninfty, false);
  add("gradnl2", &InequalityRatios::gradnl2, false);
  add("lieb2", &InequalityRatios::lieb2, false);

  rep.negZ_max_normalized = *std::max_element(negz.begin(), negz.end());
  rep.rows.push_back({"negZ", rep.negZ_max_normalized, rep.negZ_max_normalized,
                      rep.negZ_max_normalized <= kNegZTolerance});

  // fixed bounded potential, three cutoffs
  GridPtr ref = build_grid(4 * K);
  const Field A = Field::sample(*ref, [](double x) { return 3.0 * std::cos(kTwoPi * x) - 2.0 * std::sin(2.0 * kTwoPi * x); });
  for (int k : {K, 2 * K, 4 * K}) {
    rep.varsigma_K.push_back(k);
    rep.varsigma_sums.push_back(varsigma_abs_sum(A, k));
  }
  // sublinear: doubling K multiplies the sum by less than 2
  const double g1 = rep.varsigma_sums[1] / rep.varsigma_sums[0];
  const double g2 = rep.varsigma_sums[2] / rep.varsigma_sums[1];
  rep.rows.push_back({"varsigma_sum", g1, g2, g1 < 2.0 && g2 < 2.0});
  return rep;
}

}  // namespace qmx
