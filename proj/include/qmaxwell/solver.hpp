#pragma once

// Penalized density-constrained free-energy minimization.
//
// For a penalty eps > 0 the minimizer of
//   F_eps(rho) = E(rho) + T S(rho) + (1 / 2 eps) || n[rho] - n0 ||^2
// is rho = exp(-(H0 + A) / T) with the self-consistency A = (n[rho] - n0) / eps.
// The default scheme solves G(A) = eps A - n[rho(A)] + n0 = 0 by Newton's
// method; the Jacobian eps I - dn/dA is symmetric positive definite because
// dn/dA is the (nonpositive) divided-difference kernel of frechet.hpp sampled
// on the collocation grid. Every accepted step decreases F_eps(rho(A)) and
// increases the concave dual
//   Phi(A) = -T Tr exp(-(H0 + A)/T) - (A, n0) - (eps / 2) ||A||^2.
// A damped fixed-point scheme A <- (1 - theta) A + theta (n - n0) / eps is
// available for comparison; it only converges in reasonable time for large eps.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qmaxwell/density_operator.hpp"
#include "qmaxwell/errors.hpp"
#include "qmaxwell/frechet.hpp"
#include "qmaxwell/grid.hpp"

namespace qmx {

/// Lower bound enforced on the target density.
inline constexpr double kMinDensity = 1e-8;

enum class IterationScheme { newton, fixed_point };

inline std::string to_string(IterationScheme s) { return s == IterationScheme::newton ? "newton" : "fixed_point"; }

struct PenalizedSolveOptions {
  std::vector<double> epsilon_ladder{1.0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6};
  IterationScheme scheme = IterationScheme::newton;
  double damping = 1.0;       ///< initial theta for the fixed-point scheme
  double min_damping = 1e-12; ///< theta below this is reported as divergence
  int max_iters = 200;        ///< per rung
  double tol_fixed_point = 1e-8;
  double tol_constraint = 1e-5;
  int divergence_window = 50;

  void validate() const {
    if (epsilon_ladder.empty()) throw InvalidArgument("epsilon ladder is empty");
    for (std::size_t i = 0; i < epsilon_ladder.size(); ++i) {
      if (!(epsilon_ladder[i] > 0.0)) throw InvalidArgument("epsilon ladder entries must be positive");
      if (i > 0 && !(epsilon_ladder[i] < epsilon_ladder[i - 1]))
        throw InvalidArgument("epsilon ladder must be strictly decreasing");
    }
    if (!(damping > 0.0 && damping <= 1.0)) throw InvalidArgument("damping must lie in (0, 1]");
    if (max_iters < 1) throw InvalidArgument("max_iters must be >= 1");
    if (!(tol_fixed_point > 0.0)) throw InvalidArgument("tol_fixed_point must be positive");
    if (!(tol_constraint > 0.0)) throw InvalidArgument("tol_constraint must be positive");
    if (divergence_window < 1) throw InvalidArgument("divergence_window must be >= 1");
  }
};

struct RungRecord {
  double epsilon = 0.0;
  int iterations = 0;
  bool converged = false;
  double norm_A = 0.0;                ///< ||A_eps||_{L2}
  double constraint_residual = 0.0;   ///< ||n[rho] - n0||_{L2}
  double fixed_point_residual = 0.0;  ///< ||A - (n[rho] - n0)/eps||_{L2}
  double noise_floor = 0.0;           ///< roundoff level of the residual
  bool noise_limited = false;         ///< accepted at noise_floor > tol_fixed_point
  double energy = 0.0;
  double entropy = 0.0;
  double penalized_free_energy = 0.0;
  std::vector<double> free_energy_trace;  ///< F_eps on accepted iterates
};

struct SolveReport {
  double temperature = 0.0;
  std::vector<RungRecord> rungs;
  bool converged = false;

  int total_iterations() const {
    int total = 0;
    for (const auto& r : rungs) total += r.iterations;
    return total;
  }
  const RungRecord& last() const {
    if (rungs.empty()) throw Error("solve report has no rungs");
    return rungs.back();
  }
  /// Constraint residual met the reporting tolerance on the last rung.
  bool constraint_met(double tol) const { return !rungs.empty() && rungs.back().constraint_residual <= tol; }
};

struct PenalizedSolution {
  DensityOperator rho;
  Field A;
  HamiltonianSpectrum spectrum;
  SolveReport report;
};

/// Solver failure carrying the partial report and the best iterate seen.
class SolverFailure : public SolverError {
 public:
  SolverFailure(const std::string& what, SolveReport report, std::optional<Field> best)
      : SolverError(what), report_(std::move(report)), best_(std::move(best)) {}
  const SolveReport& report() const noexcept { return report_; }
  const std::optional<Field>& best_iterate() const noexcept { return best_; }

 private:
  SolveReport report_;
  std::optional<Field> best_;
};

namespace detail {

struct PenalizedState {
  HamiltonianSpectrum spectrum;
  Eigen::VectorXd weights;  ///< e^{-lambda_p / T}, ascending lambda
  Eigen::MatrixXcd psi;     ///< eigenfunctions on the grid
  Eigen::VectorXd n;
  double energy = 0.0;
  double entropy = 0.0;
  double free_energy = 0.0;  ///< F_eps
  double dual = 0.0;         ///< Phi
  Eigen::VectorXd G;         ///< eps A - n + n0
  double residual = 0.0;     ///< ||G||_{L2} / eps
  double noise_floor = 0.0;  ///< residual attainable in double precision
};

class PenalizedProblem {
 public:
  PenalizedProblem(GridPtr grid, Eigen::VectorXd n0, double T, double eps)
      : grid_(std::move(grid)), n0_(std::move(n0)), T_(T), eps_(eps) {}

  /// Returns nullopt when exp(-H/T) is not finite for this A.
  std::optional<PenalizedState> evaluate(const Eigen::VectorXd& A) const {
    const SpectralGrid& g = *grid_;
    PenalizedState s;
    s.spectrum = diagonalize(hamiltonian_matrix(Field::real(A), g), grid_);
    s.weights = (-s.spectrum.lambdas / T_).array().exp();
    if (!s.weights.allFinite()) return std::nullopt;
    s.psi = g.synthesis * s.spectrum.vectors;
    s.n = s.psi.cwiseAbs2() * s.weights;
    const Eigen::RowVectorXd mode_energy = g.gamma.transpose() * s.spectrum.vectors.cwiseAbs2();
    s.energy = mode_energy.dot(s.weights);
    s.entropy = entropy(s.weights);
    const Eigen::VectorXd mismatch = s.n - n0_;
    const double N = static_cast<double>(g.N);
    s.free_energy = s.energy + T_ * s.entropy + mismatch.squaredNorm() / N / (2.0 * eps_);
    s.dual = -T_ * s.weights.sum() - A.dot(n0_) / N - 0.5 * eps_ * A.squaredNorm() / N;
    s.G = eps_ * A - mismatch;
    s.residual = l2_norm(s.G) / eps_;
    // Eigenvalues carry an absolute error ~ eps_mach ||H||, which perturbs the
    // Gibbs weights by beta times that amount (relative).
    const double h_norm = s.spectrum.lambdas.cwiseAbs().maxCoeff();
    constexpr double kMach = std::numeric_limits<double>::epsilon();
    s.noise_floor = 4.0 * kMach * (1.0 + h_norm) * (1.0 + 1.0 / T_) * s.n.cwiseAbs().maxCoeff() / eps_;
    return s;
  }

  /// Newton direction solving (eps I - dn/dA) delta = -G.
  Eigen::VectorXd newton_direction(const PenalizedState& s) const {
    const SpectralGrid& g = *grid_;
    const int D = g.D;
    const VarsigmaTable table = varsigma_table(s.spectrum.lambdas, 1.0 / T_);
    const double cutoff = 1e-20 * table.table.cwiseAbs().maxCoeff();
    std::vector<std::pair<int, int>> pairs;
    for (int p = 0; p < D; ++p)
      for (int q = 0; q < D; ++q)
        if (std::abs(table.table(p, q)) > cutoff) pairs.emplace_back(p, q);
    Eigen::MatrixXcd W(g.N, static_cast<Eigen::Index>(pairs.size()));
    Eigen::VectorXd weights(static_cast<Eigen::Index>(pairs.size()));
    for (std::size_t c = 0; c < pairs.size(); ++c) {
      const auto [p, q] = pairs[c];
      W.col(c) = s.psi.col(p).cwiseProduct(s.psi.col(q).conjugate());
      weights(c) = table.table(p, q);
    }
    // dn(x_i)/dA(x_j)
    const Eigen::MatrixXd J = (W * weights.cast<cplx>().asDiagonal() * W.adjoint()).real() / g.N;
    Eigen::MatrixXd JG = -0.5 * (J + J.transpose());
    JG.diagonal().array() += eps_;
    Eigen::LLT<Eigen::MatrixXd> llt(JG);
    if (llt.info() == Eigen::Success) return llt.solve(-s.G);
    return JG.ldlt().solve(-s.G);
  }

  double eps() const { return eps_; }
  double T() const { return T_; }
  const Eigen::VectorXd& n0() const { return n0_; }

 private:
  GridPtr grid_;
  Eigen::VectorXd n0_;
  double T_;
  double eps_;
};

inline RungRecord make_record(const PenalizedProblem& prob, const PenalizedState& s, const Eigen::VectorXd& A,
                              int iterations, bool converged, std::vector<double> trace, double tol) {
  RungRecord r;
  r.epsilon = prob.eps();
  r.iterations = iterations;
  r.converged = converged;
  r.norm_A = l2_norm(A);
  r.constraint_residual = l2_norm(Eigen::VectorXd(s.n - prob.n0()));
  r.fixed_point_residual = s.residual;
  r.noise_floor = s.noise_floor;
  r.noise_limited = converged && s.residual > tol;
  r.energy = s.energy;
  r.entropy = s.entropy;
  r.penalized_free_energy = s.free_energy;
  r.free_energy_trace = std::move(trace);
  return r;
}

inline void validate_density(const Field& n0, const SpectralGrid& g) {
  require_on_grid(n0, g);
  if (!n0.is_real()) throw InvalidArgument("density n0 must be real-valued");
  const Eigen::VectorXd v = n0.real_values();
  if (!v.allFinite()) throw InvalidArgument("density n0 has non-finite samples");
  if (v.minCoeff() < kMinDensity)
    throw InvalidArgument("density n0 must be positive (min sample " + std::to_string(v.minCoeff()) +
                          " < " + std::to_string(kMinDensity) + ")");
}

struct RungOutcome {
  Eigen::VectorXd A;
  PenalizedState state;
  RungRecord record;
};

inline RungOutcome solve_rung(const PenalizedProblem& prob, Eigen::VectorXd A, const PenalizedSolveOptions& opts,
                              const SolveReport& partial) {
  auto fail = [&](const std::string& why, const Eigen::VectorXd& best, const std::optional<RungRecord>& rec) {
    SolveReport report = partial;
    if (rec) report.rungs.push_back(*rec);
    throw SolverFailure("penalized solve at eps=" + std::to_string(prob.eps()) + ", T=" + std::to_string(prob.T()) +
                            ": " + why,
                        std::move(report), Field::real(best));
  };

  auto initial = prob.evaluate(A);
  if (!initial) fail("exp(-(H0+A)/T) overflows at the initial potential", A, std::nullopt);
  PenalizedState state = std::move(*initial);
  std::vector<double> trace{state.free_energy};
  Eigen::VectorXd best_A = A;
  double best_residual = state.residual;
  int since_best = 0;
  double theta = opts.damping;
  double previous_residual = 0.0;

  // Strict convergence is residual <= tol. Below the roundoff floor the
  // iteration is also accepted once a step stops halving the residual.
  auto converged = [&](const PenalizedState& st) { return st.residual <= opts.tol_fixed_point; };
  auto stalled_at_floor = [&](const PenalizedState& st, double previous) {
    return st.residual <= st.noise_floor && st.residual > 0.5 * previous;
  };

  for (int it = 0; it < opts.max_iters; ++it) {
    if (converged(state)) {
      RungRecord rec = make_record(prob, state, A, it, true, std::move(trace), opts.tol_fixed_point);
      return {std::move(A), std::move(state), std::move(rec)};
    }
    previous_residual = state.residual;
    const double slack_F = 1e-10 * (1.0 + std::abs(state.free_energy));
    const double slack_dual = 1e-10 * (1.0 + std::abs(state.dual));

    if (opts.scheme == IterationScheme::newton) {
      const Eigen::VectorXd delta = prob.newton_direction(state);
      double t = 1.0;
      bool accepted = false;
      for (int ls = 0; ls < 60 && !accepted; ++ls, t *= 0.5) {
        Eigen::VectorXd trial = A + t * delta;
        auto next = prob.evaluate(trial);
        if (!next) continue;
        if (next->free_energy <= state.free_energy + slack_F && next->dual >= state.dual - slack_dual) {
          A = std::move(trial);
          state = std::move(*next);
          accepted = true;
        }
      }
      if (!accepted && state.residual <= 10.0 * std::max(opts.tol_fixed_point, state.noise_floor)) {
        // no representable descent left near the noise floor
        RungRecord rec = make_record(prob, state, A, it, true, std::move(trace), opts.tol_fixed_point);
        return {std::move(A), std::move(state), std::move(rec)};
      }
      if (!accepted)
        fail("line search stagnated at fixed-point residual " + std::to_string(state.residual), best_A,
             make_record(prob, state, A, it, false, trace, opts.tol_fixed_point));
    } else {
      const Eigen::VectorXd target = (state.n - prob.n0()) / prob.eps();
      Eigen::VectorXd trial = (1.0 - theta) * A + theta * target;
      auto next = prob.evaluate(trial);
      const bool ok = next && next->free_energy <= state.free_energy + slack_F;
      if (ok && next->residual <= state.residual) {
        A = std::move(trial);
        state = std::move(*next);
        theta = std::min(1.0, 1.2 * theta);
      } else {
        theta *= 0.5;
        if (theta < opts.min_damping)
          fail("damping fell below " + std::to_string(opts.min_damping) + " (diverging fixed-point map)", best_A,
               make_record(prob, state, A, it + 1, false, trace, opts.tol_fixed_point));
        ++since_best;
        if (since_best >= opts.divergence_window)
          fail("no residual decrease over " + std::to_string(opts.divergence_window) + " iterations", best_A,
               make_record(prob, state, A, it + 1, false, trace, opts.tol_fixed_point));
        continue;
      }
    }
    trace.push_back(state.free_energy);
    if (stalled_at_floor(state, previous_residual)) {
      RungRecord rec = make_record(prob, state, A, it + 1, true, std::move(trace), opts.tol_fixed_point);
      return {std::move(A), std::move(state), std::move(rec)};
    }
    previous_residual = state.residual;
    if (state.residual < best_residual) {
      best_residual = state.residual;
      best_A = A;
      since_best = 0;
    } else if (++since_best >= opts.divergence_window) {
      fail("no residual decrease over " + std::to_string(opts.divergence_window) + " iterations", best_A,
           make_record(prob, state, A, it + 1, false, trace, opts.tol_fixed_point));
    }
  }
  if (converged(state)) {
    RungRecord rec = make_record(prob, state, A, opts.max_iters, true, std::move(trace), opts.tol_fixed_point);
    return {std::move(A), std::move(state), std::move(rec)};
  }
  fail("max_iters=" + std::to_string(opts.max_iters) + " exhausted (residual " + std::to_string(state.residual) + ")",
       best_A, make_record(prob, state, A, opts.max_iters, false, trace, opts.tol_fixed_point));
  throw std::logic_error("unreachable");
}

inline PenalizedSolution finish(const GridPtr& grid, RungOutcome&& out, SolveReport report) {
  DensityOperator rho = DensityOperator::from_spectrum(out.state.weights, out.state.spectrum.vectors, grid);
  return {std::move(rho), Field::real(std::move(out.A)), std::move(out.state.spectrum), std::move(report)};
}

}  // namespace detail

/// One penalized problem at fixed eps, started from A_init.
inline PenalizedSolution solve_penalized(const Field& n0, double T, double eps, const Field& A_init, GridPtr grid,
                                         const PenalizedSolveOptions& opts = {}) {
  opts.validate();
  if (!(T > 0.0)) throw InvalidArgument("temperature must be positive");
  if (!(eps > 0.0)) throw InvalidArgument("penalization eps must be positive");
  detail::validate_density(n0, *grid);
  require_on_grid(A_init, *grid);
  detail::PenalizedProblem prob(grid, n0.real_values(), T, eps);
  SolveReport report;
  report.temperature = T;
  auto out = detail::solve_rung(prob, A_init.real_values(), opts, report);
  report.rungs.push_back(out.record);
  report.converged = true;
  return detail::finish(grid, std::move(out), std::move(report));
}

/// Runs the eps-ladder, warm-starting each rung from the previous potential.
/// The top rung starts from A_init (zero when absent).
inline PenalizedSolution continuation_solve(const Field& n0, double T, GridPtr grid,
                                            const PenalizedSolveOptions& opts = {},
                                            const std::optional<Field>& A_init = std::nullopt) {
  opts.validate();
  if (!(T > 0.0)) throw InvalidArgument("temperature must be positive");
  detail::validate_density(n0, *grid);
  Eigen::VectorXd A = Eigen::VectorXd::Zero(grid->N);
  if (A_init) {
    require_on_grid(*A_init, *grid);
    A = A_init->real_values();
  }
  const Eigen::VectorXd target = n0.real_values();
  SolveReport report;
  report.temperature = T;
  std::optional<detail::RungOutcome> out;
  for (double eps : opts.epsilon_ladder) {
    detail::PenalizedProblem prob(grid, target, T, eps);
    out = detail::solve_rung(prob, std::move(A), opts, report);
    report.rungs.push_back(out->record);
    A = out->A;
  }
  report.converged = true;
  return detail::finish(grid, std::move(*out), std::move(report));
}

/// L2 mismatch between A and the local expression
///   A = ( Lap(n)/4 - k - T n[rho log rho] ) / n
/// obtained from A n = (1/2) n[A rho + rho A] with T log rho = -(H0 + A).
inline double chemical_potential_identity_check(const DensityOperator& rho, const Field& A, double T) {
  if (!(T > 0.0)) throw InvalidArgument("temperature must be positive");
  const SpectralGrid& g = rho.grid();
  require_on_grid(A, g);
  const Moments m = moments(rho);
  const Eigen::VectorXd n = m.n.real_values();
  const Eigen::VectorXd lap_n = laplacian(m.n, g).real_values();
  Eigen::VectorXd log_weights(rho.eigenvalues().size());
  for (Eigen::Index p = 0; p < log_weights.size(); ++p) {
    const double x = rho.eigenvalues()(p);
    log_weights(p) = x < kEntropyFloor ? 0.0 : x * std::log(x);
  }
  const Eigen::VectorXd n_rho_log = rho.eigenfunctions().cwiseAbs2() * log_weights;
  const Eigen::VectorXd rhs =
      (0.25 * lap_n - m.k.real_values() - T * n_rho_log).array() / n.array();
  return l2_norm(Eigen::VectorXd(A.real_values() - rhs));
}

}  // namespace qmx
