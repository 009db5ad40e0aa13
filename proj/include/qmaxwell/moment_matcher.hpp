#pragma once

// Minimizers under density + current constraints (gauge construction) and
// under an additional global energy constraint (temperature matching).

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <variant>

#include "qmaxwell/density_operator.hpp"
#include "qmaxwell/errors.hpp"
#include "qmaxwell/grid.hpp"
#include "qmaxwell/solver.hpp"

namespace qmx {

/// Relative distance to m0 below which the energy target is treated as m0.
inline constexpr double kPureStateTolerance = 1e-6;

struct TemperatureTarget {
  double T;
};
struct EnergyTarget {
  double e0;
};

struct ConstraintSet {
  Field n0;
  Field u0;
  std::variant<TemperatureTarget, EnergyTarget> target;
};

namespace detail {

/// Periodic trapezoid rule of f(fine samples) over successively refined
/// grids until the value settles to roundoff.
template <class Integrand>
double refined_integral(int base, Integrand&& integrand) {
  double previous = integrand(base);
  for (int n = 2 * base; n <= (1 << 18); n *= 2) {
    const double value = integrand(n);
    if (std::abs(value - previous) <= 1e-15 * (1.0 + std::abs(value))) return value;
    previous = value;
  }
  return previous;
}

}  // namespace detail

/// m0 = 1/2 ( int |(sqrt n0)'|^2 + int n0 u0^2 ), the T -> 0 limit of the energy.
inline double compute_m0(const Field& n0, const Field& u0, const SpectralGrid& g) {
  detail::validate_density(n0, g);
  require_on_grid(u0, g);
  if (!u0.is_real()) throw InvalidArgument("velocity u0 must be real-valued");
  const Field dn = differentiate(n0, g);
  const double gradient_term = detail::refined_integral(std::max(4 * g.N, 64), [&](int n) {
    const Eigen::ArrayXd nv = resample(n0, n).real_values().array();
    const Eigen::ArrayXd dv = resample(dn, n).real_values().array();
    return (dv.square() / (4.0 * nv)).mean();
  });
  const int n = std::max(4 * g.N, 64);
  const Eigen::ArrayXd nv = resample(n0, n).real_values().array();
  const Eigen::ArrayXd uv = resample(u0, n).real_values().array();
  return 0.5 * (gradient_term + (nv * uv.square()).mean());
}

struct TwoMomentSolution {
  DensityOperator rho;       ///< e^{if} rho_T e^{-if}
  DensityOperator ungauged;  ///< density-constrained minimizer rho_T
  Field A;                   ///< chemical potential of rho_T on the base grid
  SolveReport report;
  double temperature = 0.0;
};

inline TwoMomentSolution solve_two_moment(const Field& n0, const Field& u0, double T, GridPtr grid,
                                          const PenalizedSolveOptions& opts = {},
                                          const std::optional<Field>& A_init = std::nullopt) {
  // validate the gauge before spending a solve on it
  (void)gauge_phase(u0, *grid);
  PenalizedSolution sol = continuation_solve(n0, T, grid, opts, A_init);
  DensityOperator gauged = gauge_transform(sol.rho, u0);
  return {std::move(gauged), std::move(sol.rho), std::move(sol.A), std::move(sol.report), T};
}

struct MatchOptions {
  double T_lo = 0.25;
  double T_hi = 1.0;
  double tol_e = 1e-6;
  int max_expansions = 40;
  int max_bisections = 200;
};

struct EnergyMatch {
  double T0 = 0.0;  ///< 0 for the pure state
  bool pure_state = false;
  double m0 = 0.0;
  double energy = 0.0;
  int evaluations = 0;
  DensityOperator rho;
  std::optional<TwoMomentSolution> solution;  ///< absent for the pure state
};

/// Finds T0 with E(rho_{T0,n0,u0}) = e0 by bisection on the increasing map
/// T -> E_T. Targets within kPureStateTolerance of m0 return the rank-one
/// state e^{if}|sqrt n0><sqrt n0|e^{-if}.
inline EnergyMatch match_energy(const Field& n0, const Field& u0, double e0, GridPtr grid,
                                const MatchOptions& match = {}, const PenalizedSolveOptions& opts = {}) {
  const SpectralGrid& g = *grid;
  if (!(match.T_lo > 0.0 && match.T_hi > match.T_lo)) throw InvalidArgument("bracket must satisfy 0 < T_lo < T_hi");
  if (!(match.tol_e > 0.0)) throw InvalidArgument("tol_e must be positive");
  const double m0 = compute_m0(n0, u0, g);
  const double pure_tol = kPureStateTolerance * std::abs(m0);
  if (e0 < m0 - pure_tol)
    throw InfeasibleTarget("energy target e0=" + std::to_string(e0) + " lies below the floor m0=" +
                               std::to_string(m0) + "; no state satisfies the constraints",
                           m0);
  EnergyMatch result{.m0 = m0, .rho = pure_state(n0, u0, g, g.K)};
  if (e0 <= m0 + pure_tol) {
    result.pure_state = true;
    result.energy = energy(result.rho);
    return result;
  }

  int evaluations = 0;
  std::optional<Field> warm;
  auto solve_at = [&](double T) {
    ++evaluations;
    TwoMomentSolution s = solve_two_moment(n0, u0, T, grid, opts, warm);
    warm = s.A;
    return s;
  };
  auto finish = [&](TwoMomentSolution s) {
    result.T0 = s.temperature;
    result.energy = energy(s.rho);
    result.rho = s.rho;
    result.evaluations = evaluations;
    result.solution = std::move(s);
    return result;
  };

  double lo = match.T_lo, hi = match.T_hi;
  TwoMomentSolution at_hi = solve_at(hi);
  for (int i = 0; energy(at_hi.rho) < e0; ++i) {
    if (i >= match.max_expansions)
      throw SolverError("bracket expansion failed: E(T=" + std::to_string(hi) + ") is still below e0=" +
                        std::to_string(e0));
    lo = hi;
    hi *= 4.0;
    at_hi = solve_at(hi);
  }
  if (std::abs(energy(at_hi.rho) - e0) <= match.tol_e) return finish(std::move(at_hi));
  TwoMomentSolution at_lo = solve_at(lo);
  for (int i = 0; energy(at_lo.rho) > e0; ++i) {
    if (i >= match.max_expansions)
      throw SolverError("bracket expansion failed: E(T=" + std::to_string(lo) + ") is still above e0=" +
                        std::to_string(e0));
    hi = lo;
    lo /= 4.0;
    at_lo = solve_at(lo);
  }
  if (std::abs(energy(at_lo.rho) - e0) <= match.tol_e) return finish(std::move(at_lo));

  for (int i = 0; i < match.max_bisections; ++i) {
    const double mid = 0.5 * (lo + hi);
    TwoMomentSolution s = solve_at(mid);
    const double e = energy(s.rho);
    if (std::abs(e - e0) <= match.tol_e || (hi - lo) <= 1e-15 * hi) return finish(std::move(s));
    if (e < e0)
      lo = mid;
    else
      hi = mid;
  }
  throw SolverError("bisection did not reach tol_e=" + std::to_string(match.tol_e) + " within " +
                    std::to_string(match.max_bisections) + " steps");
}

}  // namespace qmx
