#include <gtest/gtest.h>

#include "oracles.hpp"
#include "qmaxwell/solver.hpp"

using namespace qmx;

namespace {

Field cosine_density(const SpectralGrid& g, double a = 0.3) {
  return Field::sample(g, [a](double x) { return 1.0 + a * std::cos(kTwoPi * x); });
}

}  // namespace

TEST(ContinuationSolve, UniformDensityMatchesThetaSum) {
  const int K = 8;
  auto g = build_grid(K);
  for (double T : {0.5, 1.0, 2.0, 5.0}) {
    const PenalizedSolution s = continuation_solve(Field::constant(*g, 1.0), T, g);
    const Eigen::VectorXd A = s.A.real_values();
    const double eps = s.report.last().epsilon;
    // pointwise noise in A is ~ machine eps / eps
    EXPECT_LT((A.array() - oracle::uniform_penalized_potential(T, K, eps)).abs().maxCoeff(), 1e-9) << T;
    EXPECT_LT((density(s.rho).array() - 1.0 - eps * A.array()).abs().maxCoeff(), 1e-12) << T;
    if (T <= 2.0) {
      EXPECT_LT((A.array() - oracle::uniform_potential(T, K)).abs().maxCoeff(), 1e-8) << T;
      EXPECT_LT((density(s.rho).array() - 1.0).abs().maxCoeff(), 1e-8) << T;
    }
    EXPECT_TRUE(s.report.converged);
    EXPECT_EQ(s.report.rungs.size(), 7u);
    EXPECT_EQ(s.report.temperature, T);
  }
}

TEST(ContinuationSolve, LargeTemperaturePotentialNearTLogD) {
  const int K = 4;
  auto g = build_grid(K);
  const double T = 1000.0;
  const PenalizedSolution s = continuation_solve(Field::constant(*g, 1.0), T, g);
  const double gap = (s.A.real_values().array() - T * std::log(static_cast<double>(g->D))).abs().maxCoeff();
  EXPECT_LE(gap, g->gamma.maxCoeff());
  EXPECT_GT(gap, 0.0);
}

TEST(ContinuationSolve, CosineDensityMeetsConstraintAndIdentity) {
  auto g = build_grid(16);
  const Field n0 = cosine_density(*g);
  const PenalizedSolution s = continuation_solve(n0, 1.0, g);
  const RungRecord& last = s.report.last();
  EXPECT_LE(last.constraint_residual, 1e-5);
  EXPECT_LT(chemical_potential_identity_check(s.rho, s.A, 1.0), 1e-6);
  EXPECT_LT(moments(s.rho).current.real_values().cwiseAbs().maxCoeff(), 1e-12);
  const auto& r = s.report.rungs;
  const double a1 = r[r.size() - 2].norm_A, a2 = r.back().norm_A;
  EXPECT_LT(std::abs(a2 - a1), 0.1 * std::max(a1, a2));
  EXPECT_TRUE(s.report.constraint_met(1e-5));
}

TEST(ContinuationSolve, MismatchEqualsEpsTimesPotential) {
  auto g = build_grid(8);
  const PenalizedSolution s = continuation_solve(cosine_density(*g, 0.5), 0.7, g);
  for (const auto& r : s.report.rungs) {
    // n - n0 = eps A at the fixed point, up to eps times the residual
    EXPECT_NEAR(r.constraint_residual, r.epsilon * r.norm_A,
                r.epsilon * std::max(r.fixed_point_residual, 1e-12) * 1.01 + 1e-15)
        << r.epsilon;
  }
}

TEST(ContinuationSolve, PenalizedFreeEnergyNeverIncreases) {
  auto g = build_grid(8);
  const PenalizedSolution s = continuation_solve(cosine_density(*g, 0.6), 0.5, g);
  for (const auto& r : s.report.rungs) {
    ASSERT_FALSE(r.free_energy_trace.empty());
    for (std::size_t i = 1; i < r.free_energy_trace.size(); ++i)
      EXPECT_LE(r.free_energy_trace[i], r.free_energy_trace[i - 1] + 1e-10 * (1 + std::abs(r.free_energy_trace[i - 1])));
  }
}

TEST(ContinuationSolve, ChemicalPotentialIdentityAcrossTemperatures) {
  auto g = build_grid(24);
  const Field n0 = Field::sample(*g, [](double x) { return 1.0 + 0.4 * std::sin(kTwoPi * x) + 0.1 * std::cos(2 * kTwoPi * x); });
  for (double T : {0.3, 1.0, 3.0}) {
    const PenalizedSolution s = continuation_solve(n0, T, g);
    EXPECT_LT(chemical_potential_identity_check(s.rho, s.A, T), 1e-6) << T;
  }
}

TEST(SolvePenalized, FixedPointAgreesWithNewtonAtLargeEps) {
  auto g = build_grid(8);
  const Field n0 = cosine_density(*g);
  PenalizedSolveOptions fp;
  fp.scheme = IterationScheme::fixed_point;
  fp.max_iters = 2000;
  fp.divergence_window = 500;
  const PenalizedSolution a = solve_penalized(n0, 1.0, 1.0, Field::constant(*g, 0.0), g);
  const PenalizedSolution b = solve_penalized(n0, 1.0, 1.0, Field::constant(*g, 0.0), g, fp);
  EXPECT_LT((a.A.real_values() - b.A.real_values()).cwiseAbs().maxCoeff(), 1e-7);
  EXPECT_EQ(b.report.rungs.size(), 1u);
}

TEST(SolvePenalized, WarmStartAtSolutionConvergesImmediately) {
  auto g = build_grid(8);
  const Field n0 = cosine_density(*g);
  const PenalizedSolution a = solve_penalized(n0, 1.0, 1e-2, Field::constant(*g, 0.0), g);
  const PenalizedSolution b = solve_penalized(n0, 1.0, 1e-2, a.A, g);
  EXPECT_LE(b.report.last().iterations, 1);
}

TEST(SolverErrors, InvalidInputs) {
  auto g = build_grid(4);
  const Field one = Field::constant(*g, 1.0);
  const Field zero = Field::constant(*g, 0.0);
  EXPECT_THROW(continuation_solve(one, 0.0, g), InvalidArgument);
  EXPECT_THROW(continuation_solve(Field::constant(*g, 0.0), 1.0, g), InvalidArgument);
  EXPECT_THROW(continuation_solve(Field::constant(*g, -1.0), 1.0, g), InvalidArgument);
  EXPECT_THROW(solve_penalized(one, 1.0, 0.0, zero, g), InvalidArgument);
  EXPECT_THROW(continuation_solve(Field::real(Eigen::VectorXd::Ones(3)), 1.0, g), InvalidArgument);
  PenalizedSolveOptions bad;
  bad.epsilon_ladder = {1.0, 1.0};
  EXPECT_THROW(continuation_solve(one, 1.0, g, bad), InvalidArgument);
  bad.epsilon_ladder = {};
  EXPECT_THROW(continuation_solve(one, 1.0, g, bad), InvalidArgument);
  PenalizedSolveOptions damp;
  damp.damping = 1.5;
  EXPECT_THROW(continuation_solve(one, 1.0, g, damp), InvalidArgument);
}

TEST(SolverErrors, IterationBudgetCarriesBestIterate) {
  auto g = build_grid(8);
  PenalizedSolveOptions opts;
  opts.max_iters = 1;
  try {
    continuation_solve(cosine_density(*g, 0.8), 0.2, g, opts);
    FAIL() << "expected SolverFailure";
  } catch (const SolverFailure& e) {
    ASSERT_TRUE(e.best_iterate().has_value());
    EXPECT_EQ(e.best_iterate()->size(), g->N);
    ASSERT_FALSE(e.report().rungs.empty());
    EXPECT_FALSE(e.report().rungs.back().converged);
    EXPECT_NE(std::string(e.what()).find("max_iters"), std::string::npos);
  }
}

TEST(ChemicalPotentialIdentity, HoldsForAnyGibbsState) {
  auto g = build_grid(16);
  const Field A = Field::sample(*g, [](double x) { return 2.0 * std::cos(kTwoPi * x) - std::sin(3 * kTwoPi * x); });
  const DensityOperator rho = density_from_hamiltonian(A, 0.8, g);
  EXPECT_LT(chemical_potential_identity_check(rho, A, 0.8), 1e-8);
  const Field shifted = Field::real(A.real_values().array() + 0.1);
  EXPECT_GT(chemical_potential_identity_check(rho, shifted, 0.8), 0.05);
}

TEST(ChemicalPotentialIdentity, ResidualIsBasisTruncation) {
  std::vector<double> residuals;
  for (int K : {8, 12, 16}) {
    auto g = build_grid(K);
    const Field n0 = Field::sample(*g, [](double x) { return 1.0 + 0.4 * std::sin(kTwoPi * x) + 0.1 * std::cos(2 * kTwoPi * x); });
    const PenalizedSolution s = continuation_solve(n0, 1.0, g);
    residuals.push_back(chemical_potential_identity_check(s.rho, s.A, 1.0));
  }
  EXPECT_LT(residuals[1], 0.1 * residuals[0]);
  EXPECT_LT(residuals[2], 0.1 * residuals[1]);
}
