#include <gtest/gtest.h>

#include "oracles.hpp"
#include "qmaxwell/theorem_lab.hpp"

using namespace qmx;

namespace {

Field cosine_density(const SpectralGrid& g) {
  return Field::sample(g, [](double x) { return 1.0 + 0.3 * std::cos(kTwoPi * x); });
}

}  // namespace

TEST(Grids, GeometricEndpointsAndRatio) {
  const auto Ts = geometric_grid(0.05, 5.0, 64);
  ASSERT_EQ(Ts.size(), 64u);
  EXPECT_EQ(Ts.front(), 0.05);
  EXPECT_EQ(Ts.back(), 5.0);
  const double r = Ts[1] / Ts[0];
  for (std::size_t i = 1; i < Ts.size(); ++i) EXPECT_NEAR(Ts[i] / Ts[i - 1], r, 1e-12);
  EXPECT_THROW(geometric_grid(1.0, 1.0, 4), InvalidArgument);
  EXPECT_THROW(geometric_grid(1.0, 2.0, 1), InvalidArgument);
}

TEST(Grids, PerDecadeAndRefinement) {
  EXPECT_EQ(geometric_grid_per_decade(2.0, 20.0, 64).size(), 65u);
  EXPECT_EQ(geometric_grid_per_decade(0.05, 5.0, 32).size(), 65u);
  const auto Ts = geometric_grid(1.0, 16.0, 5);
  const auto fine = refine_grid(Ts);
  ASSERT_EQ(fine.size(), 9u);
  EXPECT_NEAR(fine[1], 1.4142135623730951, 1e-15);
  for (std::size_t i = 0; i < Ts.size(); ++i) EXPECT_EQ(fine[2 * i], Ts[i]);
}

TEST(TemperatureScan, UniformMatchesPartitionFunction) {
  const int K = 8;
  auto g = build_grid(K);
  const auto Ts = geometric_grid(0.5, 8.0, 5);
  const TemperatureScan scan = temperature_scan(Field::constant(*g, 1.0), Field::constant(*g, 0.0), Ts, g);
  ASSERT_TRUE(scan.all_ok());
  EXPECT_EQ(scan.m0, 0.0);
  for (const auto& r : scan.rows) {
    // uniform penalized state: rho = (1 + eps A) exp(-H0/T) / theta with A constant
    const double e = oracle::uniform_energy(r.T, K);
    EXPECT_NEAR(r.energy, (1.0 + r.epsilon * r.norm_A) * e, 1e-9 * e + 1e-300) << r.T;
    EXPECT_NEAR(r.norm_A, oracle::uniform_penalized_potential(r.T, K, r.epsilon), 1e-10) << r.T;
    EXPECT_EQ(r.free_energy, r.energy + r.T * r.entropy);
  }
}

TEST(TemperatureScan, UnitWindingShiftsEnergyOnly) {
  auto g = build_grid(8);
  const auto Ts = geometric_grid(1.0, 4.0, 4);
  const Field one = Field::constant(*g, 1.0);
  const TemperatureScan a = temperature_scan(one, Field::constant(*g, 0.0), Ts, g);
  const TemperatureScan b = temperature_scan(one, Field::constant(*g, kTwoPi), Ts, g);
  EXPECT_NEAR(b.m0, 2 * kPi * kPi, 1e-12);
  for (std::size_t i = 0; i < Ts.size(); ++i) {
    // shift is 2 pi^2 int n = 2 pi^2 (1 + eps A)
    const double mass = 1.0 + a.rows[i].epsilon * a.rows[i].norm_A;
    EXPECT_NEAR(b.rows[i].energy - a.rows[i].energy, 2 * kPi * kPi * mass, 1e-9);
    EXPECT_EQ(b.rows[i].entropy, a.rows[i].entropy);
  }
}

TEST(TemperatureScan, Validation) {
  auto g = build_grid(4);
  const Field one = Field::constant(*g, 1.0), zero = Field::constant(*g, 0.0);
  EXPECT_THROW(temperature_scan(one, zero, {1.0, 2.0}, g), InvalidArgument);
  EXPECT_THROW(temperature_scan(one, zero, {1.0, 3.0, 2.0}, g), InvalidArgument);
  EXPECT_THROW(temperature_scan(one, zero, {0.0, 1.0, 2.0}, g), InvalidArgument);
  EXPECT_THROW(temperature_scan(one, Field::constant(*g, 1.0), {1.0, 2.0, 3.0}, g), CirculationError);
}

TEST(TemperatureScan, FailuresAreRecordedPerRow) {
  auto g = build_grid(8);
  PenalizedSolveOptions opts;
  opts.max_iters = 1;
  const TemperatureScan scan = temperature_scan(cosine_density(*g), Field::constant(*g, 0.0), {1.0, 2.0, 3.0}, g, opts);
  EXPECT_FALSE(scan.all_ok());
  for (const auto& r : scan.rows)
    if (!r.ok) {
      EXPECT_FALSE(r.error.empty());
      EXPECT_TRUE(std::isnan(r.energy));
    }
  EXPECT_THROW(check_energy_entropy_relation(scan), SolverError);
  EXPECT_FALSE(check_monotonicity(scan).pass());
}

TEST(TemperatureScan, ThreadCountDoesNotChangeRows) {
  auto g = build_grid(8);
  const auto Ts = geometric_grid(1.0, 5.0, 6);
  const Field n0 = cosine_density(*g), u0 = Field::constant(*g, kTwoPi);
  const TemperatureScan a = temperature_scan(n0, u0, Ts, g, {}, 1);
  const TemperatureScan b = temperature_scan(n0, u0, Ts, g, {}, 3);
  for (std::size_t i = 0; i < Ts.size(); ++i) {
    EXPECT_EQ(a.rows[i].energy, b.rows[i].energy);
    EXPECT_EQ(a.rows[i].entropy, b.rows[i].entropy);
    EXPECT_EQ(a.rows[i].norm_A, b.rows[i].norm_A);
  }
}

TEST(Monotonicity, ResolvedRangeIsStrict) {
  auto g = build_grid(8);
  const TemperatureScan scan =
      temperature_scan(cosine_density(*g), Field::constant(*g, 0.0), geometric_grid(2.0, 8.0, 9), g);
  const MonotonicityReport rep = check_monotonicity(scan);
  EXPECT_EQ(rep.margin, 10.0 * scan.options.tol_fixed_point);
  EXPECT_TRUE(rep.pass());
  for (double s : rep.energy_slopes) EXPECT_GT(s, 0.0);
  for (double s : rep.entropy_slopes) EXPECT_LT(s, 0.0);
  EXPECT_FALSE(check_monotonicity(scan, 1e6).pass());
}

TEST(EnergyEntropyRelation, TrapezoidDefectIsSecondOrder) {
  auto g = build_grid(8);
  const Field n0 = cosine_density(*g), u0 = Field::constant(*g, 0.0);
  const auto coarse = geometric_grid(2.0, 8.0, 17);
  const RelationReport a = check_energy_entropy_relation(temperature_scan(n0, u0, coarse, g));
  const RelationReport b = check_energy_entropy_relation(temperature_scan(n0, u0, refine_grid(coarse), g));
  EXPECT_EQ(a.rows.size(), 136u);
  EXPECT_EQ(b.rows.size(), 528u);
  EXPECT_LT(a.max_defect, 5e-3);
  const double shrink = a.max_defect / b.max_defect;
  EXPECT_GT(shrink, 3.0);
  EXPECT_LT(shrink, 5.0);
}

TEST(EnergyEntropyRelation, PairsAreOrdered) {
  auto g = build_grid(6);
  const RelationReport r = check_energy_entropy_relation(
      temperature_scan(cosine_density(*g), Field::constant(*g, 0.0), {2.0, 3.0, 4.0}, g));
  ASSERT_EQ(r.rows.size(), 3u);
  for (const auto& row : r.rows) {
    EXPECT_LT(row.T1, row.T2);
    EXPECT_GT(row.lhs, 0.0);
    EXPECT_LE(row.defect, r.max_defect);
  }
}

TEST(ZeroTLimit, UniformEnergyDecreasesToZero) {
  auto g = build_grid(8);
  const ZeroTLimit z = zero_T_limit(Field::constant(*g, 1.0), Field::constant(*g, 0.0), {2.0, 1.0, 0.5, 0.25}, g);
  EXPECT_TRUE(z.truncated_by.empty());
  ASSERT_EQ(z.rows.size(), 4u);
  EXPECT_EQ(z.m0, 0.0);
  for (std::size_t i = 0; i < z.rows.size(); ++i) {
    EXPECT_GT(z.rows[i].gap, 0.0);
    if (i > 0) EXPECT_LT(z.rows[i].gap, z.rows[i - 1].gap);
  }
  EXPECT_LT(z.rows.back().gap, 1e-4);
}

TEST(ZeroTLimit, SolverFailureTruncatesSequence) {
  auto g = build_grid(8);
  PenalizedSolveOptions opts;
  opts.max_iters = 1;
  const ZeroTLimit z = zero_T_limit(cosine_density(*g), Field::constant(*g, 0.0), {1.0, 0.5}, g, opts);
  EXPECT_FALSE(z.truncated_by.empty());
  EXPECT_LT(z.rows.size(), 2u);
  EXPECT_THROW(zero_T_limit(cosine_density(*g), Field::constant(*g, 0.0), {0.5, 1.0}, g), InvalidArgument);
}

TEST(OperatorPairs, CoarseIsPsdAndFamiliesCycle) {
  auto coarse = build_grid(4), fine = build_grid(8);
  for (std::uint64_t t = 0; t < 9; ++t) {
    const OperatorPair p = random_operator_pair(42, t, *coarse, *fine);
    EXPECT_EQ(static_cast<int>(p.family), static_cast<int>(t % 3));
    EXPECT_EQ(p.coarse.rows(), coarse->D);
    EXPECT_EQ(p.fine.rows(), fine->D);
    const DensityOperator rc = DensityOperator::from_matrix(p.coarse, coarse);
    EXPECT_GT(energy(rc), 0.0);
    const OperatorPair q = random_operator_pair(42, t, *coarse, *fine);
    EXPECT_EQ((p.fine - q.fine).cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(InequalitySuite, ReproducibleAndThreadIndependent) {
  const InequalityReport a = inequality_suite(7, 60, 4, 1);
  const InequalityReport b = inequality_suite(7, 60, 4, 3);
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_EQ(a.rows[i].name, b.rows[i].name);
    EXPECT_EQ(a.rows[i].max_ratio_K, b.rows[i].max_ratio_K);
    EXPECT_EQ(a.rows[i].max_ratio_2K, b.rows[i].max_ratio_2K);
  }
  const InequalityReport c = inequality_suite(8, 60, 4, 1);
  EXPECT_NE(a.rows[0].max_ratio_K, c.rows[0].max_ratio_K);
}

TEST(InequalitySuite, PassesAtModerateSize) {
  const InequalityReport rep = inequality_suite(42, 150, 8, 0);
  for (const auto& r : rep.rows) EXPECT_TRUE(r.pass) << r.name << " " << r.max_ratio_K << " " << r.max_ratio_2K;
  EXPECT_LE(rep.negZ_max_normalized, kNegZTolerance);
  ASSERT_EQ(rep.varsigma_sums.size(), 3u);
  EXPECT_EQ(rep.varsigma_K, (std::vector<int>{8, 16, 32}));
}

TEST(InequalitySuite, EstlogNeverExceedsOne) {
  const InequalityReport rep = inequality_suite(3, 90, 4, 0);
  for (const auto& r : rep.rows)
    if (r.name == "estlog") {
      EXPECT_LE(r.max_ratio_K, 1.0 + 1e-12);
      EXPECT_LE(r.max_ratio_2K, 1.0 + 1e-12);
    }
}
