#include <gtest/gtest.h>

#include <random>

#include "support.hpp"
#include "qmaxwell/grid.hpp"

using namespace qmx;

TEST(BuildGrid, SmallestNontrivial) {
  auto g = build_grid(1, 8);
  EXPECT_EQ(g->D, 3);
  ASSERT_EQ(g->gamma.size(), 3);
  EXPECT_EQ(g->gamma(0), 0.0);
  EXPECT_DOUBLE_EQ(g->gamma(1), 2 * kPi * kPi);
  EXPECT_DOUBLE_EQ(g->gamma(2), 2 * kPi * kPi);
}

TEST(BuildGrid, ConstantModeOnly) {
  auto g = build_grid(0, 4);
  EXPECT_EQ(g->D, 1);
  EXPECT_EQ(g->gamma(0), 0.0);
}

TEST(BuildGrid, K16) {
  auto g = build_grid(16, 96);
  EXPECT_EQ(g->D, 33);
  EXPECT_DOUBLE_EQ(g->gamma.maxCoeff(), 2 * kPi * kPi * 256);
}

TEST(BuildGrid, RejectsAliasingGrid) {
  EXPECT_THROW(build_grid(4, 17), InvalidArgument);
  EXPECT_NO_THROW(build_grid(4, 18));
  EXPECT_THROW(build_grid(-1, 8), InvalidArgument);
}

TEST(BuildGrid, ModeOrderingAndMultiplicities) {
  auto g = build_grid(3, 14);
  const std::vector<int> expected{0, 1, -1, 2, -2, 3, -3};
  EXPECT_EQ(g->modes, expected);
  for (int i = 0; i < g->D; ++i) EXPECT_EQ(g->index_of(g->modes[i]), i);
  // gamma_0 = 0, gamma_{2k} = gamma_{2k-1} = 2 (pi k)^2
  for (int k = 1; k <= 3; ++k) {
    EXPECT_DOUBLE_EQ(g->gamma(2 * k), 2 * std::pow(kPi * k, 2));
    EXPECT_DOUBLE_EQ(g->gamma(2 * k - 1), g->gamma(2 * k));
  }
}

TEST(BuildGrid, DefaultCollocationIsSmoothAndDealiased) {
  EXPECT_EQ(default_collocation(16), 100);
  for (int K = 0; K < 40; ++K) {
    const int N = default_collocation(K);
    EXPECT_GE(N, 3 * (2 * K + 1));
    int r = N;
    for (int p : {2, 3, 5})
      while (r % p == 0) r /= p;
    EXPECT_EQ(r, 1);
  }
}

TEST(BuildGrid, BasisProductsIntegrateToKronecker) {
  auto g = build_grid(5);
  const Eigen::MatrixXcd gram = g->synthesis.adjoint() * g->synthesis / static_cast<double>(g->N);
  EXPECT_LT((gram - Eigen::MatrixXcd::Identity(g->D, g->D)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Differentiate, Sine) {
  auto g = build_grid(4);
  const Field f = Field::sample(*g, [](double x) { return std::sin(kTwoPi * x); });
  const Field df = differentiate(f, *g);
  for (int j = 0; j < g->N; ++j) EXPECT_NEAR(df.real_values()(j), kTwoPi * std::cos(kTwoPi * g->nodes(j)), 1e-12);
}

TEST(Differentiate, Constant) {
  auto g = build_grid(4);
  EXPECT_LT(l2_norm(differentiate(Field::constant(*g, 3.5), *g)), 1e-14);
}

TEST(Differentiate, HigherMode) {
  auto g = build_grid(2);
  const Field f = Field::sample(*g, [](double x) { return std::cos(4 * kPi * x); });
  const Field df = differentiate(f, *g);
  for (int j = 0; j < g->N; ++j)
    EXPECT_NEAR(df.real_values()(j), -4 * kPi * std::sin(4 * kPi * g->nodes(j)), 1e-12);
}

TEST(Differentiate, ShapeMismatch) {
  auto g = build_grid(4);
  EXPECT_THROW(differentiate(Field::real(Eigen::VectorXd::Ones(7)), *g), InvalidArgument);
}

TEST(Integrate, Examples) {
  auto g = build_grid(4);
  EXPECT_NEAR(integrate(Field::constant(*g, 1.0), *g), 1.0, 1e-15);
  EXPECT_NEAR(integrate(Field::sample(*g, [](double x) { return std::cos(kTwoPi * x); }), *g), 0.0, 1e-15);
  const Field sq = Field::sample(*g, [](double x) { return std::pow(1 + 0.5 * std::cos(kTwoPi * x), 2); });
  EXPECT_NEAR(integrate(sq, *g), 1.125, 1e-14);
}

TEST(Integrate, ComplexFieldNeedsComplexQuadrature) {
  auto g = build_grid(2);
  const Field c = Field::complex(Eigen::VectorXcd::Constant(g->N, cplx(1.0, 2.0)));
  EXPECT_THROW(integrate(c, *g), InvalidArgument);
  EXPECT_NEAR(std::abs(integrate_complex(c, *g) - cplx(1.0, 2.0)), 0.0, 1e-15);
}

TEST(Field, ParityTags) {
  Eigen::VectorXcd v(3);
  v << cplx(1, 1e-15), cplx(2, 0), cplx(3, -1e-15);
  EXPECT_TRUE(Field::infer(v).is_real());
  v(0) = cplx(1, 1e-3);
  EXPECT_FALSE(Field::infer(v).is_real());
  EXPECT_THROW(Field::infer(v).real_values(), InvalidArgument);
}

TEST(SpectralProperties, SecondDerivativeIsMinusTwoGamma) {
  auto g = build_grid(6);
  for (int i = 0; i < g->D; ++i) {
    const Field e = Field::complex(g->synthesis.col(i));
    const Field d2 = laplacian(e, *g);
    const Eigen::VectorXcd expected = -2.0 * g->gamma(i) * g->synthesis.col(i);
    EXPECT_LT((d2.values() - expected).cwiseAbs().maxCoeff(), 1e-9 * (1 + g->gamma(i)));
  }
}

TEST(SpectralProperties, DerivativeHasZeroMean) {
  std::mt19937_64 rng(7);
  auto g = build_grid(8);
  for (int t = 0; t < 20; ++t) {
    const Field f = support::random_band_limited(rng, *g, 8);
    EXPECT_NEAR(integrate(differentiate(f, *g), *g), 0.0, 1e-12);
  }
}

TEST(SpectralProperties, Parseval) {
  std::mt19937_64 rng(11);
  auto g = build_grid(8);
  for (int t = 0; t < 20; ++t) {
    const Field f = support::random_band_limited(rng, *g, 8);
    const double lhs = f.values().squaredNorm() / g->N;
    const double rhs = forward_transform(f).squaredNorm();
    EXPECT_NEAR(lhs, rhs, 1e-12 * lhs);
  }
}

TEST(SpectralProperties, ResampleRoundTrip) {
  std::mt19937_64 rng(3);
  auto g = build_grid(8);
  const Field f = support::random_band_limited(rng, *g, 8);
  const Field up = resample(f, 4 * g->N);
  for (int j = 0; j < 4 * g->N; j += 4) EXPECT_NEAR(up.real_values()(j), f.real_values()(j / 4), 1e-12);
  EXPECT_LT(l2_norm(Eigen::VectorXd(resample(up, g->N).real_values() - f.real_values())), 1e-12);
}

TEST(SpectralProperties, MultiplicationMatrixMatchesProduct) {
  std::mt19937_64 rng(5);
  auto g = build_grid(6);
  const Field a = support::random_band_limited(rng, *g, 6);
  const Eigen::MatrixXcd M = multiplication_matrix(a, *g);
  EXPECT_LT((M - M.adjoint()).cwiseAbs().maxCoeff(), 1e-13);
  // (e_k, a e_m) by direct quadrature
  for (int r = 0; r < g->D; ++r)
    for (int s = 0; s < g->D; ++s) {
      const cplx direct =
          (g->synthesis.col(r).conjugate().cwiseProduct(a.values()).cwiseProduct(g->synthesis.col(s))).mean();
      EXPECT_NEAR(std::abs(M(r, s) - direct), 0.0, 1e-13);
    }
}
