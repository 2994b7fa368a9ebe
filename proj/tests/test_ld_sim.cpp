#include <cmath>

#include <gtest/gtest.h>

#include "h2k/copula.hpp"
#include "h2k/ld_sim.hpp"
#include "oracles.hpp"

using namespace h2k;

TEST(BlockAr, TwoByTwo) {
  const LDMatrix s = build_block_ar_sigma({2, {0.5}});
  EXPECT_EQ(s.dense(), (Matrix{{1.0, 0.5}, {0.5, 1.0}}));
}

TEST(BlockAr, HalvesLayoutAndExactZeros) {
  const ArBlockSpec spec = ArBlockSpec::halves(100, 4, {0.4, 0.6});
  ASSERT_EQ(spec.rhos, (std::vector<double>{0.4, 0.4, 0.6, 0.6}));
  const LDMatrix s = build_block_ar_sigma(spec);
  const Matrix d = s.dense();
  EXPECT_DOUBLE_EQ(d(0, 3), std::pow(0.4, 3));
  EXPECT_DOUBLE_EQ(d(250, 252), 0.36);
  for (Index i = 0; i < 100; ++i)
    for (Index j = 100; j < 400; ++j) EXPECT_EQ(d(i, j), 0.0);
  EXPECT_THROW(build_block_ar_sigma({3, {1.0}}), Error);
}

TEST(BlockAr, InverseIsTridiagonal) {
  const Matrix inv = ar_block(5, 0.5).inverse();
  for (Index i = 0; i < 5; ++i)
    for (Index j = 0; j < 5; ++j)
      if (std::abs(i - j) > 1) EXPECT_NEAR(inv(i, j), 0.0, 1e-12);
  EXPECT_NEAR(inv(0, 0), 1.0 / 0.75, 1e-12);
  EXPECT_NEAR(inv(2, 2), 1.25 / 0.75, 1e-12);
  EXPECT_NEAR(inv(0, 1), -0.5 / 0.75, 1e-12);
}

TEST(SampleMafs, Constraints) {
  RngStream rng(2);
  const MafVector one = sample_mafs(1, rng);
  EXPECT_GE(one[0], 0.05);
  EXPECT_LE(one[0], 0.5);
  const MafVector many = sample_mafs(10000, rng);
  EXPECT_LT(many.max_adjacent_gap(), 0.05);
  EXPECT_GE(many.values().minCoeff(), 0.05);
  const MafVector fixed = sample_mafs(5, rng, 0.5);
  EXPECT_TRUE((fixed.values().array() == 0.5).all());
  EXPECT_THROW(sample_mafs(5, rng, 0.05, 0.0), Error);
}

TEST(RngStream, Determinism) {
  RngStream a(42, 3), b(42, 3), c(42, 4);
  const Matrix x = a.substream("genotypes").normal_matrix(4, 4);
  EXPECT_EQ(x, b.substream("genotypes").normal_matrix(4, 4));
  EXPECT_NE(x, c.substream("genotypes").normal_matrix(4, 4));
  EXPECT_NE(x, RngStream(42, 3).substream("noise").normal_matrix(4, 4));
}

TEST(GaussianGenotypes, EmpiricalCovariance) {
  const Index n = 10000;
  const double tol = 4.0 / std::sqrt(double(n));
  RngStream rng(8);
  const Matrix z = simulate_gaussian_genotypes(n, LDMatrix(Matrix::Identity(2, 2)), rng).z();
  const Matrix cov = z.transpose() * z / double(n);
  EXPECT_LT((cov - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), tol);
  const Matrix z2 = simulate_gaussian_genotypes(n, build_block_ar_sigma({2, {0.7}}), rng).z();
  const Matrix cov2 = z2.transpose() * z2 / double(n);
  EXPECT_NEAR(cov2(0, 1) / std::sqrt(cov2(0, 0) * cov2(1, 1)), 0.7, tol);
  RngStream r1(9), r2(9);
  const LDMatrix s = build_block_ar_sigma({3, {0.5}});
  EXPECT_EQ(simulate_gaussian_genotypes(5, s, r1).z(), simulate_gaussian_genotypes(5, s, r2).z());
}

TEST(GaussianGenotypes, WhitenedColumnsAreWhite) {
  const Index n = 10000, m = 20;
  RngStream rng(10);
  const LDMatrix s = build_block_ar_sigma({20, {0.6}});
  const Matrix w = s.right_multiply_inv_sqrt(simulate_gaussian_genotypes(n, s, rng).z());
  const Matrix cov = w.transpose() * w / double(n);
  EXPECT_LT((cov - Matrix::Identity(m, m)).norm(), 5.0 * m / std::sqrt(double(n)));
}

TEST(Copula, AchievedCorrelationMatchesMonteCarlo) {
  const auto sol = copula_intermediate_correlation(0.4, 0.5, 0.5);
  EXPECT_NEAR(sol.achieved, 0.4, 1e-4);
  RngStream rng(21);
  const Index n = 1000000;
  const Matrix latent{{1.0, sol.rho_z}, {sol.rho_z, 1.0}};
  const Eigen::LLT<Matrix> llt(latent);
  const Matrix x = rng.normal_matrix(n, 2) * Matrix(llt.matrixL()).transpose();
  // Binomial(2, 0.5): count >= 1 above Φ^{-1}(0.25), count == 2 above Φ^{-1}(0.75).
  const double t = 0.6744897501960817;
  Matrix f(n, 2);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < 2; ++j) f(i, j) = (x(i, j) >= -t) + (x(i, j) >= t);
  const Matrix c = f.rowwise() - f.colwise().mean();
  const double r = c.col(0).dot(c.col(1)) / std::sqrt(c.col(0).squaredNorm() * c.col(1).squaredNorm());
  EXPECT_NEAR(r, 0.4, 0.005);
}

TEST(Copula, BoundsAndInfeasibleTargets) {
  const auto [lo, hi] = copula_correlation_bounds(0.5, 0.5);
  EXPECT_NEAR(hi, 1.0, 1e-12);
  EXPECT_LT(lo, 0.0);
  const auto [lo2, hi2] = copula_correlation_bounds(0.05, 0.5);
  EXPECT_LT(hi2, 1.0);
  EXPECT_THROW(copula_intermediate_correlation(hi2 + 0.01, 0.05, 0.5), Error);
  EXPECT_THROW(copula_intermediate_correlation(1.0, 0.3, 0.3), Error);
  EXPECT_EQ(copula_intermediate_correlation(0.0, 0.3, 0.3).rho_z, 0.0);
}

TEST(Copula, ConvergesForRareAllelesAtStrongCorrelation) {
  for (double p : {0.05, 0.052, 0.06, 0.08}) {
    for (double target : {0.36, 0.6, 0.8}) {
      const auto sol = copula_intermediate_correlation(target, p, p + 0.001);
      EXPECT_NEAR(sol.achieved, target, 1e-4) << p << " " << target;
    }
  }
}

TEST(Copula, AchievedCorrelationIsMonotone) {
  double prev = -1.0;
  for (double r = -0.9; r <= 0.95; r += 0.05) {
    const double a = copula_achieved_correlation(r, 0.1, 0.3);
    EXPECT_GT(a, prev);
    prev = a;
  }
}

TEST(Copula, IndependentTargetGivesBinomialMarginals) {
  const Index n = 10000;
  RngStream rng(31);
  const MafVector p(Vector{{0.05, 0.2, 0.35, 0.5}});
  const RawGenotypeMatrix raw = simulate_binomial_genotypes(n, p, LDMatrix(Matrix::Identity(4, 4)), rng);
  for (Index j = 0; j < 4; ++j) {
    std::array<double, 3> counts{};
    for (Index i = 0; i < n; ++i) counts[raw.counts()(i, j)] += 1.0;
    EXPECT_GT(oracle::binomial2_gof_pvalue(counts, p[j]), 0.01);
  }
}

TEST(Copula, SampledPairsMatchTarget) {
  const Index n = 10000;
  const LDMatrix target = build_block_ar_sigma(ArBlockSpec::halves(100, 2, {0.4, 0.6}));
  RngStream rng(17);
  const MafVector mafs = sample_mafs(200, rng);
  const CopulaGenotypeModel model(mafs, target);
  EXPECT_EQ(model.distortion(), 0.0);
  RngStream g1(5), g2(5);
  const RawGenotypeMatrix raw = model.simulate(n, g1);
  EXPECT_EQ(raw.counts(), model.simulate(n, g2).counts());
  const Matrix z = standardize(raw).z();
  const Matrix c = z.rowwise() - z.colwise().mean();
  // Pairs within bands where the target is sizeable; sampling error there
  // is at most (1 - ρ²)/√n ≈ 0.0084.
  RngStream pick(99);
  for (int k = 0; k < 100; ++k) {
    const Index i = static_cast<Index>(pick.uniform(0.0, 198.0));
    const Index j = i + 1;
    const double r = c.col(i).dot(c.col(j)) / std::sqrt(c.col(i).squaredNorm() * c.col(j).squaredNorm());
    EXPECT_NEAR(r, target(i, j), 0.04) << i;
  }
}

TEST(Effects, EqualRuleAndSupport) {
  RngStream rng(4);
  const MafVector p = sample_mafs(50, rng);
  const EffectVector u = simulate_effects(CausalConfig::all(), p, 0.5, rng);
  for (Index j = 0; j < 50; ++j) EXPECT_DOUBLE_EQ(u.psi()[j], 0.5 / 50);
  const EffectVector zero = simulate_effects(CausalConfig::in_region({}), p, 0.0, rng);
  EXPECT_EQ(zero.u().squaredNorm(), 0.0);
  EXPECT_THROW(simulate_effects(CausalConfig::in_region({}), p, 0.5, rng), Error);

  const EffectVector s = simulate_effects(CausalConfig::sampled(7, {3, 5, 8, 13, 21, 34, 40, 44, 49}), p, 0.3, rng);
  EXPECT_EQ(s.causal().size(), 7u);
  for (Index j = 0; j < 50; ++j)
    if (s.u()[j] != 0.0) EXPECT_TRUE(std::binary_search(s.causal().begin(), s.causal().end(), j));
  EXPECT_NEAR(s.psi().sum(), 0.3, 1e-12 * 0.3);
}

TEST(Effects, MafWeightedRule) {
  RngStream rng(6);
  const MafVector equal(Vector::Constant(10, 0.3));
  const auto cfg = CausalConfig::in_region({0, 1, 2, 3}, CausalConfig::VarianceRule::MafWeighted);
  const EffectVector u = simulate_effects(cfg, equal, 0.4, rng);
  for (Index j = 0; j < 4; ++j) EXPECT_NEAR(u.psi()[j], 0.1, 1e-15);
  const MafVector p(Vector{{0.1, 0.5, 0.2, 0.3}});
  const EffectVector v = simulate_effects(CausalConfig::all(CausalConfig::VarianceRule::MafWeighted), p, 1.0, rng);
  double c = 0.0;
  for (Index j = 0; j < 4; ++j) c += 1.0 / (p[j] * (1 - p[j]));
  for (Index j = 0; j < 4; ++j) EXPECT_NEAR(v.psi()[j], 1.0 / (c * p[j] * (1 - p[j])), 1e-14);
}

TEST(Phenotype, Examples) {
  const Index n = 2000;
  RngStream rng(12);
  const LDMatrix s = build_block_ar_sigma({10, {0.5}});
  const GenotypeMatrix z = simulate_gaussian_genotypes(n, s, rng);
  const PhenotypeVector noise = simulate_phenotype(z, EffectVector::zero(10), 1.0, rng);
  EXPECT_NEAR(noise.y().squaredNorm() / (n - 1), 1.0, 4.0 * std::sqrt(2.0 / n));
  EXPECT_NEAR(noise.y().mean(), 0.0, 1e-12);
  const EffectVector u = simulate_effects(CausalConfig::all(), MafVector(Vector::Constant(10, 0.3)), 0.5, rng);
  const PhenotypeVector exact = simulate_phenotype(z, u, 0.0, rng);
  const Vector g = z.z() * u.u();
  EXPECT_LT((exact.y() - (g.array() - g.mean()).matrix()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Phenotype, LdMisspecificationScaleVariance) {
  RngStream rng(13);
  const LDMatrix s = build_block_ar_sigma({500, {0.3, 0.7}});
  const GenotypeMatrix z = simulate_gaussian_genotypes(500, s, rng);
  IndexSet half(500);
  for (Index j = 0; j < 500; ++j) half[j] = j;
  const EffectVector u = simulate_effects(CausalConfig::in_region(half), MafVector(Vector::Constant(1000, 0.3)), 0.5, rng);
  const PhenotypeVector y = simulate_phenotype(z, u, 0.5, rng);
  EXPECT_NEAR(y.y().squaredNorm() / 499.0, 1.0, 0.15);
}
