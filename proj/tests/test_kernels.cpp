#include <cmath>

#include <gtest/gtest.h>

#include "h2k/kernels.hpp"
#include "h2k/ld_sim.hpp"
#include "oracles.hpp"

using namespace h2k;

TEST(EuclideanGrm, Examples) {
  EXPECT_EQ(euclidean_grm(GenotypeMatrix(Matrix{{1, 1}, {1, -1}})).k(), Matrix::Identity(2, 2));
  EXPECT_EQ(euclidean_grm(GenotypeMatrix(Matrix::Ones(4, 1))).k(), Matrix::Ones(4, 4));
  RngStream rng(1);
  const Matrix z = rng.normal_matrix(3, 4);
  const KernelMatrix k = euclidean_grm(GenotypeMatrix(z));
  EXPECT_EQ(k.kind(), KernelKind::Euclidean);
  EXPECT_EQ(k.divisor(), 4.0);
  for (Index i = 0; i < 3; ++i)
    for (Index j = 0; j < 3; ++j) EXPECT_NEAR(k.k()(i, j), z.row(i).dot(z.row(j)) / 4.0, 1e-15);
}

TEST(MahalanobisGrm, Examples) {
  RngStream rng(2);
  for (int rep = 0; rep < 100; ++rep) {
    const GenotypeMatrix z(rng.normal_matrix(6, 5));
    const Matrix e = euclidean_grm(z).k();
    EXPECT_LT((mahalanobis_grm(z, LDMatrix(Matrix::Identity(5, 5))).k() - e).cwiseAbs().maxCoeff(), 1e-12);
    if (rep == 0) {
      const Matrix scaled = mahalanobis_grm(z, LDMatrix(Matrix(2.5 * Matrix::Identity(5, 5)))).k();
      EXPECT_LT((scaled - e / 2.5).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
  const Matrix s{{1.0, 0.5}, {0.5, 1.0}};
  const Matrix inv = Matrix{{1.0, -0.5}, {-0.5, 1.0}} / 0.75;
  const KernelMatrix k = mahalanobis_grm(GenotypeMatrix(Matrix::Identity(2, 2)), LDMatrix(s));
  EXPECT_LT((k.k() - inv / 2.0).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(k.kind(), KernelKind::Mahalanobis);
  EXPECT_THROW(mahalanobis_grm(GenotypeMatrix(Matrix::Identity(2, 3)), LDMatrix(s)), Error);
}

TEST(Kernels, SymmetricAndPsd) {
  RngStream rng(3);
  const LDMatrix s = build_block_ar_sigma({8, {0.3, 0.8}});
  const GenotypeMatrix z = simulate_gaussian_genotypes(30, s, rng);
  for (const KernelMatrix& k : {euclidean_grm(z), mahalanobis_grm(z, s)}) {
    EXPECT_EQ((k.k() - k.k().transpose()).cwiseAbs().maxCoeff(), 0.0);
    const Vector ev = Eigen::SelfAdjointEigenSolver<Matrix>(k.k()).eigenvalues();
    EXPECT_GE(ev.minCoeff(), -1e-8 * ev.maxCoeff());
  }
}

TEST(WhitenedDesign, TrivialCases) {
  RngStream rng(4);
  const GenotypeMatrix z(rng.normal_matrix(5, 6));
  EXPECT_EQ(whitened_design(z, LDMatrix(Matrix::Identity(6, 6)), ProjectionSpec::identity(6)).w, z.z());
  // Σ[S,S] = I inside a block-diagonal Σ.
  Matrix d = Matrix::Identity(6, 6);
  d(3, 4) = d(4, 3) = 0.5;
  const LDMatrix sigma(d);
  const IndexSet s{0, 1, 2};
  EXPECT_LT((whitened_design(z, sigma, projection_for_subset(s, 6)).w - select_columns(z.z(), s)).norm(), 1e-14);
  const WhitenedDesign full = whitened_design(z, sigma, projection_for_subset({0, 1, 2, 3, 4, 5}, 6));
  EXPECT_LT((full.w - whitened_design(z, sigma, ProjectionSpec::identity(6)).w).norm(), 1e-12);
  const WhitenedDesign single = whitened_design(z, sigma, projection_for_subset({0}, 6));
  EXPECT_LT((single.w.col(0) - z.z().col(0)).norm(), 1e-14);
  EXPECT_THROW(projection_for_subset({1, 1}, 6), Error);
  EXPECT_THROW(projection_for_subset({7}, 6), Error);
}

TEST(WhitenedDesign, EmpiricalWhitening) {
  const Index n = 10000;
  RngStream rng(5);
  const LDMatrix s = build_block_ar_sigma({20, {0.6}});
  const Matrix w = whitened_design(simulate_gaussian_genotypes(n, s, rng), s, ProjectionSpec::identity(20)).w;
  // Sampling noise alone gives a Frobenius error near sqrt(m² + m)/√n ≈ 0.2.
  EXPECT_LT((w.transpose() * w / double(n) - Matrix::Identity(20, 20)).norm(), 5.0 * 20 / std::sqrt(double(n)));
}

TEST(WhitenedDesign, SubsetGramIdentity) {
  RngStream rng(6);
  const LDMatrix s(oracle::random_spd(9, rng));
  const GenotypeMatrix z(rng.normal_matrix(12, 9));
  const IndexSet sub{1, 4, 5, 8};
  const Matrix w = whitened_design(z, s, ProjectionSpec::subset(sub, 9)).w;
  const Matrix zs = select_columns(z.z(), sub);
  const Eigen::SelfAdjointEigenSolver<Matrix> es(s.submatrix(sub, sub));
  const Matrix r = es.operatorInverseSqrt();
  EXPECT_LT((w.transpose() * w - r * zs.transpose() * zs * r).norm(), 1e-10);
}

TEST(WhitenedDesign, SubsetIgnoresComplementBlock) {
  RngStream rng(7);
  const LDMatrix s = build_block_ar_sigma({2, {0.5, 0.5, 0.5}});
  const GenotypeMatrix z(rng.normal_matrix(10, 6));
  const IndexSet odd{1, 3, 5};
  Matrix d = s.dense();
  for (Index i : {0, 2, 4}) d(i, i) = 3.0;
  const Matrix w1 = whitened_design(z, s, ProjectionSpec::subset(odd, 6)).w;
  const Matrix w2 = whitened_design(z, LDMatrix(d), ProjectionSpec::subset(odd, 6)).w;
  EXPECT_LT((w1 - w2).norm(), 1e-14);
}

TEST(WhitenedDesign, GeneralProjectionAndBridge) {
  RngStream rng(8);
  const LDMatrix s(oracle::random_spd(7, rng));
  const GenotypeMatrix z(rng.normal_matrix(11, 7));
  const Matrix c = rng.normal_matrix(7, 3);
  const Matrix w = whitened_design(z, s, ProjectionSpec::general(c)).w;
  const Matrix m = c.transpose() * s.dense() * c;
  const Matrix expected = z.z() * c * Eigen::SelfAdjointEigenSolver<Matrix>(m).operatorInverseSqrt();
  EXPECT_LT((w - expected).norm(), 1e-10);
  const Matrix wi = whitened_design(z, s, ProjectionSpec::identity(7)).w;
  EXPECT_LT((mahalanobis_grm(z, s).k() - wi * wi.transpose() / 7.0).cwiseAbs().maxCoeff(), 1e-10);
  Matrix rank_deficient = c;
  rank_deficient.col(2) = c.col(0) + c.col(1);
  EXPECT_THROW(whitened_design(z, s, ProjectionSpec::general(rank_deficient)), Error);
}
