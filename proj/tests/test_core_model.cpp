#include <cmath>

#include <gtest/gtest.h>

#include "h2k/copula.hpp"
#include "h2k/core_model.hpp"
#include "h2k/ld_sim.hpp"

using namespace h2k;

namespace {

template <typename F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no h2k::Error thrown";
  return ErrorKind::Io;
}

}  // namespace

TEST(Standardize, ElementwiseFormula) {
  CountMatrix f(3, 2);
  f << 0, 2, 1, 1, 2, 0;
  const MafVector p(Vector{{0.5, 0.2}});
  const Matrix z = standardize(f, p).z();
  for (Index i = 0; i < 3; ++i) {
    for (Index j = 0; j < 2; ++j) {
      const double pj = p[j];
      EXPECT_DOUBLE_EQ(z(i, j), (f(i, j) - 2.0 * pj) / std::sqrt(2.0 * pj * (1.0 - pj)));
    }
  }
  EXPECT_DOUBLE_EQ(z(2, 0), std::sqrt(2.0));  // f = 2, p = 0.5
  EXPECT_DOUBLE_EQ(z(1, 0), 0.0);             // f = 2p
}

TEST(Standardize, RejectsMismatchAndZeroFrequency) {
  CountMatrix f = CountMatrix::Zero(2, 2);
  EXPECT_EQ(kind_of([&] { standardize(f, MafVector(Vector{{0.3}})); }), ErrorKind::DimensionMismatch);
  EXPECT_EQ(kind_of([] { MafVector(Vector{{0.0, 0.3}}); }), ErrorKind::InvalidArgument);
  EXPECT_EQ(kind_of([] { MafVector(Vector{{0.6}}); }), ErrorKind::InvalidArgument);
}

TEST(Standardize, PopulationMomentsOfSimulatedCounts) {
  RngStream rng(11);
  const Index n = 10000;
  const MafVector p(Vector{{0.1, 0.25, 0.5}});
  const RawGenotypeMatrix raw = CopulaGenotypeModel(p, LDMatrix(Matrix::Identity(3, 3))).simulate(n, rng);
  const Matrix z = standardize(raw).z();
  for (Index j = 0; j < 3; ++j) EXPECT_LT(std::abs(z.col(j).mean()), 4.0 / std::sqrt(double(n)));
}

TEST(StandardizeEmpirical, ColumnsHaveZeroMean) {
  CountMatrix f(4, 2);
  f << 0, 1, 1, 2, 2, 1, 1, 2;
  const Matrix z = standardize_empirical(f).z();
  EXPECT_NEAR(z.col(0).mean(), 0.0, 1e-15);
  EXPECT_NEAR(z.col(1).mean(), 0.0, 1e-15);
  CountMatrix constant = CountMatrix::Constant(3, 1, 2);
  EXPECT_EQ(kind_of([&] { standardize_empirical(constant); }), ErrorKind::ZeroVariance);
}

TEST(Center, Examples) {
  const PhenotypeVector y = center(Vector{{1.0, 2.0, 3.0}});
  EXPECT_EQ(y.y(), (Vector{{-1.0, 0.0, 1.0}}));
  EXPECT_EQ(center(y.y()).y(), y.y());
  EXPECT_EQ(kind_of([] { center(Vector{{5.0, 5.0, 5.0}}); }), ErrorKind::ZeroVariance);
  EXPECT_EQ(kind_of([] { center(Vector{{1.0}}); }), ErrorKind::InvalidArgument);
  EXPECT_EQ(kind_of([] { center(Vector{{1.0, NAN}}); }), ErrorKind::NonFinite);
}

TEST(Center, MeanIsNegligible) {
  RngStream rng(3);
  const Vector raw = rng.normal_vector(1000).array() + 7.5;
  const PhenotypeVector y = center(raw);
  const double sd = std::sqrt(y.y().squaredNorm() / 999.0);
  EXPECT_LT(std::abs(y.y().mean()), 1e-12 * sd);
}

TEST(LDMatrix, FactorizationProperties) {
  const LDMatrix sigma = build_block_ar_sigma({25, {0.3, 0.9}});
  const Matrix dense = sigma.dense();
  const Matrix root = sigma.dense_sqrt();
  const Matrix inv_root = sigma.dense_inv_sqrt();
  EXPECT_LT((root * root - dense).norm() / dense.norm(), 1e-10);
  EXPECT_LT((inv_root * dense * inv_root - Matrix::Identity(50, 50)).norm(), 1e-8);
  EXPECT_EQ((dense - dense.transpose()).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_LT((sigma.dense_inverse() * dense - Matrix::Identity(50, 50)).norm(), 1e-8);
}

TEST(LDMatrix, RejectsIndefiniteAndAsymmetric) {
  Matrix bad{{1.0, 2.0}, {2.0, 1.0}};
  EXPECT_THROW(LDMatrix{bad}, Error);
  Matrix asym{{1.0, 0.1}, {0.2, 1.0}};
  EXPECT_THROW(LDMatrix{asym}, Error);
  Matrix near_singular{{1.0, 1.0 - 1e-13}, {1.0 - 1e-13, 1.0}};
  EXPECT_THROW(LDMatrix{near_singular}, Error);
}

TEST(LDMatrix, BlockOperationsMatchDense) {
  const LDMatrix sigma = build_block_ar_sigma({4, {0.2, 0.5, 0.8}});
  RngStream rng(5);
  const Matrix x = rng.normal_matrix(3, 12);
  EXPECT_LT((sigma.right_multiply(x) - x * sigma.dense()).norm(), 1e-12);
  EXPECT_LT((sigma.right_multiply_inverse(x) - x * sigma.dense_inverse()).norm(), 1e-10);
  const Vector u = rng.normal_vector(12);
  EXPECT_NEAR(sigma.quadratic_form(u), u.dot(sigma.dense() * u), 1e-12);
  const IndexSet s{1, 2, 5, 9};
  EXPECT_EQ(sigma.restrict_to(s).dense(), sigma.submatrix(s, s));
}

TEST(HeritabilityEstimate, RoundTripFromEta) {
  for (double eta2 : {0.0, 1e-6, 0.3, 1.0, 17.0, 1e6}) {
    const auto est = HeritabilityEstimate::from_eta2("x", eta2, 1.0);
    EXPECT_NEAR(est.h2_hat, est.eta2_hat / (1.0 + est.eta2_hat), 1e-12);
  }
}

TEST(ProjectionSpec, Validation) {
  EXPECT_THROW(ProjectionSpec::subset({}, 4), Error);
  EXPECT_THROW(ProjectionSpec::subset({2, 1}, 4), Error);
  EXPECT_THROW(ProjectionSpec::subset({1, 1}, 4), Error);
  EXPECT_THROW(ProjectionSpec::subset({4}, 4), Error);
  Matrix rank_one(3, 2);
  rank_one << 1, 2, 2, 4, 3, 6;
  EXPECT_THROW(ProjectionSpec::general(rank_one), Error);
  EXPECT_EQ(ProjectionSpec::subset({0, 2}, 4).matrix(), (Matrix{{1, 0}, {0, 0}, {0, 1}, {0, 0}}));
}

TEST(EffectVector, SupportInvariant) {
  EXPECT_THROW(EffectVector(Vector{{1.0, 0.5}}, IndexSet{0}, Vector{{0.1, 0.0}}), Error);
  const EffectVector ok(Vector{{1.0, 0.0}}, IndexSet{0}, Vector{{0.1, 0.0}});
  EXPECT_EQ(ok.causal(), IndexSet{0});
}
