#include <cmath>

#include <gtest/gtest.h>

#include "h2k/kernels.hpp"
#include "h2k/ld_sim.hpp"
#include "h2k/truth.hpp"
#include "oracles.hpp"

using namespace h2k;

namespace {

IndexSet random_subset(Index m, RngStream& rng) {
  IndexSet s;
  while (s.empty() || static_cast<Index>(s.size()) == m) {
    s.clear();
    for (Index j = 0; j < m; ++j)
      if (rng.uniform(0.0, 1.0) < 0.5) s.push_back(j);
  }
  return s;
}

}  // namespace

TEST(TrueH2, Examples) {
  const LDMatrix id(Matrix::Identity(3, 3));
  EXPECT_EQ(true_h2_fixed(Vector::Zero(3), id, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(true_h2_fixed(Vector{{1.0, 1.0, 0.0}}, id, 2.0), 0.5);
  EXPECT_THROW(true_h2_fixed(Vector::Zero(3), id, 0.0), Error);
  EXPECT_THROW(true_h2_fixed(Vector::Zero(2), id, 1.0), Error);
}

TEST(TrueH2, MonteCarloVariance) {
  RngStream rng(1);
  const LDMatrix sigma(oracle::random_spd(5, rng));
  const Vector u = rng.normal_vector(5);
  const Index draws = 1000000;
  const Matrix z = rng.normal_matrix(draws, 5) * sigma.dense_sqrt();
  const Vector g = z * u;
  const double var = (g.array() - g.mean()).square().sum() / double(draws - 1);
  EXPECT_NEAR(var, sigma.quadratic_form(u), 0.01 * sigma.quadratic_form(u));
}

TEST(PartitionedH2, NestedMonteCarlo) {
  // 4x4 AR(0.5), u = (1,0,0,1), S = {1,2}: regress y on z_S.
  const LDMatrix sigma = build_block_ar_sigma({4, {0.5}});
  const Vector u{{1.0, 0.0, 0.0, 1.0}};
  const IndexSet s{1, 2};
  const double se2 = 1.0;
  const double value = true_partitioned_h2(u, sigma, s, se2);
  RngStream rng(2);
  const Index draws = 400000;
  const Matrix z = rng.normal_matrix(draws, 4) * sigma.dense_sqrt();
  const Vector y = z * u + std::sqrt(se2) * rng.normal_vector(draws);
  const Matrix zs = select_columns(z, s);
  const Vector beta = (zs.transpose() * zs).ldlt().solve(zs.transpose() * y);
  const Vector resid = y - zs * beta;
  const double mc = 1.0 - resid.squaredNorm() / (y.array() - y.mean()).square().sum();
  EXPECT_NEAR(mc, value, 0.01 * value);
}

TEST(PartitionedH2, TrivialCases) {
  RngStream rng(3);
  const LDMatrix sigma(oracle::random_spd(6, rng));
  Vector u = rng.normal_vector(6);
  u[4] = u[5] = 0.0;
  EXPECT_NEAR(true_partitioned_h2(u, sigma, {0, 1, 2, 3}, 0.7), true_h2_fixed(u, sigma, 0.7), 1e-12);
  EXPECT_NEAR(true_partitioned_h2(u, sigma, {0, 1, 2, 3, 4, 5}, 0.7), true_h2_fixed(u, sigma, 0.7), 1e-12);
}

TEST(PartitionedH2, NestingIsMonotone) {
  for (int inst = 0; inst < 500; ++inst) {
    RngStream rng(44, static_cast<std::uint64_t>(inst));
    const Index m = 3 + inst % 10;
    const LDMatrix sigma(oracle::random_spd(m, rng));
    const Vector u = rng.normal_vector(m);
    const IndexSet t = random_subset(m, rng);
    IndexSet s;
    for (Index j : t)
      if (s.empty() || rng.uniform(0.0, 1.0) < 0.5) s.push_back(j);
    EXPECT_LE(true_partitioned_h2(u, sigma, s, 1.0), true_partitioned_h2(u, sigma, t, 1.0) + 1e-12);
  }
}

TEST(PartitionedH2, SchurTermIsBlockLocal) {
  RngStream rng(5);
  const LDMatrix sigma = build_block_ar_sigma({5, {0.3, 0.7, 0.5}});
  const Vector u = rng.normal_vector(15);
  const IndexSet s{0, 3, 6, 7, 12};
  const Matrix d = sigma.dense();
  EXPECT_NEAR(detail::schur_term(u, sigma, s),
              sigma.quadratic_form(u) - detail::gamma_numerator(u, d, s), 1e-12);
  EXPECT_NEAR(true_partitioned_h2(u, LDMatrix(d), s, 0.4), true_partitioned_h2(u, sigma, s, 0.4), 1e-13);
}

TEST(CH2, IdentityAndSubsetForms) {
  RngStream rng(6);
  const LDMatrix sigma(oracle::random_spd(7, rng));
  const Vector u = rng.normal_vector(7);
  EXPECT_NEAR(true_c_h2(u, sigma, ProjectionSpec::identity(7), 0.3), true_h2_fixed(u, sigma, 0.3), 1e-12);
  const IndexSet s{1, 2, 6};
  EXPECT_NEAR(true_c_h2(u, sigma, ProjectionSpec::subset(s, 7), 0.3), true_partitioned_h2(u, sigma, s, 0.3), 1e-10);
  Matrix c = rng.normal_matrix(7, 3);
  c.col(2) = 2.0 * c.col(1);
  EXPECT_THROW(true_c_h2(u, sigma, ProjectionSpec::general(c), 0.3), Error);
}

TEST(TruthReport, Contents) {
  RngStream rng(7);
  const LDMatrix sigma(oracle::random_spd(6, rng));
  const Vector u = rng.normal_vector(6);
  const TruthReport r = truth_report(u, sigma, 0.5, {{"a", {0, 1}}, {"b", {0, 1, 2, 3}}},
                                     {{"c", ProjectionSpec::general(rng.normal_matrix(6, 2))}});
  ASSERT_EQ(r.h2_subsets.size(), 2u);
  ASSERT_EQ(r.h2_projections.size(), 1u);
  EXPECT_NEAR(r.h2_total, true_h2_fixed(u, sigma, 0.5), 1e-15);
  EXPECT_DOUBLE_EQ(r.components.genetic_variance, sigma.quadratic_form(u));
  for (const auto& [name, h] : r.h2_subsets) {
    EXPECT_GE(h, 0.0);
    EXPECT_LE(h, r.h2_total);
  }
  EXPECT_NEAR(r.h2_subsets[0].second,
              (r.components.genetic_variance - r.schur_terms[0]) / (r.components.genetic_variance + 0.5), 1e-14);
}
