#include <cmath>

#include <gtest/gtest.h>

#include "h2k/estimators.hpp"
#include "h2k/kernels.hpp"
#include "h2k/ld_sim.hpp"
#include "h2k/two_component.hpp"
#include "oracles.hpp"

using namespace h2k;

namespace {

struct Problem {
  GenotypeMatrix z;
  PhenotypeVector y;
  IndexSet s;
  Matrix k_s, k_sc;
};

Problem make_problem(Index n, Index m, double s_var, double sc_var, std::uint64_t seed) {
  RngStream rng(seed);
  const LDMatrix sigma = build_block_ar_sigma({m / 2, {0.4, 0.6}});
  GenotypeMatrix z = simulate_gaussian_genotypes(n, sigma, rng);
  IndexSet s, sc;
  for (Index j = 0; j < m; ++j) (j % 3 == 0 ? s : sc).push_back(j);
  const MafVector p(Vector::Constant(m, 0.3));
  EffectVector u = simulate_effects(CausalConfig::in_region(s), p, s_var, rng);
  if (sc_var > 0.0) u = u.combined_with(simulate_effects(CausalConfig::in_region(sc), p, sc_var, rng));
  PhenotypeVector y = simulate_phenotype(z, u, 1.0 - s_var - sc_var, rng);
  Matrix k_s = scaled_gram(select_columns(z.z(), s), double(s.size()));
  Matrix k_sc = scaled_gram(select_columns(z.z(), sc), double(sc.size()));
  return {std::move(z), std::move(y), std::move(s), std::move(k_s), std::move(k_sc)};
}

}  // namespace

TEST(TwoComponent, GradientMatchesFiniteDifferences) {
  const Problem p = make_problem(60, 30, 0.3, 0.2, 1);
  for (bool reml : {false, true}) {
    const TwoComponentObjective f(p.y.y(), p.k_s, p.k_sc, reml);
    RngStream rng(2);
    for (int i = 0; i < 10; ++i) {
      const std::array<double, 3> theta{rng.uniform(-3.0, 0.5), rng.uniform(-3.0, 0.5), rng.uniform(-2.0, 0.5)};
      const auto g = f.evaluate(theta, true).gradient;
      for (int d = 0; d < 3; ++d) {
        const double h = 1e-5;
        auto plus = theta, minus = theta;
        plus[d] += h;
        minus[d] -= h;
        const double fd = (f.value(plus) - f.value(minus)) / (2.0 * h);
        EXPECT_NEAR(g[d], fd, 1e-5 * std::max(1.0, std::abs(fd)) + 1e-9) << "reml " << reml << " coord " << d;
      }
    }
  }
}

TEST(TwoComponent, MatchesGridSearchAtThirty) {
  const Problem p = make_problem(30, 24, 0.3, 0.3, 3);
  const TwoComponentEstimate fit = ml_two_component(p.y, p.k_s, p.k_sc);
  const auto grid = oracle::grid_two_component(p.y.y(), p.k_s, p.k_sc);
  EXPECT_NEAR(fit.sigma2_S, grid[0], 1e-2);
  EXPECT_NEAR(fit.sigma2_Sc, grid[1], 1e-2);
  EXPECT_NEAR(fit.sigma2_e, grid[2], 1e-2);
  EXPECT_TRUE(fit.converged);
}

TEST(TwoComponent, CollapsedComplementComponent) {
  const Problem p = make_problem(400, 300, 0.5, 0.0, 4);
  const TwoComponentEstimate fit = ml_two_component(p.y, p.z, p.s);
  EXPECT_LT(fit.sigma2_Sc, 0.05);
  const HeritabilityEstimate single =
      mle_single_kernel(p.y, KernelMatrix(p.k_s, KernelKind::Custom, double(p.s.size())));
  EXPECT_NEAR(fit.h2_S(), single.h2_hat, 0.05);
}

TEST(TwoComponent, PinnedComponentIsFlagged) {
  // Pure noise: both genetic components collapse onto the lower bound.
  RngStream rng(5);
  const GenotypeMatrix z(rng.normal_matrix(80, 40));
  const PhenotypeVector y = center(rng.normal_vector(80));
  IndexSet s;
  for (Index j = 0; j < 20; ++j) s.push_back(j);
  const TwoComponentEstimate fit = ml_two_component(y, z, s);
  EXPECT_TRUE(fit.sigma2_S > 1e-6 || fit.pinned_S) << fit.sigma2_S;
  EXPECT_TRUE(fit.sigma2_Sc > 1e-6 || fit.pinned_Sc) << fit.sigma2_Sc;
  EXPECT_TRUE(fit.any_pinned());
  EXPECT_GT(fit.sigma2_e, 0.5);
}

TEST(TwoComponent, RejectsImproperSubsets) {
  RngStream rng(6);
  const GenotypeMatrix z(rng.normal_matrix(10, 4));
  const PhenotypeVector y = center(rng.normal_vector(10));
  EXPECT_THROW(ml_two_component(y, z, IndexSet{}), Error);
  EXPECT_THROW(ml_two_component(y, z, IndexSet{0, 1, 2, 3}), Error);
  EXPECT_THROW(ml_two_component(y, z, IndexSet{5}), Error);
}

TEST(TwoComponent, RemlIsLabelledAndDiffers) {
  const Problem p = make_problem(60, 30, 0.3, 0.2, 7);
  TwoComponentOptions reml;
  reml.reml = true;
  const TwoComponentEstimate a = ml_two_component(p.y, p.k_s, p.k_sc);
  const TwoComponentEstimate b = ml_two_component(p.y, p.k_s, p.k_sc, reml);
  EXPECT_FALSE(a.reml);
  EXPECT_TRUE(b.reml);
  EXPECT_GE(b.sigma2_S + b.sigma2_Sc + b.sigma2_e, a.sigma2_S + a.sigma2_Sc + a.sigma2_e - 1e-6);
}
