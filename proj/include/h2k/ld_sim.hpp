#pragma once

#include <vector>

#include "h2k/core_model.hpp"
#include "h2k/rng.hpp"

namespace h2k {

/// Block-diagonal AR(rho) LD structure: block k is m_b x m_b with entries
/// rhos[k]^|i-j|.
struct ArBlockSpec {
  Index block_size = 0;
  std::vector<double> rhos;

  Index m() const { return block_size * static_cast<Index>(rhos.size()); }
  void validate() const;

  /// `blocks` blocks whose correlations repeat each entry of `pattern` in
  /// consecutive runs of equal length (e.g. {0.4, 0.6} -> low half, high half).
  static ArBlockSpec halves(Index block_size, Index blocks, std::vector<double> pattern);
};

Matrix ar_block(Index size, double rho);
LDMatrix build_block_ar_sigma(const ArBlockSpec& spec);

/// Uniform MAFs on [min_maf, 0.5], resampled until adjacent SNPs differ by
/// less than max_adjacent_diff.
MafVector sample_mafs(Index m, RngStream& rng, double min_maf = 0.05,
                      double max_adjacent_diff = 0.05);

/// Rows N(0, Σ), drawn as (standard normal row) Σ^{1/2}.
GenotypeMatrix simulate_gaussian_genotypes(Index n, const LDMatrix& sigma, RngStream& rng);

struct CausalConfig {
  enum class Mode { All, Region, UniformSample };
  enum class VarianceRule { Equal, MafWeighted };

  Mode mode = Mode::All;
  IndexSet region;          // Region: the causal set; UniformSample: the pool
  Index sample_size = 0;    // UniformSample only
  VarianceRule rule = VarianceRule::Equal;

  static CausalConfig all(VarianceRule rule = VarianceRule::Equal);
  static CausalConfig in_region(IndexSet region, VarianceRule rule = VarianceRule::Equal);
  static CausalConfig sampled(Index size, IndexSet pool, VarianceRule rule = VarianceRule::Equal);
};

/// Gaussian fixed effects on the causal set; per-locus variances psi sum to
/// sigma_g2 over the set (equal split or proportional to 1/(p(1-p))).
EffectVector simulate_effects(const CausalConfig& config, const MafVector& mafs, double sigma_g2,
                              RngStream& rng);

/// y = Z u + e, e ~ N(0, sigma_e2 I), then centered.
PhenotypeVector simulate_phenotype(const GenotypeMatrix& z, const EffectVector& u, double sigma_e2,
                                   RngStream& rng);

}  // namespace h2k
