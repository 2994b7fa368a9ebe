#include "h2k/ld_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/core.h>

namespace h2k {

void ArBlockSpec::validate() const {
  if (block_size < 1) throw Error(ErrorKind::InvalidArgument, "AR block size must be positive");
  if (rhos.empty()) throw Error(ErrorKind::InvalidArgument, "AR spec needs at least one block");
  for (double r : rhos) {
    if (!(std::abs(r) < 1.0)) {
      throw Error(ErrorKind::InvalidArgument, fmt::format("AR correlation {} is not in (-1, 1)", r));
    }
  }
}

ArBlockSpec ArBlockSpec::halves(Index block_size, Index blocks, std::vector<double> pattern) {
  if (pattern.empty() || blocks < 1 || blocks % static_cast<Index>(pattern.size()) != 0) {
    throw Error(ErrorKind::InvalidArgument,
                fmt::format("{} blocks cannot be split evenly over {} correlations", blocks,
                            pattern.size()));
  }
  const Index run = blocks / static_cast<Index>(pattern.size());
  ArBlockSpec spec{block_size, {}};
  for (double r : pattern)
    for (Index k = 0; k < run; ++k) spec.rhos.push_back(r);
  return spec;
}

Matrix ar_block(Index size, double rho) {
  Matrix b(size, size);
  for (Index i = 0; i < size; ++i)
    for (Index j = 0; j < size; ++j) b(i, j) = std::pow(rho, static_cast<double>(std::abs(i - j)));
  return b;
}

LDMatrix build_block_ar_sigma(const ArBlockSpec& spec) {
  spec.validate();
  std::vector<Matrix> blocks;
  blocks.reserve(spec.rhos.size());
  for (double r : spec.rhos) blocks.push_back(ar_block(spec.block_size, r));
  return LDMatrix(std::move(blocks));
}

MafVector sample_mafs(Index m, RngStream& rng, double min_maf, double max_adjacent_diff) {
  if (m < 1) throw Error(ErrorKind::InvalidArgument, "need at least one SNP");
  if (!(min_maf > 0.0 && min_maf <= 0.5)) {
    throw Error(ErrorKind::InvalidArgument, fmt::format("min_maf {} outside (0, 0.5]", min_maf));
  }
  if (!(max_adjacent_diff > 0.0)) {
    throw Error(ErrorKind::Infeasible, "max_adjacent_diff must be positive");
  }
  Vector p(m);
  p[0] = rng.uniform(min_maf, 0.5);
  for (Index j = 1; j < m; ++j) {
    double v = rng.uniform(min_maf, 0.5);
    while (std::abs(v - p[j - 1]) >= max_adjacent_diff) v = rng.uniform(min_maf, 0.5);
    p[j] = v;
  }
  return MafVector(std::move(p));
}

GenotypeMatrix simulate_gaussian_genotypes(Index n, const LDMatrix& sigma, RngStream& rng) {
  if (n < 1) throw Error(ErrorKind::InvalidArgument, "need at least one individual");
  return GenotypeMatrix(sigma.right_multiply_sqrt(rng.normal_matrix(n, sigma.size())));
}

CausalConfig CausalConfig::all(VarianceRule rule) {
  CausalConfig c;
  c.mode = Mode::All;
  c.rule = rule;
  return c;
}

CausalConfig CausalConfig::in_region(IndexSet region, VarianceRule rule) {
  CausalConfig c;
  c.mode = Mode::Region;
  c.region = std::move(region);
  c.rule = rule;
  return c;
}

CausalConfig CausalConfig::sampled(Index size, IndexSet pool, VarianceRule rule) {
  CausalConfig c;
  c.mode = Mode::UniformSample;
  c.sample_size = size;
  c.region = std::move(pool);
  c.rule = rule;
  return c;
}

namespace {

IndexSet realize_causal_set(const CausalConfig& config, Index m, RngStream& rng) {
  switch (config.mode) {
    case CausalConfig::Mode::All: {
      IndexSet a(static_cast<std::size_t>(m));
      std::iota(a.begin(), a.end(), Index{0});
      return a;
    }
    case CausalConfig::Mode::Region:
      validate_index_set(config.region, m, "causal region");
      return config.region;
    case CausalConfig::Mode::UniformSample: {
      validate_index_set(config.region, m, "causal pool");
      const auto pool_size = static_cast<Index>(config.region.size());
      if (config.sample_size < 0 || config.sample_size > pool_size) {
        throw Error(ErrorKind::InvalidArgument,
                    fmt::format("cannot sample {} causal loci from a region of {}",
                                config.sample_size, pool_size));
      }
      IndexSet pool = config.region;
      // Partial Fisher-Yates.
      for (Index t = 0; t < config.sample_size; ++t) {
        std::uniform_int_distribution<Index> pick(t, pool_size - 1);
        std::swap(pool[static_cast<std::size_t>(t)],
                  pool[static_cast<std::size_t>(pick(rng.engine()))]);
      }
      pool.resize(static_cast<std::size_t>(config.sample_size));
      std::sort(pool.begin(), pool.end());
      return pool;
    }
  }
  return {};
}

}  // namespace

EffectVector simulate_effects(const CausalConfig& config, const MafVector& mafs, double sigma_g2,
                              RngStream& rng) {
  if (!(sigma_g2 >= 0.0)) throw Error(ErrorKind::InvalidArgument, "sigma_g2 must be non-negative");
  const Index m = mafs.size();
  IndexSet causal = realize_causal_set(config, m, rng);
  if (causal.empty()) {
    if (sigma_g2 > 0.0) {
      throw Error(ErrorKind::InvalidArgument, "empty causal set with nonzero genetic variance");
    }
    return EffectVector::zero(m);
  }
  Vector psi = Vector::Zero(m);
  if (config.rule == CausalConfig::VarianceRule::Equal) {
    const double v = sigma_g2 / static_cast<double>(causal.size());
    for (Index j : causal) psi[j] = v;
  } else {
    double total = 0.0;
    for (Index j : causal) total += 1.0 / (mafs[j] * (1.0 - mafs[j]));
    for (Index j : causal) psi[j] = sigma_g2 / (mafs[j] * (1.0 - mafs[j]) * total);
  }
  Vector u = Vector::Zero(m);
  for (Index j : causal) u[j] = std::sqrt(psi[j]) * rng.normal();
  return EffectVector(std::move(u), std::move(causal), std::move(psi));
}

PhenotypeVector simulate_phenotype(const GenotypeMatrix& z, const EffectVector& u, double sigma_e2,
                                   RngStream& rng) {
  if (z.cols() != u.size()) {
    throw Error(ErrorKind::DimensionMismatch,
                fmt::format("genotypes have {} SNPs, effects have {}", z.cols(), u.size()));
  }
  if (!(sigma_e2 >= 0.0)) throw Error(ErrorKind::InvalidArgument, "sigma_e2 must be non-negative");
  Vector y = z.z() * u.u();
  if (sigma_e2 > 0.0) y += std::sqrt(sigma_e2) * rng.normal_vector(z.rows());
  return center(y);
}

}  // namespace h2k
