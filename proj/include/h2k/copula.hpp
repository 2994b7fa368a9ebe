#pragma once

// Gaussian-copula simulation of correlated Binomial(2, p) genotypes whose
// standardized values have a prescribed correlation matrix.

#include <map>
#include <mutex>
#include <shared_mutex>
#include <tuple>
#include <vector>

#include "h2k/core_model.hpp"
#include "h2k/rng.hpp"

namespace h2k {

struct CopulaOptions {
  int quadrature_order = 32;
  double tol = 1e-4;
  int max_iter = 50;
  /// Clip an indefinite recovered latent matrix instead of failing.
  bool repair_indefinite = true;
};

struct CopulaSolution {
  double rho_z = 0.0;
  double achieved = 0.0;
  int iterations = 0;
};

/// Correlation between the standardized Binomial(2, p_a) and Binomial(2, p_b)
/// variables obtained by thresholding a bivariate normal with correlation
/// rho_z. Exact up to quadrature: the covariance is written as an integral
/// of the bivariate normal density along the correlation path, which is
/// smooth and is evaluated by Gauss-Legendre quadrature.
double copula_achieved_correlation(double rho_z, double p_a, double p_b, int quadrature_order = 32);

/// Attainable correlation range (countermonotone, comonotone) for the pair.
std::pair<double, double> copula_correlation_bounds(double p_a, double p_b);

/// Latent normal correlation reproducing `target_rho` for the pair, via the
/// multiplicative update rho_z <- clamp(rho_z * target / achieved, ±0.999).
CopulaSolution copula_intermediate_correlation(double target_rho, double p_a, double p_b,
                                               const CopulaOptions& options = {});

/// Memo of solved (target, p_a, p_b) triples. Safe for concurrent use.
class CopulaTable {
 public:
  explicit CopulaTable(CopulaOptions options = {}) : options_(options) {}

  CopulaSolution solve(double target_rho, double p_a, double p_b);
  std::size_t size() const;
  const CopulaOptions& options() const { return options_; }

 private:
  CopulaOptions options_;
  mutable std::shared_mutex mutex_;
  std::map<std::tuple<double, double, double>, CopulaSolution> memo_;
};

/// Precomputed latent structure for one (MAF vector, target LD) pair; draws
/// raw genotype matrices for any number of individuals.
class CopulaGenotypeModel {
 public:
  CopulaGenotypeModel(MafVector mafs, const LDMatrix& target, CopulaOptions options = {});
  CopulaGenotypeModel(MafVector mafs, const LDMatrix& target, CopulaTable& table);

  RawGenotypeMatrix simulate(Index n, RngStream& rng) const;

  const MafVector& mafs() const { return mafs_; }
  /// Frobenius norm of (repaired - recovered) latent correlation, all blocks.
  double distortion() const { return distortion_; }
  /// Smallest eigenvalue of the recovered latent matrix before any repair.
  double min_latent_eigenvalue() const { return min_latent_eigenvalue_; }
  bool repaired() const { return repaired_; }
  /// Latent correlation matrix actually used, dense.
  Matrix latent_correlation() const;

 private:
  struct Block {
    Index offset;
    Matrix latent;        // repaired latent correlation
    Matrix lower_factor;  // Cholesky factor of `latent`
  };
  void build(const LDMatrix& target, CopulaTable& table);

  MafVector mafs_;
  Index m_ = 0;
  std::vector<Block> blocks_;
  Vector lower_threshold_;  // count >= 1 when latent >= this
  Vector upper_threshold_;  // count == 2 when latent >= this
  double distortion_ = 0.0;
  double min_latent_eigenvalue_ = 0.0;
  bool repaired_ = false;
  bool repair_indefinite_ = true;
};

RawGenotypeMatrix simulate_binomial_genotypes(Index n, const MafVector& mafs,
                                              const LDMatrix& sigma_target, RngStream& rng);

}  // namespace h2k
