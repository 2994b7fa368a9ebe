#pragma once

// Seeded simulate -> estimate -> summarize runner for declarative experiments.

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "h2k/config.hpp"
#include "h2k/copula.hpp"
#include "h2k/kernels.hpp"

namespace h2k {

inline constexpr const char* kCsvSchemaVersion = "1";
/// Fraction of flagged rows above which an experiment counts as failed.
inline constexpr double kFlaggedRowLimit = 0.05;

struct ReplicateRow {
  int replicate = 0;
  std::string estimator;
  std::string set;  // estimand subset; empty for total heritability
  double h2_hat = 0.0;
  double truth = 0.0;     // true h² (or h²_S) for this replicate's effects
  double h2_total = 0.0;  // true total h²
  double eta2_hat = 0.0;
  double sigma2_hat = 0.0;
  std::optional<double> se;
  std::optional<double> sigma2_S;
  std::optional<double> sigma2_Sc;
  std::optional<double> sigma2_e;
  bool boundary = false;
  bool range = false;
  bool ratio_near_one = false;
  bool pinned = false;
  bool converged = true;
  int iterations = 0;
  double log_likelihood = 0.0;
  std::string failure;

  /// Rows that count towards the numerical-failure threshold.
  bool flagged() const { return boundary || pinned || !converged || !failure.empty(); }
};

struct SummaryRow {
  std::string estimator;
  std::string quantity;
  int count = 0;
  double mean = 0.0;
  double sd = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
};

/// Per estimator and quantity: mean, sample sd and mean ± 1.96 sd/√R over
/// rows without a failure. Throws if any estimator has fewer than 2 rows.
std::vector<SummaryRow> summarize(const std::vector<ReplicateRow>& rows);

struct SimulatedReplicate {
  std::optional<RawGenotypeMatrix> raw;
  GenotypeMatrix z;
  EffectVector effects;
  PhenotypeVector y;
};

/// Everything shared by the replicates of one experiment: Σ, MAFs, resolved
/// sets, copula model, whitening maps and (for the fixed regime) effects.
class ExperimentPlan {
 public:
  explicit ExperimentPlan(ExperimentConfig config);

  const ExperimentConfig& config() const { return config_; }
  const LDMatrix& sigma() const { return *sigma_; }
  const MafVector& mafs() const { return mafs_; }
  Index m() const { return sigma_->size(); }
  const std::vector<std::pair<std::string, IndexSet>>& sets() const { return named_; }
  const CopulaGenotypeModel* copula() const { return copula_.get(); }

  SimulatedReplicate simulate(int replicate) const;
  /// Simulates replicate `replicate` and runs every estimator on it.
  std::vector<ReplicateRow> run(int replicate) const;

 private:
  IndexSet resolve(const std::string& expr) const;
  EffectVector draw_effects(RngStream& rng) const;

  ExperimentConfig config_;
  std::unique_ptr<LDMatrix> sigma_;
  MafVector mafs_;
  std::vector<std::pair<std::string, IndexSet>> named_;
  std::vector<IndexSet> group_sets_;
  std::vector<IndexSet> estimator_sets_;
  std::map<std::string, Whitener> whiteners_;
  std::unique_ptr<CopulaGenotypeModel> copula_;
  std::optional<EffectVector> fixed_effects_;
};

struct RunOptions {
  int threads = 1;
};

struct ExperimentResult {
  std::vector<ReplicateRow> rows;
  std::vector<SummaryRow> summary;
  int flagged_rows = 0;
  double wall_seconds = 0.0;
  std::string config_hash;
  Index n = 0;
  Index m = 0;
  double copula_distortion = 0.0;
  double copula_min_latent_eigenvalue = 0.0;

  double flagged_fraction() const {
    return rows.empty() ? 0.0 : static_cast<double>(flagged_rows) / static_cast<double>(rows.size());
  }
  bool failed() const { return flagged_fraction() > kFlaggedRowLimit; }
};

/// Runs every replicate (in parallel when threads > 1); rows are ordered by
/// replicate and then by estimator regardless of completion order.
ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

std::string replicates_csv(const std::vector<ReplicateRow>& rows);
std::string summary_csv(const std::vector<SummaryRow>& rows);
std::string manifest_json(const ExperimentConfig& config, const ExperimentResult& result, int threads);
/// Writes replicates.csv, summary.csv and manifest.json into `dir`.
void write_experiment_outputs(const std::filesystem::path& dir, const ExperimentConfig& config,
                              const ExperimentResult& result, int threads);

std::string config_hash(const ExperimentConfig& config);

}  // namespace h2k
