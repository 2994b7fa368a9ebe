#pragma once

// Declarative experiment description, loaded from YAML.
//
// Index sets are written in a small expression language over m, the number
// of SNPs, with 0-based half-open ranges:
//   range(a, b)          a <= j < b
//   stride(a, b, k)      a, a+k, ... < b
//   {e1, e2, ...}        explicit indices
//   all                  [0, m)
//   complement(expr)     [0, m) minus expr
//   name                 a set defined earlier under `sets`
//   x | y                union
// Bounds are integer expressions in m using + - * / (floor) and parentheses,
// e.g. "range(m/4, 3*m/4)".

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "h2k/core_model.hpp"
#include "h2k/ld_sim.hpp"

namespace h2k {

enum class GenotypeModel { Gaussian, Copula };
enum class MafSource { Sampled, File };
/// Which frequencies standardize copula genotypes: the population MAFs used
/// to simulate them, or MAFs re-estimated from the simulated sample.
enum class StandardizeWith { Population, Sample };
enum class EffectRegime { Redrawn, Fixed };
enum class EstimatorMethod { EuclideanMle, MahalanobisMle, EuclideanHe, MahalanobisHe, CMle, TwoComponent };

struct LdConfig {
  // Exactly one of: explicit per-block `rhos`; `blocks` blocks following
  // `pattern` in consecutive runs; or a dense CSV `file`.
  Index block_size = 0;
  std::vector<double> rhos;
  Index blocks = 0;
  std::vector<double> pattern;
  std::string file;
  bool operator==(const LdConfig&) const = default;
};

struct MafConfig {
  MafSource source = MafSource::Sampled;
  double min_maf = 0.05;
  double max_adjacent_diff = 0.05;
  std::string file;
  bool operator==(const MafConfig&) const = default;
};

struct EffectGroup {
  std::string set;
  std::optional<Index> sample;  // draw this many loci uniformly from `set`
  double variance = 0.0;
  CausalConfig::VarianceRule rule = CausalConfig::VarianceRule::Equal;
  bool operator==(const EffectGroup&) const = default;
};

struct EstimatorSpec {
  EstimatorMethod method = EstimatorMethod::MahalanobisMle;
  std::string set;    // c-mle (empty = all SNPs) and two-component
  bool reml = false;  // two-component only
  std::string label;  // defaults to a name derived from method and set
  bool operator==(const EstimatorSpec&) const = default;
};

struct ScaleOverride {
  std::optional<Index> n;
  std::optional<LdConfig> ld;
  bool operator==(const ScaleOverride&) const = default;
};

struct ExperimentConfig {
  std::string name;
  std::string description;
  std::uint64_t seed = 0;
  int replicates = 0;
  Index n = 0;
  LdConfig ld;
  GenotypeModel genotypes = GenotypeModel::Gaussian;
  MafConfig mafs;
  StandardizeWith standardize_with = StandardizeWith::Population;
  std::vector<std::pair<std::string, std::string>> sets;
  EffectRegime regime = EffectRegime::Redrawn;
  std::vector<EffectGroup> effects;
  double sigma_e2 = 0.0;
  std::vector<EstimatorSpec> estimators;
  std::optional<ScaleOverride> full_scale;
  /// Directory relative file paths are resolved against.
  std::filesystem::path base_dir;

  bool operator==(const ExperimentConfig& o) const;
};

ExperimentConfig load_config(const std::filesystem::path& path);
/// `origin` names the source in error messages.
ExperimentConfig parse_config(const std::string& text, const std::string& origin = "<config>");
std::string serialize_config(const ExperimentConfig& config);
/// Semantic checks that need no file access beyond the config itself.
void validate_config(const ExperimentConfig& config);
/// The config with its `full_scale` overrides applied.
ExperimentConfig with_full_scale(const ExperimentConfig& config);

std::string estimator_label(const EstimatorSpec& spec);
const char* to_string(EstimatorMethod method);
const char* to_string(GenotypeModel model);

/// Evaluates an index-set expression; `named` supplies previously defined sets.
IndexSet evaluate_set(const std::string& expr, Index m,
                      const std::vector<std::pair<std::string, IndexSet>>& named = {});
/// Evaluates an integer expression in m.
Index evaluate_index(const std::string& expr, Index m);

/// SNP count implied by the LD spec, if it can be known without file access.
std::optional<Index> implied_m(const LdConfig& ld);

}  // namespace h2k
