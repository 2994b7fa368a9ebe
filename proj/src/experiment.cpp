#include "h2k/experiment.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>
#include <thread>

#include <fmt/core.h>
#include <json.hpp>

#include "h2k/estimators.hpp"
#include "h2k/io.hpp"
#include "h2k/truth.hpp"
#include "h2k/two_component.hpp"

namespace h2k {

namespace {

// Replicate id of the stream that draws effects shared by all replicates.
constexpr std::uint64_t kFixedEffectsStream = ~std::uint64_t{0};

LDMatrix build_sigma(const LdConfig& ld, const std::filesystem::path& base_dir) {
  if (!ld.file.empty()) {
    const std::filesystem::path path = std::filesystem::path(ld.file).is_absolute() ? std::filesystem::path(ld.file) : base_dir / ld.file;
    return LDMatrix(io::read_matrix_csv(path));
  }
  if (!ld.rhos.empty()) return build_block_ar_sigma(ArBlockSpec{ld.block_size, ld.rhos});
  return build_block_ar_sigma(ArBlockSpec::halves(ld.block_size, ld.blocks, ld.pattern));
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 14695981039346656037ull;
  for (const unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

void fill_from(ReplicateRow& row, const HeritabilityEstimate& est) {
  row.h2_hat = est.h2_hat;
  row.eta2_hat = est.eta2_hat;
  row.sigma2_hat = est.sigma2_hat;
  row.se = est.se;
  row.boundary = est.boundary_flag;
  row.range = est.range_flag;
  row.ratio_near_one = est.ratio_near_one;
  row.iterations = est.iterations;
  row.log_likelihood = est.log_likelihood;
}

}  // namespace

std::string config_hash(const ExperimentConfig& config) {
  return fmt::format("{:016x}", fnv1a(serialize_config(config)));
}

ExperimentPlan::ExperimentPlan(ExperimentConfig config) : config_(std::move(config)) {
  validate_config(config_);
  sigma_ = std::make_unique<LDMatrix>(build_sigma(config_.ld, config_.base_dir));
  const Index m = sigma_->size();

  if (config_.mafs.source == MafSource::File) {
    const std::filesystem::path p = config_.mafs.file;
    mafs_ = io::read_mafs(p.is_absolute() ? p : config_.base_dir / p);
    if (mafs_.size() != m) {
      throw Error(ErrorKind::DimensionMismatch, fmt::format("MAF file has {} entries, LD matrix has {} SNPs",
                                                            mafs_.size(), m));
    }
  } else {
    RngStream rng = RngStream(config_.seed).substream("mafs");
    mafs_ = sample_mafs(m, rng, config_.mafs.min_maf, config_.mafs.max_adjacent_diff);
  }

  for (const auto& [name, expr] : config_.sets) named_.emplace_back(name, evaluate_set(expr, m, named_));
  for (const auto& g : config_.effects) group_sets_.push_back(resolve(g.set));
  for (const auto& e : config_.estimators) {
    estimator_sets_.push_back(e.set.empty() ? IndexSet{} : resolve(e.set));
    if (e.method == EstimatorMethod::CMle && !whiteners_.count(e.set)) {
      ProjectionSpec proj = e.set.empty() ? ProjectionSpec::identity(m) : projection_for_subset(estimator_sets_.back(), m);
      whiteners_.emplace(e.set, Whitener(*sigma_, std::move(proj)));
    }
  }

  if (config_.genotypes == GenotypeModel::Copula) copula_ = std::make_unique<CopulaGenotypeModel>(mafs_, *sigma_);
  if (config_.regime == EffectRegime::Fixed) {
    RngStream rng = RngStream(config_.seed, kFixedEffectsStream).substream("effects");
    fixed_effects_ = draw_effects(rng);
  }
}

IndexSet ExperimentPlan::resolve(const std::string& expr) const { return evaluate_set(expr, sigma_->size(), named_); }

EffectVector ExperimentPlan::draw_effects(RngStream& rng) const {
  EffectVector total = EffectVector::zero(sigma_->size());
  for (std::size_t g = 0; g < config_.effects.size(); ++g) {
    const EffectGroup& group = config_.effects[g];
    RngStream sub = rng.substream(fmt::format("group-{}", g));
    const CausalConfig cfg = group.sample ? CausalConfig::sampled(*group.sample, group_sets_[g], group.rule)
                                          : CausalConfig::in_region(group_sets_[g], group.rule);
    total = total.combined_with(simulate_effects(cfg, mafs_, group.variance, sub));
  }
  return total;
}

SimulatedReplicate ExperimentPlan::simulate(int replicate) const {
  const RngStream root(config_.seed, static_cast<std::uint64_t>(replicate));
  SimulatedReplicate out;
  if (fixed_effects_) {
    out.effects = *fixed_effects_;
  } else {
    RngStream rng = root.substream("effects");
    out.effects = draw_effects(rng);
  }
  RngStream geno = root.substream("genotypes");
  if (copula_) {
    out.raw = copula_->simulate(config_.n, geno);
    out.z = config_.standardize_with == StandardizeWith::Population ? standardize(*out.raw)
                                                                    : standardize_empirical(out.raw->counts());
  } else {
    out.z = simulate_gaussian_genotypes(config_.n, *sigma_, geno);
  }
  RngStream noise = root.substream("noise");
  out.y = simulate_phenotype(out.z, out.effects, config_.sigma_e2, noise);
  return out;
}

std::vector<ReplicateRow> ExperimentPlan::run(int replicate) const {
  const SimulatedReplicate sim = simulate(replicate);
  const Index m = sigma_->size();
  const double h2_total = true_h2_fixed(sim.effects, *sigma_, config_.sigma_e2);

  std::optional<KernelMatrix> euclidean, mahalanobis;
  std::vector<ReplicateRow> rows;
  for (std::size_t k = 0; k < config_.estimators.size(); ++k) {
    const EstimatorSpec& spec = config_.estimators[k];
    const IndexSet& s = estimator_sets_[k];
    ReplicateRow row;
    row.replicate = replicate;
    row.estimator = estimator_label(spec);
    row.set = spec.set;
    row.h2_total = h2_total;
    row.truth = s.empty() || static_cast<Index>(s.size()) == m
                    ? h2_total
                    : true_partitioned_h2(sim.effects.u(), *sigma_, s, config_.sigma_e2);
    try {
      switch (spec.method) {
        case EstimatorMethod::EuclideanMle:
        case EstimatorMethod::EuclideanHe:
          if (!euclidean) euclidean = euclidean_grm(sim.z);
          fill_from(row, spec.method == EstimatorMethod::EuclideanMle ? mle_single_kernel(sim.y, *euclidean)
                                                                      : he_regression(sim.y, *euclidean));
          break;
        case EstimatorMethod::MahalanobisMle:
        case EstimatorMethod::MahalanobisHe:
          if (!mahalanobis) mahalanobis = mahalanobis_grm(sim.z, *sigma_);
          fill_from(row, spec.method == EstimatorMethod::MahalanobisMle ? mle_single_kernel(sim.y, *mahalanobis)
                                                                        : he_regression(sim.y, *mahalanobis));
          break;
        case EstimatorMethod::CMle:
          fill_from(row, c_heritability_mle(sim.y, whiteners_.at(spec.set).apply(sim.z)));
          break;
        case EstimatorMethod::TwoComponent: {
          TwoComponentOptions opts;
          opts.reml = spec.reml;
          const TwoComponentEstimate est = ml_two_component(sim.y, sim.z, s, opts);
          row.h2_hat = est.h2_S();
          row.eta2_hat = row.h2_hat / (1.0 - row.h2_hat);
          row.sigma2_hat = est.sigma2_e;
          row.sigma2_S = est.sigma2_S;
          row.sigma2_Sc = est.sigma2_Sc;
          row.sigma2_e = est.sigma2_e;
          row.pinned = est.any_pinned();
          row.converged = est.converged;
          row.iterations = est.iterations;
          row.log_likelihood = est.log_likelihood;
          break;
        }
      }
    } catch (const Error& e) {
      row.failure = fmt::format("{}: {}", to_string(e.kind()), e.what());
      row.converged = false;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  const ExperimentPlan plan(config);
  const int replicates = config.replicates;
  std::vector<std::vector<ReplicateRow>> slots(static_cast<std::size_t>(replicates));

  std::atomic<int> next{0};
  std::mutex error_mutex;
  int error_replicate = replicates;
  std::string error_message;
  ErrorKind error_kind = ErrorKind::InvalidArgument;
  auto worker = [&] {
    for (int r = next++; r < replicates; r = next++) {
      try {
        slots[static_cast<std::size_t>(r)] = plan.run(r);
      } catch (const Error& e) {
        const std::lock_guard lock(error_mutex);
        if (r < error_replicate) {
          error_replicate = r;
          error_message = e.what();
          error_kind = e.kind();
        }
        next = replicates;  // stop handing out work
      }
    }
  };
  const int threads = std::max(1, std::min(options.threads, replicates));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (error_replicate < replicates) {
    throw Error(error_kind, fmt::format("replicate {}: {}", error_replicate, error_message));
  }

  ExperimentResult result;
  for (auto& slot : slots)
    for (auto& row : slot) {
      if (row.flagged()) ++result.flagged_rows;
      result.rows.push_back(std::move(row));
    }
  if (replicates >= 2) result.summary = summarize(result.rows);
  result.config_hash = config_hash(config);
  result.n = config.n;
  result.m = plan.m();
  if (plan.copula()) {
    result.copula_distortion = plan.copula()->distortion();
    result.copula_min_latent_eigenvalue = plan.copula()->min_latent_eigenvalue();
  }
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

std::vector<SummaryRow> summarize(const std::vector<ReplicateRow>& rows) {
  std::vector<std::string> order;
  std::map<std::string, std::map<std::string, std::vector<double>>> values;
  static const std::vector<std::string> kQuantities{"h2_hat", "truth", "bias", "se", "sigma2_S", "sigma2_Sc",
                                                    "sigma2_e"};
  for (const auto& row : rows) {
    if (!values.count(row.estimator)) {
      order.push_back(row.estimator);
      values[row.estimator];
    }
    if (!row.failure.empty()) continue;
    auto& v = values[row.estimator];
    v["h2_hat"].push_back(row.h2_hat);
    v["truth"].push_back(row.truth);
    v["bias"].push_back(row.h2_hat - row.truth);
    if (row.se) v["se"].push_back(*row.se);
    if (row.sigma2_S) v["sigma2_S"].push_back(*row.sigma2_S);
    if (row.sigma2_Sc) v["sigma2_Sc"].push_back(*row.sigma2_Sc);
    if (row.sigma2_e) v["sigma2_e"].push_back(*row.sigma2_e);
  }
  std::vector<SummaryRow> out;
  for (const auto& estimator : order) {
    auto& v = values[estimator];
    if (v["h2_hat"].size() < 2) {
      throw Error(ErrorKind::InvalidArgument,
                  fmt::format("estimator '{}' has fewer than 2 usable rows to summarize", estimator));
    }
    for (const auto& q : kQuantities) {
      const std::vector<double>& x = v[q];
      if (x.size() < 2) continue;
      const double r = static_cast<double>(x.size());
      double mean = 0.0;
      for (const double xi : x) mean += xi;
      mean /= r;
      double ss = 0.0;
      for (const double xi : x) ss += (xi - mean) * (xi - mean);
      const double sd = std::sqrt(ss / (r - 1.0));
      const double half = 1.96 * sd / std::sqrt(r);
      out.push_back({estimator, q, static_cast<int>(x.size()), mean, sd, mean - half, mean + half});
    }
  }
  return out;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string quoted = "\"";
  for (const char c : s) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  return quoted + "\"";
}

std::string opt(const std::optional<double>& x) { return x ? io::format_double(*x) : std::string(); }

}  // namespace

std::string replicates_csv(const std::vector<ReplicateRow>& rows) {
  std::string out =
      "replicate,estimator,set,h2_hat,truth,h2_total,eta2_hat,sigma2_hat,se,sigma2_S,sigma2_Sc,sigma2_e,"
      "boundary,range,ratio_near_one,pinned,converged,iterations,log_likelihood,failure\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{:d},{:d},{:d},{:d},{:d},{},{},{}\n", r.replicate,
                       csv_field(r.estimator), csv_field(r.set), io::format_double(r.h2_hat),
                       io::format_double(r.truth), io::format_double(r.h2_total), io::format_double(r.eta2_hat),
                       io::format_double(r.sigma2_hat), opt(r.se), opt(r.sigma2_S), opt(r.sigma2_Sc),
                       opt(r.sigma2_e), r.boundary, r.range, r.ratio_near_one, r.pinned, r.converged, r.iterations,
                       io::format_double(r.log_likelihood), csv_field(r.failure));
  }
  return out;
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
  std::string out = "estimator,quantity,count,mean,sd,ci_lower,ci_upper\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{},{},{},{}\n", csv_field(r.estimator), r.quantity, r.count,
                       io::format_double(r.mean), io::format_double(r.sd), io::format_double(r.ci_lower),
                       io::format_double(r.ci_upper));
  }
  return out;
}

std::string manifest_json(const ExperimentConfig& config, const ExperimentResult& result, int threads) {
  nlohmann::ordered_json j;
  j["schema_version"] = kCsvSchemaVersion;
  j["library"] = "h2kernel 1.0.0";
  j["eigen"] = fmt::format("{}.{}.{}", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION, EIGEN_MINOR_VERSION);
  j["name"] = config.name;
  j["description"] = config.description;
  j["config_hash"] = result.config_hash;
  j["seed"] = config.seed;
  j["replicates"] = config.replicates;
  j["n"] = result.n;
  j["m"] = result.m;
  j["genotypes"] = to_string(config.genotypes);
  j["threads"] = threads;
  j["wall_seconds"] = result.wall_seconds;
  j["rows"] = result.rows.size();
  j["flagged_rows"] = result.flagged_rows;
  j["flagged_fraction"] = result.flagged_fraction();
  j["flagged_limit"] = kFlaggedRowLimit;
  j["failed"] = result.failed();
  if (config.genotypes == GenotypeModel::Copula) {
    j["copula"] = {{"distortion", result.copula_distortion},
                   {"min_latent_eigenvalue", result.copula_min_latent_eigenvalue}};
  }
  j["outputs"] = {"replicates.csv", "summary.csv", "manifest.json"};
  j["config"] = serialize_config(config);
  return j.dump(2) + "\n";
}

void write_experiment_outputs(const std::filesystem::path& dir, const ExperimentConfig& config,
                              const ExperimentResult& result, int threads) {
  std::filesystem::create_directories(dir);
  auto write = [&](const char* name, const std::string& text) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, fmt::format("cannot write {}", (dir / name).string()));
    out << text;
  };
  write("replicates.csv", replicates_csv(result.rows));
  write("summary.csv", summary_csv(result.summary));
  write("manifest.json", manifest_json(config, result, threads));
}

}  // namespace h2k
