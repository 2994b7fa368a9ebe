// Command-line front end: simulate, grm, estimate, truth, experiment.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/core.h>
#include <json.hpp>

#include "h2k/config.hpp"
#include "h2k/estimators.hpp"
#include "h2k/experiment.hpp"
#include "h2k/io.hpp"
#include "h2k/truth.hpp"
#include "h2k/two_component.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace h2k;

namespace {

constexpr int kExitError = 1;
constexpr int kExitConfig = 2;
constexpr int kExitFlagged = 3;

struct GenotypeInput {
  std::string path;
  std::string format = "standardized";
  std::string maf_source = "population";
  std::string mafs;
};

void add_genotype_options(CLI::App* app, GenotypeInput& g) {
  app->add_option("--genotypes", g.path, "Header-less CSV, n rows x m columns")->required();
  app->add_option("--genotype-format", g.format, "raw (0/1/2 counts) or standardized")
      ->check(CLI::IsMember({"raw", "standardized"}));
  app->add_option("--maf-source", g.maf_source, "Frequencies for standardizing raw counts")
      ->check(CLI::IsMember({"population", "sample"}));
  app->add_option("--mafs", g.mafs, "MAF file (one per line); required for --maf-source population with raw input");
}

GenotypeMatrix load_genotypes(const GenotypeInput& g) {
  if (g.format == "standardized") return GenotypeMatrix(io::read_matrix_csv(g.path));
  const CountMatrix counts = io::read_counts_csv(g.path);
  if (g.maf_source == "sample") return standardize_empirical(counts);
  if (g.mafs.empty()) throw Error(ErrorKind::Config, "raw genotypes with --maf-source population need --mafs");
  return standardize(counts, io::read_mafs(g.mafs));
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, fmt::format("cannot write {}", path.string()));
  out << text;
}

json estimate_json(const HeritabilityEstimate& e) {
  json j;
  j["method"] = e.method;
  j["h2_hat"] = e.h2_hat;
  j["eta2_hat"] = e.eta2_hat;
  j["sigma2_hat"] = e.sigma2_hat;
  j["se"] = e.se ? json(*e.se) : json(nullptr);
  j["boundary_flag"] = e.boundary_flag;
  j["range_flag"] = e.range_flag;
  j["ratio_near_one"] = e.ratio_near_one;
  j["iterations"] = e.iterations;
  j["log_likelihood"] = e.log_likelihood;
  return j;
}

json variance_json(const AsymptoticVariance& av) {
  return {{"iota_2", av.iota_2},          {"iota_3", av.iota_3},
          {"iota_4", av.iota_4},          {"psi", av.psi},
          {"psi_noise", av.psi_noise},    {"se_h2", av.se_h2},
          {"infinite_variance", av.infinite_variance}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Euclidean and Mahalanobis kernel heritability estimation"};
  app.require_subcommand(1);

  // simulate
  std::string sim_config, sim_out;
  int sim_replicate = 0;
  bool sim_full = false;
  auto* simulate = app.add_subcommand("simulate", "Simulate one replicate of an experiment and write it out");
  simulate->add_option("--config", sim_config)->required();
  simulate->add_option("--out", sim_out)->required();
  simulate->add_option("--replicate", sim_replicate, "Replicate index")->check(CLI::NonNegativeNumber);
  simulate->add_flag("--full-scale", sim_full);

  // grm
  GenotypeInput grm_in;
  std::string grm_kernel, grm_ld, grm_out;
  auto* grm = app.add_subcommand("grm", "Build a genetic relationship matrix");
  grm->add_option("--kernel", grm_kernel)->required()->check(CLI::IsMember({"euclidean", "mahalanobis"}));
  add_genotype_options(grm, grm_in);
  grm->add_option("--ld", grm_ld, "Dense LD matrix CSV (Mahalanobis kernel)");
  grm->add_option("--out", grm_out)->required();

  // estimate
  GenotypeInput est_in;
  std::string est_method, est_kernel = "euclidean", est_pheno, est_ld, est_subset, est_out;
  bool est_reml = false;
  auto* estimate = app.add_subcommand("estimate", "Estimate heritability from genotypes and phenotypes");
  estimate->add_option("--method", est_method)->required()->check(CLI::IsMember({"mle", "he", "cmle", "two-comp"}));
  estimate->add_option("--kernel", est_kernel)->check(CLI::IsMember({"euclidean", "mahalanobis"}));
  add_genotype_options(estimate, est_in);
  estimate->add_option("--phenotypes", est_pheno)->required();
  estimate->add_option("--ld", est_ld, "Dense LD matrix CSV");
  estimate->add_option("--subset", est_subset, "0-based SNP indices, one per line");
  estimate->add_flag("--reml", est_reml, "REML correction for two-comp");
  estimate->add_option("--out", est_out)->required();

  // truth
  std::string truth_effects, truth_ld, truth_out;
  double truth_sigma_e2 = 0.0;
  std::vector<std::string> truth_subsets;
  auto* truth = app.add_subcommand("truth", "True fixed-effects heritabilities for known effects");
  truth->add_option("--effects", truth_effects)->required();
  truth->add_option("--ld", truth_ld)->required();
  truth->add_option("--sigma-e2", truth_sigma_e2)->required();
  truth->add_option("--subset", truth_subsets, "Subset file; may be repeated");
  truth->add_option("--out", truth_out)->required();

  // experiment
  std::string exp_config, exp_out;
  int exp_threads = 1;
  bool exp_full = false;
  auto* experiment = app.add_subcommand("experiment", "Run a declarative experiment");
  experiment->add_option("--config", exp_config)->required();
  experiment->add_option("--out", exp_out)->required();
  experiment->add_option("--threads", exp_threads)->check(CLI::PositiveNumber);
  experiment->add_flag("--full-scale", exp_full, "Apply the config's full_scale overrides");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*simulate) {
      ExperimentConfig config = load_config(sim_config);
      if (sim_full) config = with_full_scale(config);
      const ExperimentPlan plan(config);
      const SimulatedReplicate sim = plan.simulate(sim_replicate);
      const fs::path out = sim_out;
      fs::create_directories(out);
      if (sim.raw) {
        io::write_counts_csv(out / "genotypes.csv", sim.raw->counts());
      } else {
        io::write_matrix_csv(out / "genotypes.csv", sim.z.z());
      }
      io::write_vector(out / "phenotypes.txt", sim.y.y());
      io::write_effects_csv(out / "effects.csv", sim.effects);
      io::write_vector(out / "mafs.txt", plan.mafs().values());
      io::write_matrix_csv(out / "ld.csv", plan.sigma().dense());
      json j;
      j["name"] = config.name;
      j["seed"] = config.seed;
      j["replicate"] = sim_replicate;
      j["config_hash"] = config_hash(config);
      j["n"] = config.n;
      j["m"] = plan.m();
      j["genotype_format"] = sim.raw ? "raw" : "standardized";
      j["standardize_with"] = config.standardize_with == StandardizeWith::Sample ? "sample" : "population";
      j["sigma_e2"] = config.sigma_e2;
      j["h2_total"] = true_h2_fixed(sim.effects, plan.sigma(), config.sigma_e2);
      if (plan.copula()) {
        j["copula"] = {{"distortion", plan.copula()->distortion()},
                       {"min_latent_eigenvalue", plan.copula()->min_latent_eigenvalue()},
                       {"repaired", plan.copula()->repaired()}};
      }
      j["files"] = {"genotypes.csv", "phenotypes.txt", "effects.csv", "mafs.txt", "ld.csv"};
      write_text(out / "manifest.json", j.dump(2) + "\n");
    } else if (*grm) {
      const GenotypeMatrix z = load_genotypes(grm_in);
      if (grm_kernel == "mahalanobis") {
        if (grm_ld.empty()) throw Error(ErrorKind::Config, "the Mahalanobis kernel needs --ld");
        io::write_matrix_csv(grm_out, mahalanobis_grm(z, LDMatrix(io::read_matrix_csv(grm_ld))).k());
      } else {
        io::write_matrix_csv(grm_out, euclidean_grm(z).k());
      }
    } else if (*estimate) {
      const GenotypeMatrix z = load_genotypes(est_in);
      const PhenotypeVector y = center(io::read_vector(est_pheno));
      const Index m = z.cols();
      std::optional<LDMatrix> sigma;
      if (!est_ld.empty()) sigma.emplace(io::read_matrix_csv(est_ld));
      auto need_ld = [&]() -> const LDMatrix& {
        if (!sigma) throw Error(ErrorKind::Config, "this method needs --ld");
        return *sigma;
      };
      json j;
      if (est_method == "mle" || est_method == "he") {
        const KernelMatrix k = est_kernel == "mahalanobis" ? mahalanobis_grm(z, need_ld()) : euclidean_grm(z);
        if (est_method == "mle") {
          const HeritabilityEstimate e = mle_single_kernel(y, k);
          j = estimate_json(e);
          const AsymptoticVariance av = asymptotic_se(SpectralCache::from_kernel(k.k(), y.y()), e.eta2_hat, e.sigma2_hat);
          j["asymptotic_variance"] = variance_json(av);
        } else {
          j = estimate_json(he_regression(y, k));
        }
      } else if (est_method == "cmle") {
        const ProjectionSpec proj = est_subset.empty() ? ProjectionSpec::identity(m)
                                                       : projection_for_subset(io::read_index_set(est_subset, m), m);
        const WhitenedDesign w = whitened_design(z, need_ld(), proj);
        const HeritabilityEstimate e = c_heritability_mle(y, w);
        j = estimate_json(e);
        j["k"] = w.k();
        j["asymptotic_variance"] = variance_json(asymptotic_se(SpectralCache::from_design(w.w, y.y()), e.eta2_hat, e.sigma2_hat));
      } else {
        if (est_subset.empty()) throw Error(ErrorKind::Config, "two-comp needs --subset");
        TwoComponentOptions opts;
        opts.reml = est_reml;
        const TwoComponentEstimate e = ml_two_component(y, z, io::read_index_set(est_subset, m), opts);
        j["method"] = est_reml ? "two-component-reml" : "two-component";
        j["sigma2_S"] = e.sigma2_S;
        j["sigma2_Sc"] = e.sigma2_Sc;
        j["sigma2_e"] = e.sigma2_e;
        j["h2_S"] = e.h2_S();
        j["converged"] = e.converged;
        j["pinned"] = {{"S", e.pinned_S}, {"Sc", e.pinned_Sc}, {"e", e.pinned_e}};
        j["iterations"] = e.iterations;
        j["gradient_norm"] = e.gradient_norm;
        j["log_likelihood"] = e.log_likelihood;
      }
      write_text(est_out, j.dump(2) + "\n");
    } else if (*truth) {
      const EffectVector u = io::read_effects_csv(truth_effects);
      const LDMatrix sigma(io::read_matrix_csv(truth_ld));
      std::vector<std::pair<std::string, IndexSet>> subsets;
      for (const auto& path : truth_subsets) subsets.emplace_back(path, io::read_index_set(path, sigma.size()));
      const TruthReport report = truth_report(u.u(), sigma, truth_sigma_e2, subsets);
      json j;
      j["h2_total"] = report.h2_total;
      j["genetic_variance"] = report.components.genetic_variance;
      j["sigma_e2"] = report.components.sigma_e2;
      j["subsets"] = json::array();
      for (std::size_t i = 0; i < report.h2_subsets.size(); ++i) {
        j["subsets"].push_back({{"file", report.h2_subsets[i].first},
                                {"h2_S", report.h2_subsets[i].second},
                                {"schur_term", report.schur_terms[i]}});
      }
      write_text(truth_out, j.dump(2) + "\n");
    } else if (*experiment) {
      ExperimentConfig config = load_config(exp_config);
      if (exp_full) config = with_full_scale(config);
      const ExperimentResult result = run_experiment(config, RunOptions{exp_threads});
      write_experiment_outputs(exp_out, config, result, exp_threads);
      std::cout << summary_csv(result.summary);
      if (result.failed()) {
        std::cerr << fmt::format("{} of {} rows flagged ({:.1f}% > {:.0f}%)\n", result.flagged_rows,
                                 result.rows.size(), 100.0 * result.flagged_fraction(), 100.0 * kFlaggedRowLimit);
        return kExitFlagged;
      }
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == ErrorKind::Config ? kExitConfig : kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return 0;
}
