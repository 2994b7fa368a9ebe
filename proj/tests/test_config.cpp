#include <filesystem>
#include <string>

#include <gtest/gtest.h>

#include "h2k/config.hpp"

using namespace h2k;

namespace {

const std::filesystem::path kConfigs = H2K_CONFIG_DIR;

const char* kMinimal = R"(name: tiny
seed: 7
replicates: 2
n: 20
ld:
  block_size: 5
  rhos: [0.3, 0.6]
genotypes: gaussian
effects:
  groups:
    - set: all
      variance: 0.5
sigma_e2: 0.5
estimators: [euclidean-mle]
)";

std::string config_error(const std::string& text) {
  try {
    parse_config(text, "test.yaml");
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Config);
    return e.what();
  }
  ADD_FAILURE() << "config parsed";
  return {};
}

std::string replace(std::string text, const std::string& from, const std::string& to) {
  text.replace(text.find(from), from.size(), to);
  return text;
}

}  // namespace

TEST(Config, MinimalConfigParses) {
  const ExperimentConfig c = parse_config(kMinimal);
  EXPECT_EQ(c.regime, EffectRegime::Redrawn);
  EXPECT_EQ(c.replicates, 2);
}

TEST(Config, MissingReplicatesNamesTheField) {
  const std::string msg = config_error(replace(kMinimal, "replicates: 2\n", ""));
  EXPECT_NE(msg.find("replicates"), std::string::npos) << msg;
}

TEST(Config, UnknownKeyIsRejectedWithLocation) {
  const std::string msg = config_error(replace(kMinimal, "seed: 7\n", "seed: 7\nsede: 8\n"));
  EXPECT_NE(msg.find("sede"), std::string::npos) << msg;
  EXPECT_NE(msg.find("test.yaml:3:"), std::string::npos) << msg;
}

TEST(Config, ValidationErrors) {
  config_error(replace(kMinimal, "replicates: 2", "replicates: 0"));
  config_error(replace(kMinimal, "estimators: [euclidean-mle]", "estimators: []"));
  config_error(replace(kMinimal, "estimators: [euclidean-mle]", "estimators: [magic]"));
  config_error(replace(kMinimal, "  rhos: [0.3, 0.6]\n", "  rhos: [0.3, 0.6]\n  file: sigma.csv\n"));
  config_error(replace(kMinimal, "set: all", "set: range(0, m+1)"));
  config_error(replace(kMinimal, "rhos: [0.3, 0.6]", "rhos: [0.3, 1.5]"));
}

TEST(Config, Table1PresetSettings) {
  const ExperimentConfig c = load_config(kConfigs / "table1.yaml");
  EXPECT_EQ(c.name, "table1");
  EXPECT_EQ(c.replicates, 50);
  EXPECT_EQ(c.n, 500);
  EXPECT_EQ(c.ld.block_size, 500);
  EXPECT_EQ(c.ld.rhos, (std::vector<double>{0.3, 0.7}));
  EXPECT_EQ(c.genotypes, GenotypeModel::Gaussian);
  ASSERT_EQ(c.effects.size(), 1u);
  EXPECT_EQ(c.effects[0].variance, 0.5);
  ASSERT_EQ(c.sets.size(), 1u);
  const IndexSet half = evaluate_set(c.sets[0].second, 1000);
  EXPECT_EQ(half.size(), 500u);
  EXPECT_EQ(half.back(), 499);
  EXPECT_EQ(c.effects[0].set, c.sets[0].first);
  EXPECT_EQ(c.sigma_e2, 0.5);
  ASSERT_EQ(c.estimators.size(), 2u);
  EXPECT_EQ(estimator_label(c.estimators[0]), "euclidean-mle");
  EXPECT_EQ(estimator_label(c.estimators[1]), "mahalanobis-mle");
}

TEST(Config, EveryPresetRoundTrips) {
  int count = 0;
  for (const auto& entry : std::filesystem::directory_iterator(kConfigs)) {
    if (entry.path().extension() != ".yaml") continue;
    const ExperimentConfig c = load_config(entry.path());
    EXPECT_EQ(parse_config(serialize_config(c)), c) << entry.path();
    EXPECT_NO_THROW(validate_config(with_full_scale(c))) << entry.path();
    ++count;
  }
  EXPECT_GE(count, 13);
}

TEST(Config, FullScaleOverride) {
  const ExperimentConfig c = with_full_scale(load_config(kConfigs / "fig1-high.yaml"));
  EXPECT_EQ(implied_m(c.ld), 10000);
}

TEST(SetExpressions, Language) {
  const std::vector<std::pair<std::string, IndexSet>> named{{"S", evaluate_set("stride(0, m, 4)", 8)}};
  EXPECT_EQ(evaluate_set("range(2, 5)", 10), (IndexSet{2, 3, 4}));
  EXPECT_EQ(evaluate_set("stride(1, m, 3)", 10), (IndexSet{1, 4, 7}));
  EXPECT_EQ(evaluate_set("{m/2 - 1, 0}", 10), (IndexSet{0, 4}));
  EXPECT_EQ(evaluate_set("all", 3), (IndexSet{0, 1, 2}));
  EXPECT_EQ(evaluate_set("complement(S)", 8, named), (IndexSet{1, 2, 3, 5, 6, 7}));
  EXPECT_EQ(evaluate_set("range(0, 2) | range(m - 2, m)", 10), (IndexSet{0, 1, 8, 9}));
  EXPECT_EQ(evaluate_index("3*m/4", 2000), 1500);
  EXPECT_EQ(evaluate_index("(m + 1) / 2", 9), 5);
  EXPECT_THROW(evaluate_set("range(0, m + 1)", 10), Error);
  EXPECT_THROW(evaluate_set("unknown", 10), Error);
  EXPECT_THROW(evaluate_set("range(0, 3", 10), Error);
}
