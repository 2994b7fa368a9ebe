#include "h2k/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/core.h>
#include <yaml-cpp/yaml.h>

namespace h2k {

// ---------------------------------------------------------------------------
// Expression language

namespace {

class SetParser {
 public:
  SetParser(const std::string& text, Index m, const std::vector<std::pair<std::string, IndexSet>>& named)
      : text_(text), m_(m), named_(named) {}

  IndexSet parse_set() {
    IndexSet s = set_union();
    skip_space();
    if (pos_ != text_.size()) fail("unexpected trailing text");
    return s;
  }

  Index parse_index() {
    const Index v = expr();
    skip_space();
    if (pos_ != text_.size()) fail("unexpected trailing text");
    return v;
  }

 private:
  [[noreturn]] void fail(const std::string& why) const {
    throw Error(ErrorKind::Config, fmt::format("in expression '{}' at column {}: {}", text_, pos_ + 1, why));
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) fail(fmt::format("expected '{}'", c));
  }

  std::string identifier() {
    skip_space();
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_' || text_[pos_] == '-')) {
      ++pos_;
    }
    return text_.substr(start, pos_ - start);
  }

  IndexSet set_union() {
    IndexSet s = set_term();
    while (accept('|')) {
      const IndexSet t = set_term();
      IndexSet merged;
      std::set_union(s.begin(), s.end(), t.begin(), t.end(), std::back_inserter(merged));
      s = std::move(merged);
    }
    return s;
  }

  IndexSet set_term() {
    if (accept('{')) {
      IndexSet s;
      if (!accept('}')) {
        do {
          s.push_back(checked(expr()));
        } while (accept(','));
        expect('}');
      }
      std::sort(s.begin(), s.end());
      if (std::adjacent_find(s.begin(), s.end()) != s.end()) fail("duplicate index");
      return s;
    }
    const std::size_t start = pos_;
    const std::string word = identifier();
    if (word.empty()) fail("expected a set");
    if (word == "all") return range(0, m_);
    if (word == "range" || word == "stride") {
      expect('(');
      const Index a = expr();
      expect(',');
      const Index b = expr();
      Index step = 1;
      if (word == "stride") {
        expect(',');
        step = expr();
        if (step < 1) fail("stride must be positive");
      }
      expect(')');
      if (a < 0 || b > m_ || a > b) fail(fmt::format("range [{}, {}) is not within [0, {})", a, b, m_));
      IndexSet s;
      for (Index j = a; j < b; j += step) s.push_back(j);
      return s;
    }
    if (word == "complement") {
      expect('(');
      const IndexSet inner = set_union();
      expect(')');
      return complement(inner, m_);
    }
    for (const auto& [name, s] : named_)
      if (name == word) return s;
    pos_ = start;
    fail(fmt::format("unknown set '{}'", word));
  }

  IndexSet range(Index a, Index b) const {
    IndexSet s;
    for (Index j = a; j < b; ++j) s.push_back(j);
    return s;
  }

  Index checked(Index j) const {
    if (j < 0 || j >= m_) throw Error(ErrorKind::Config, fmt::format("in expression '{}': index {} is outside [0, {})", text_, j, m_));
    return j;
  }

  Index expr() {
    Index v = term();
    while (true) {
      if (accept('+')) {
        v += term();
      } else if (accept('-')) {
        v -= term();
      } else {
        return v;
      }
    }
  }

  Index term() {
    Index v = factor();
    while (true) {
      if (accept('*')) {
        v *= factor();
      } else if (accept('/')) {
        const Index d = factor();
        if (d == 0) fail("division by zero");
        // Floor division.
        Index q = v / d;
        if ((v % d != 0) && ((v < 0) != (d < 0))) --q;
        v = q;
      } else {
        return v;
      }
    }
  }

  Index factor() {
    skip_space();
    if (accept('(')) {
      const Index v = expr();
      expect(')');
      return v;
    }
    if (accept('-')) return -factor();
    if (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
      Index v = 0;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        v = 10 * v + (text_[pos_] - '0');
        ++pos_;
      }
      return v;
    }
    const std::string word = identifier();
    if (word == "m") return m_;
    fail(word.empty() ? "expected a number" : fmt::format("unknown symbol '{}'", word));
  }

  const std::string& text_;
  Index m_;
  const std::vector<std::pair<std::string, IndexSet>>& named_;
  std::size_t pos_ = 0;
};

}  // namespace

IndexSet evaluate_set(const std::string& expr, Index m, const std::vector<std::pair<std::string, IndexSet>>& named) {
  return SetParser(expr, m, named).parse_set();
}

Index evaluate_index(const std::string& expr, Index m) { return SetParser(expr, m, {}).parse_index(); }

// ---------------------------------------------------------------------------
// Names

const char* to_string(EstimatorMethod method) {
  switch (method) {
    case EstimatorMethod::EuclideanMle: return "euclidean-mle";
    case EstimatorMethod::MahalanobisMle: return "mahalanobis-mle";
    case EstimatorMethod::EuclideanHe: return "euclidean-he";
    case EstimatorMethod::MahalanobisHe: return "mahalanobis-he";
    case EstimatorMethod::CMle: return "c-mle";
    case EstimatorMethod::TwoComponent: return "two-component";
  }
  return "?";
}

const char* to_string(GenotypeModel model) { return model == GenotypeModel::Gaussian ? "gaussian" : "copula"; }

std::string estimator_label(const EstimatorSpec& spec) {
  if (!spec.label.empty()) return spec.label;
  std::string label = to_string(spec.method);
  if (spec.method == EstimatorMethod::TwoComponent && spec.reml) label = "two-component-reml";
  if (!spec.set.empty()) label += "[" + spec.set + "]";
  return label;
}

std::optional<Index> implied_m(const LdConfig& ld) {
  if (!ld.rhos.empty()) return ld.block_size * static_cast<Index>(ld.rhos.size());
  if (!ld.pattern.empty()) return ld.block_size * ld.blocks;
  return std::nullopt;
}

bool ExperimentConfig::operator==(const ExperimentConfig& o) const {
  return name == o.name && description == o.description && seed == o.seed && replicates == o.replicates &&
         n == o.n && ld == o.ld && genotypes == o.genotypes && mafs == o.mafs &&
         standardize_with == o.standardize_with && sets == o.sets && regime == o.regime && effects == o.effects &&
         sigma_e2 == o.sigma_e2 && estimators == o.estimators && full_scale == o.full_scale;
}

// ---------------------------------------------------------------------------
// YAML parsing

namespace {

class Reader {
 public:
  explicit Reader(std::string origin) : origin_(std::move(origin)) {}

  [[noreturn]] void fail(const YAML::Node& at, const std::string& why) const {
    const YAML::Mark mark = at.Mark();
    if (mark.is_null()) throw Error(ErrorKind::Config, fmt::format("{}: {}", origin_, why));
    throw Error(ErrorKind::Config, fmt::format("{}:{}:{}: {}", origin_, mark.line + 1, mark.column + 1, why));
  }

  void require_map(const YAML::Node& node, const std::string& what) const {
    if (!node.IsMap()) fail(node, fmt::format("'{}' must be a mapping", what));
  }

  void allow_keys(const YAML::Node& node, std::initializer_list<const char*> keys, const std::string& what) const {
    const std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& kv : node) {
      const std::string key = kv.first.as<std::string>();
      if (!allowed.count(key)) fail(kv.first, fmt::format("unknown key '{}' in {}", key, what));
    }
  }

  YAML::Node required(const YAML::Node& map, const char* key, const std::string& what) const {
    const YAML::Node v = map[key];
    if (!v) fail(map, fmt::format("missing required field '{}' in {}", key, what));
    return v;
  }

  template <class T>
  T as(const YAML::Node& node, const char* key) const {
    try {
      return node.as<T>();
    } catch (const YAML::Exception&) {
      fail(node, fmt::format("field '{}' has the wrong type", key));
    }
  }

  template <class T>
  T get(const YAML::Node& map, const char* key, const std::string& what) const {
    return as<T>(required(map, key, what), key);
  }

  template <class T>
  T get_or(const YAML::Node& map, const char* key, T fallback) const {
    const YAML::Node v = map[key];
    return v ? as<T>(v, key) : fallback;
  }

  template <class E>
  E choice(const YAML::Node& node, const char* key, std::initializer_list<std::pair<const char*, E>> options) const {
    const std::string value = as<std::string>(node, key);
    std::string names;
    for (const auto& [name, e] : options) {
      if (value == name) return e;
      names += names.empty() ? name : std::string(", ") + name;
    }
    fail(node, fmt::format("field '{}' must be one of {}; got '{}'", key, names, value));
  }

  LdConfig ld(const YAML::Node& node) const {
    require_map(node, "ld");
    allow_keys(node, {"block_size", "rhos", "blocks", "pattern", "file"}, "ld");
    LdConfig ld;
    ld.block_size = get_or<Index>(node, "block_size", 0);
    ld.rhos = get_or<std::vector<double>>(node, "rhos", {});
    ld.blocks = get_or<Index>(node, "blocks", 0);
    ld.pattern = get_or<std::vector<double>>(node, "pattern", {});
    ld.file = get_or<std::string>(node, "file", "");
    const int kinds = !ld.rhos.empty() + !ld.pattern.empty() + !ld.file.empty();
    if (kinds != 1) fail(node, "ld needs exactly one of 'rhos', 'pattern' (with 'blocks') or 'file'");
    if (ld.file.empty() && ld.block_size < 1) fail(node, "ld 'block_size' must be a positive integer");
    if (!ld.pattern.empty() && ld.blocks < 1) fail(node, "ld 'pattern' needs a positive 'blocks'");
    if (!ld.file.empty() && (ld.block_size || ld.blocks)) fail(node, "ld 'file' takes no block fields");
    return ld;
  }

 private:
  std::string origin_;
};

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& origin) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw Error(ErrorKind::Config,
                fmt::format("{}:{}:{}: {}", origin, e.mark.line + 1, e.mark.column + 1, e.msg));
  }
  const Reader r(origin);
  if (!root.IsMap()) r.fail(root, "top level must be a mapping");
  r.allow_keys(root,
               {"name", "description", "seed", "replicates", "n", "ld", "genotypes", "mafs", "standardize_with",
                "sets", "effects", "sigma_e2", "estimators", "full_scale"},
               "experiment");
  const std::string top = "experiment";

  ExperimentConfig c;
  c.name = r.get<std::string>(root, "name", top);
  c.description = r.get_or<std::string>(root, "description", "");
  c.seed = r.get<std::uint64_t>(root, "seed", top);
  c.replicates = r.get<int>(root, "replicates", top);
  if (c.replicates < 1) r.fail(root["replicates"], "'replicates' must be at least 1");
  c.n = r.get<Index>(root, "n", top);
  if (c.n < 2) r.fail(root["n"], "'n' must be at least 2");
  c.ld = r.ld(r.required(root, "ld", top));
  c.genotypes = r.choice<GenotypeModel>(r.required(root, "genotypes", top), "genotypes",
                                        {{"gaussian", GenotypeModel::Gaussian}, {"copula", GenotypeModel::Copula}});
  if (const YAML::Node m = root["mafs"]) {
    r.require_map(m, "mafs");
    r.allow_keys(m, {"source", "min_maf", "max_adjacent_diff", "file"}, "mafs");
    c.mafs.source = r.choice<MafSource>(r.required(m, "source", "mafs"), "source",
                                        {{"sampled", MafSource::Sampled}, {"file", MafSource::File}});
    c.mafs.min_maf = r.get_or<double>(m, "min_maf", 0.05);
    c.mafs.max_adjacent_diff = r.get_or<double>(m, "max_adjacent_diff", 0.05);
    c.mafs.file = r.get_or<std::string>(m, "file", "");
    if ((c.mafs.source == MafSource::File) != !c.mafs.file.empty()) {
      r.fail(m, "mafs 'file' is required for source 'file' and not allowed otherwise");
    }
  }
  if (const YAML::Node s = root["standardize_with"]) {
    c.standardize_with = r.choice<StandardizeWith>(
        s, "standardize_with", {{"population", StandardizeWith::Population}, {"sample", StandardizeWith::Sample}});
  }
  if (const YAML::Node sets = root["sets"]) {
    r.require_map(sets, "sets");
    for (const auto& kv : sets) {
      const std::string name = kv.first.as<std::string>();
      if (name == "all" || name == "range" || name == "stride" || name == "complement" || name == "m") {
        r.fail(kv.first, fmt::format("'{}' is reserved and cannot name a set", name));
      }
      for (const auto& [existing, expr] : c.sets)
        if (existing == name) r.fail(kv.first, fmt::format("set '{}' is defined twice", name));
      c.sets.emplace_back(name, r.as<std::string>(kv.second, name.c_str()));
    }
  }

  const YAML::Node effects = r.required(root, "effects", top);
  r.require_map(effects, "effects");
  r.allow_keys(effects, {"regime", "groups"}, "effects");
  if (const YAML::Node regime = effects["regime"]) {
    c.regime = r.choice<EffectRegime>(regime, "regime",
                                      {{"redrawn", EffectRegime::Redrawn}, {"fixed", EffectRegime::Fixed}});
  }
  const YAML::Node groups = r.required(effects, "groups", "effects");
  if (!groups.IsSequence()) r.fail(groups, "'groups' must be a list");
  for (const auto& g : groups) {
    r.require_map(g, "effect group");
    r.allow_keys(g, {"set", "sample", "variance", "rule"}, "effect group");
    EffectGroup group;
    group.set = r.get<std::string>(g, "set", "effect group");
    if (const YAML::Node s = g["sample"]) group.sample = r.as<Index>(s, "sample");
    group.variance = r.get<double>(g, "variance", "effect group");
    if (!(group.variance >= 0.0)) r.fail(g["variance"], "'variance' must be non-negative");
    if (const YAML::Node rule = g["rule"]) {
      group.rule = r.choice<CausalConfig::VarianceRule>(
          rule, "rule",
          {{"equal", CausalConfig::VarianceRule::Equal}, {"maf_weighted", CausalConfig::VarianceRule::MafWeighted}});
    }
    c.effects.push_back(std::move(group));
  }
  c.sigma_e2 = r.get<double>(root, "sigma_e2", top);
  if (!(c.sigma_e2 >= 0.0)) r.fail(root["sigma_e2"], "'sigma_e2' must be non-negative");

  const YAML::Node estimators = r.required(root, "estimators", top);
  if (!estimators.IsSequence() || estimators.size() == 0) r.fail(estimators, "'estimators' must be a non-empty list");
  for (const auto& e : estimators) {
    EstimatorSpec spec;
    const std::initializer_list<std::pair<const char*, EstimatorMethod>> methods{
        {"euclidean-mle", EstimatorMethod::EuclideanMle}, {"mahalanobis-mle", EstimatorMethod::MahalanobisMle},
        {"euclidean-he", EstimatorMethod::EuclideanHe},   {"mahalanobis-he", EstimatorMethod::MahalanobisHe},
        {"c-mle", EstimatorMethod::CMle},                 {"two-component", EstimatorMethod::TwoComponent}};
    if (e.IsScalar()) {
      spec.method = r.choice<EstimatorMethod>(e, "estimator", methods);
    } else {
      r.require_map(e, "estimator");
      r.allow_keys(e, {"method", "set", "reml", "label"}, "estimator");
      spec.method = r.choice<EstimatorMethod>(r.required(e, "method", "estimator"), "method", methods);
      spec.set = r.get_or<std::string>(e, "set", "");
      spec.reml = r.get_or<bool>(e, "reml", false);
      spec.label = r.get_or<std::string>(e, "label", "");
    }
    if (spec.method == EstimatorMethod::TwoComponent && spec.set.empty()) {
      r.fail(e, "two-component estimator needs a 'set'");
    }
    if (!spec.set.empty() && spec.method != EstimatorMethod::TwoComponent && spec.method != EstimatorMethod::CMle) {
      r.fail(e, fmt::format("estimator '{}' does not take a set", to_string(spec.method)));
    }
    if (spec.reml && spec.method != EstimatorMethod::TwoComponent) r.fail(e, "'reml' applies to two-component only");
    c.estimators.push_back(std::move(spec));
  }

  if (const YAML::Node f = root["full_scale"]) {
    r.require_map(f, "full_scale");
    r.allow_keys(f, {"n", "ld"}, "full_scale");
    ScaleOverride o;
    if (const YAML::Node n = f["n"]) o.n = r.as<Index>(n, "n");
    if (const YAML::Node ld = f["ld"]) o.ld = r.ld(ld);
    c.full_scale = std::move(o);
  }

  try {
    validate_config(c);
  } catch (const Error& e) {
    throw Error(ErrorKind::Config, fmt::format("{}: {}", origin, e.what()));
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Config, fmt::format("cannot open config {}", path.string()));
  std::stringstream buffer;
  buffer << in.rdbuf();
  ExperimentConfig c = parse_config(buffer.str(), path.string());
  c.base_dir = path.parent_path();
  return c;
}

void validate_config(const ExperimentConfig& c) {
  if (c.replicates < 1) throw Error(ErrorKind::Config, "replicates must be at least 1");
  if (c.estimators.empty()) throw Error(ErrorKind::Config, "estimator list is empty");
  if (c.effects.empty()) throw Error(ErrorKind::Config, "at least one effect group is required");
  for (const std::vector<double>* rhos : {&c.ld.rhos, &c.ld.pattern}) {
    for (const double rho : *rhos) {
      if (!(std::abs(rho) < 1.0)) {
        throw Error(ErrorKind::Config, fmt::format("LD correlation {} is not in (-1, 1)", rho));
      }
    }
  }
  std::set<std::string> labels;
  for (const auto& e : c.estimators) {
    if (!labels.insert(estimator_label(e)).second) {
      throw Error(ErrorKind::Config, fmt::format("estimator label '{}' is used twice", estimator_label(e)));
    }
  }
  // With the SNP count known, every expression can be checked now.
  const std::optional<Index> m = implied_m(c.ld);
  if (!m) return;
  std::vector<std::pair<std::string, IndexSet>> named;
  for (const auto& [name, expr] : c.sets) named.emplace_back(name, evaluate_set(expr, *m, named));
  for (const auto& g : c.effects) {
    const IndexSet s = evaluate_set(g.set, *m, named);
    if (g.sample && (*g.sample < 0 || *g.sample > static_cast<Index>(s.size()))) {
      throw Error(ErrorKind::Config,
                  fmt::format("effect group samples {} loci from a set of {}", *g.sample, s.size()));
    }
  }
  for (const auto& e : c.estimators) {
    if (e.set.empty()) continue;
    const IndexSet s = evaluate_set(e.set, *m, named);
    if (s.empty()) throw Error(ErrorKind::Config, fmt::format("estimator set '{}' is empty", e.set));
    if (e.method == EstimatorMethod::TwoComponent && static_cast<Index>(s.size()) == *m) {
      throw Error(ErrorKind::Config, "two-component set must be a proper subset");
    }
  }
}

ExperimentConfig with_full_scale(const ExperimentConfig& config) {
  ExperimentConfig c = config;
  if (config.full_scale) {
    if (config.full_scale->n) c.n = *config.full_scale->n;
    if (config.full_scale->ld) c.ld = *config.full_scale->ld;
  }
  c.full_scale.reset();
  validate_config(c);
  return c;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

// Shortest text that reads back to the same double.
std::string num(double x) { return fmt::format("{}", x); }

std::vector<std::string> nums(const std::vector<double>& xs) {
  std::vector<std::string> out;
  for (const double x : xs) out.push_back(num(x));
  return out;
}

void emit_ld(YAML::Emitter& out, const LdConfig& ld) {
  out << YAML::BeginMap;
  if (!ld.file.empty()) {
    out << YAML::Key << "file" << YAML::Value << ld.file;
  } else {
    out << YAML::Key << "block_size" << YAML::Value << ld.block_size;
    if (!ld.rhos.empty()) {
      out << YAML::Key << "rhos" << YAML::Value << YAML::Flow << nums(ld.rhos);
    } else {
      out << YAML::Key << "blocks" << YAML::Value << ld.blocks;
      out << YAML::Key << "pattern" << YAML::Value << YAML::Flow << nums(ld.pattern);
    }
  }
  out << YAML::EndMap;
}

}  // namespace

std::string serialize_config(const ExperimentConfig& c) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "name" << YAML::Value << c.name;
  if (!c.description.empty()) out << YAML::Key << "description" << YAML::Value << c.description;
  out << YAML::Key << "seed" << YAML::Value << c.seed;
  out << YAML::Key << "replicates" << YAML::Value << c.replicates;
  out << YAML::Key << "n" << YAML::Value << c.n;
  out << YAML::Key << "ld" << YAML::Value;
  emit_ld(out, c.ld);
  out << YAML::Key << "genotypes" << YAML::Value << to_string(c.genotypes);
  out << YAML::Key << "mafs" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "source" << YAML::Value << (c.mafs.source == MafSource::File ? "file" : "sampled");
  out << YAML::Key << "min_maf" << YAML::Value << num(c.mafs.min_maf);
  out << YAML::Key << "max_adjacent_diff" << YAML::Value << num(c.mafs.max_adjacent_diff);
  if (!c.mafs.file.empty()) out << YAML::Key << "file" << YAML::Value << c.mafs.file;
  out << YAML::EndMap;
  out << YAML::Key << "standardize_with" << YAML::Value
      << (c.standardize_with == StandardizeWith::Sample ? "sample" : "population");
  if (!c.sets.empty()) {
    out << YAML::Key << "sets" << YAML::Value << YAML::BeginMap;
    for (const auto& [name, expr] : c.sets) out << YAML::Key << name << YAML::Value << YAML::DoubleQuoted << expr;
    out << YAML::EndMap;
  }
  out << YAML::Key << "effects" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "regime" << YAML::Value << (c.regime == EffectRegime::Fixed ? "fixed" : "redrawn");
  out << YAML::Key << "groups" << YAML::Value << YAML::BeginSeq;
  for (const auto& g : c.effects) {
    out << YAML::BeginMap;
    out << YAML::Key << "set" << YAML::Value << YAML::DoubleQuoted << g.set;
    if (g.sample) out << YAML::Key << "sample" << YAML::Value << *g.sample;
    out << YAML::Key << "variance" << YAML::Value << num(g.variance);
    out << YAML::Key << "rule" << YAML::Value
        << (g.rule == CausalConfig::VarianceRule::MafWeighted ? "maf_weighted" : "equal");
    out << YAML::EndMap;
  }
  out << YAML::EndSeq << YAML::EndMap;
  out << YAML::Key << "sigma_e2" << YAML::Value << num(c.sigma_e2);
  out << YAML::Key << "estimators" << YAML::Value << YAML::BeginSeq;
  for (const auto& e : c.estimators) {
    out << YAML::BeginMap;
    out << YAML::Key << "method" << YAML::Value << to_string(e.method);
    if (!e.set.empty()) out << YAML::Key << "set" << YAML::Value << YAML::DoubleQuoted << e.set;
    if (e.reml) out << YAML::Key << "reml" << YAML::Value << true;
    if (!e.label.empty()) out << YAML::Key << "label" << YAML::Value << e.label;
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;
  if (c.full_scale) {
    out << YAML::Key << "full_scale" << YAML::Value << YAML::BeginMap;
    if (c.full_scale->n) out << YAML::Key << "n" << YAML::Value << *c.full_scale->n;
    if (c.full_scale->ld) {
      out << YAML::Key << "ld" << YAML::Value;
      emit_ld(out, *c.full_scale->ld);
    }
    out << YAML::EndMap;
  }
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace h2k
