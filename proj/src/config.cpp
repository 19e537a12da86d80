#include "nag/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "nag/errors.hpp"
#include "nag/rng.hpp"

namespace nag {

namespace {

// Child-stream ids hanging off the master seed, one per seeded section.
constexpr std::uint64_t kSeedData = 11;
constexpr std::uint64_t kSeedNoise = 12;
constexpr std::uint64_t kSeedTrain = 13;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string piece;
  while (std::getline(ss, piece, sep)) out.push_back(trim(piece));
  if (!s.empty() && s.back() == sep) out.push_back("");
  return out;
}

class Typed {
 public:
  explicit Typed(const std::map<std::string, std::string>& values) : values_(values) {}

  long long integer(const std::string& key, long long lo, long long hi) const {
    const std::string& v = values_.at(key);
    long long out = 0;
    try {
      std::size_t used = 0;
      out = std::stoll(v, &used);
      if (used != v.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw ConfigError(key, "expected an integer, got '" + v + "'");
    }
    if (out < lo || out > hi)
      throw ConfigError(key, "value " + v + " outside [" + std::to_string(lo) + ", " +
                                 std::to_string(hi) + "]");
    return out;
  }

  double real(const std::string& key, double lo, double hi) const {
    const std::string& v = values_.at(key);
    double out = 0.0;
    try {
      std::size_t used = 0;
      out = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw ConfigError(key, "expected a number, got '" + v + "'");
    }
    if (out < lo || out > hi) throw ConfigError(key, "value " + v + " out of range");
    return out;
  }

  bool flag(const std::string& key) const {
    const std::string& v = values_.at(key);
    if (v == "0" || v == "false") return false;
    if (v == "1" || v == "true") return true;
    throw ConfigError(key, "expected 0/1/true/false, got '" + v + "'");
  }

  std::uint64_t seed(const std::string& key) const {
    const std::string& v = values_.at(key);
    try {
      std::size_t used = 0;
      const std::uint64_t out = std::stoull(v, &used);
      if (used != v.size()) throw std::invalid_argument("trailing characters");
      return out;
    } catch (const std::exception&) {
      throw ConfigError(key, "expected an unsigned integer, got '" + v + "'");
    }
  }

  const std::string& text(const std::string& key) const { return values_.at(key); }

 private:
  const std::map<std::string, std::string>& values_;
};

}  // namespace

const std::vector<std::pair<std::string, std::string>>& config_registry() {
  static const std::vector<std::pair<std::string, std::string>> registry = {
      {"seed", "0"},
      {"data.classes", "10"},
      {"data.domains", "4"},
      {"data.samples_per_cell", "30"},
      {"data.dim", "16"},
      {"data.class_separation", "4.0"},
      {"data.rotation_step_deg", "15.0"},
      {"data.translation", "0.5"},
      {"data.sigma", "1.5"},
      {"noise.pairs", "0>6,1>7,3>5,4>9,5>3,6>0,7>1,9>4"},
      {"noise.ratio", "0.3"},
      {"train.total_steps", "800"},
      {"train.batch_size", "128"},
      {"train.learning_rate", "0.05"},
      {"train.hidden_dims", "64,32"},
      {"train.embedding_dim", "16"},
      {"train.method", "erm"},
      {"train.elr_beta", "0.7"},
      {"train.elr_lambda", "3.0"},
      {"train.refine_step", "-1"},
      {"train.refine_passes", "1"},
      {"train.refine_on_gap_peak", "0"},
      {"train.swad", "0"},
      {"train.swad_start", "-1"},
      {"train.swad_end", "-1"},
      {"train.gmm_max_iters", "100"},
      {"train.gmm_tol", "1e-6"},
      {"train.split_threshold", "0.5"},
      {"eval.methods", "erm,erm+dl4nd"},
      {"eval.ratios", "0.3"},
      {"eval.seeds", "1,2,3,4,5"},
      {"eval.held_out_domains", ""},
      {"eval.holdout_fraction", "0.2"},
  };
  return registry;
}

namespace {

bool known_key(const std::string& key) {
  for (const auto& [k, v] : config_registry())
    if (k == key) return true;
  return false;
}

}  // namespace

std::map<std::string, std::string> parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config: " + path);
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ParseError("config line " + std::to_string(lineno) + ": empty key");
    if (!known_key(key)) throw ConfigError(key, "unknown key");
    out[key] = value;
  }
  return out;
}

std::vector<std::pair<int, int>> parse_noise_pairs(const std::string& text) {
  std::vector<std::pair<int, int>> pairs;
  if (trim(text).empty()) return pairs;
  for (const std::string& piece : split(text, ',')) {
    const auto gt = piece.find('>');
    if (gt == std::string::npos)
      throw ConfigError("noise.pairs", "expected 'a>b' entries, got '" + piece + "'");
    try {
      const int a = std::stoi(trim(piece.substr(0, gt)));
      const int b = std::stoi(trim(piece.substr(gt + 1)));
      pairs.emplace_back(a, b);
    } catch (const std::exception&) {
      throw ConfigError("noise.pairs", "malformed pair '" + piece + "'");
    }
  }
  return pairs;
}

Config resolve_config(const std::map<std::string, std::string>& file_values,
                      const std::vector<std::pair<std::string, std::string>>& overrides,
                      std::optional<std::uint64_t> seed_override) {
  std::map<std::string, std::string> merged;
  for (const auto& [k, v] : config_registry()) merged[k] = v;
  for (const auto& [k, v] : file_values) {
    if (!known_key(k)) throw ConfigError(k, "unknown key");
    merged[k] = v;
  }
  for (const auto& [k, v] : overrides) {
    if (!known_key(k)) throw ConfigError(k, "unknown key");
    merged[k] = v;
  }
  if (seed_override) merged["seed"] = std::to_string(*seed_override);

  const Typed t(merged);
  Config cfg;
  cfg.resolved = merged;
  cfg.master_seed = t.seed("seed");

  cfg.domain.num_classes = static_cast<int>(t.integer("data.classes", 2, 1000));
  cfg.domain.num_domains = static_cast<int>(t.integer("data.domains", 1, 1000));
  cfg.domain.samples_per_cell = static_cast<int>(t.integer("data.samples_per_cell", 1, 1000000));
  cfg.domain.feature_dim = static_cast<int>(t.integer("data.dim", 2, 100000));
  cfg.domain.class_separation = t.real("data.class_separation", 0.0, 1e9);
  cfg.domain.rotation_step_deg = t.real("data.rotation_step_deg", -360.0, 360.0);
  cfg.domain.translation = t.real("data.translation", 0.0, 1e9);
  cfg.domain.cluster_noise_sigma = t.real("data.sigma", 0.0, 1e9);
  cfg.domain.seed = child_seed(cfg.master_seed, kSeedData);

  cfg.noise.pairs = parse_noise_pairs(t.text("noise.pairs"));
  for (const auto& [a, b] : cfg.noise.pairs) {
    if (a < 0 || b < 0 || a >= cfg.domain.num_classes || b >= cfg.domain.num_classes)
      throw ConfigError("noise.pairs", "class index out of range in pair " + std::to_string(a) +
                                           ">" + std::to_string(b));
    if (a == b) throw ConfigError("noise.pairs", "pair flips a class to itself");
  }
  {
    std::vector<int> sources;
    for (const auto& [a, b] : cfg.noise.pairs) sources.push_back(a);
    std::sort(sources.begin(), sources.end());
    if (std::adjacent_find(sources.begin(), sources.end()) != sources.end())
      throw ConfigError("noise.pairs", "duplicate source class");
  }
  cfg.noise.ratio = t.real("noise.ratio", 0.0, 1.0);
  if (cfg.noise.ratio >= 1.0) throw ConfigError("noise.ratio", "must be < 1");
  cfg.noise.seed = child_seed(cfg.master_seed, kSeedNoise);

  cfg.train.total_steps = static_cast<int>(t.integer("train.total_steps", 0, 100000000));
  cfg.train.batch_size = static_cast<int>(t.integer("train.batch_size", 1, 100000000));
  cfg.train.learning_rate = t.real("train.learning_rate", 1e-12, 1e6);
  {
    cfg.train.hidden_dims.clear();
    const std::string dims = t.text("train.hidden_dims");
    if (!trim(dims).empty()) {
      for (const std::string& piece : split(dims, ',')) {
        try {
          const int d = std::stoi(piece);
          if (d <= 0) throw std::invalid_argument("non-positive");
          cfg.train.hidden_dims.push_back(d);
        } catch (const std::exception&) {
          throw ConfigError("train.hidden_dims", "expected positive integers, got '" + piece + "'");
        }
      }
    }
  }
  cfg.train.embedding_dim = static_cast<int>(t.integer("train.embedding_dim", 1, 100000));
  {
    TrainConfig parsed;
    try {
      parsed = apply_method(cfg.train, t.text("train.method"));
    } catch (const ConfigError&) {
      throw ConfigError("train.method",
                        "must be erm[+elr][+dl4nd], got '" + t.text("train.method") + "'");
    }
    cfg.train.use_elr = parsed.use_elr;
    cfg.train.use_dl4nd = parsed.use_dl4nd;
  }
  cfg.train.elr_beta = t.real("train.elr_beta", 0.0, 1.0);
  if (cfg.train.elr_beta >= 1.0) throw ConfigError("train.elr_beta", "must be < 1");
  cfg.train.elr_lambda = t.real("train.elr_lambda", 0.0, 1e9);
  cfg.train.refine_step = static_cast<int>(t.integer("train.refine_step", -1, 100000000));
  if (cfg.train.refine_step >= 0 &&
      (cfg.train.refine_step == 0 || cfg.train.refine_step >= cfg.train.total_steps))
    throw ConfigError("train.refine_step", "must satisfy 0 < refine_step < train.total_steps");
  cfg.train.refine_passes = static_cast<int>(t.integer("train.refine_passes", 1, 100));
  cfg.train.refine_on_gap_peak = t.flag("train.refine_on_gap_peak");
  cfg.train.swad_enabled = t.flag("train.swad");
  cfg.train.swad_start = static_cast<int>(t.integer("train.swad_start", -1, 100000000));
  cfg.train.swad_end = static_cast<int>(t.integer("train.swad_end", -1, 100000000));
  if (cfg.train.swad_start >= 0 && cfg.train.swad_end >= 0) {
    if (cfg.train.swad_start > cfg.train.swad_end || cfg.train.swad_end > cfg.train.total_steps)
      throw ConfigError("train.swad_start", "window must satisfy start <= end <= total_steps");
  }
  cfg.train.gmm.max_iters = static_cast<int>(t.integer("train.gmm_max_iters", 1, 1000000));
  cfg.train.gmm.tol = t.real("train.gmm_tol", 0.0, 1.0);
  cfg.train.split_threshold = t.real("train.split_threshold", 0.0, 1.0);
  cfg.train.seed = child_seed(cfg.master_seed, kSeedTrain);

  cfg.eval_methods.clear();
  for (const std::string& m : split(t.text("eval.methods"), ',')) {
    if (m.empty()) throw ConfigError("eval.methods", "empty method entry");
    apply_method(cfg.train, m);  // validates
    cfg.eval_methods.push_back(m);
  }
  cfg.eval_ratios.clear();
  for (const std::string& piece : split(t.text("eval.ratios"), ',')) {
    try {
      const double r = std::stod(piece);
      if (r < 0.0 || r >= 0.5) throw std::invalid_argument("range");
      cfg.eval_ratios.push_back(r);
    } catch (const std::exception&) {
      throw ConfigError("eval.ratios", "ratios must be numbers in [0, 0.5), got '" + piece + "'");
    }
  }
  if (cfg.eval_ratios.empty()) throw ConfigError("eval.ratios", "need at least one ratio");
  cfg.eval_seeds.clear();
  for (const std::string& piece : split(t.text("eval.seeds"), ',')) {
    try {
      cfg.eval_seeds.push_back(std::stoull(piece));
    } catch (const std::exception&) {
      throw ConfigError("eval.seeds", "expected unsigned integers, got '" + piece + "'");
    }
  }
  if (cfg.eval_seeds.empty()) throw ConfigError("eval.seeds", "need at least one seed");
  cfg.eval_held_out_domains.clear();
  if (!trim(t.text("eval.held_out_domains")).empty()) {
    for (const std::string& piece : split(t.text("eval.held_out_domains"), ',')) {
      try {
        const int d = std::stoi(piece);
        if (d < 0 || d >= cfg.domain.num_domains) throw std::invalid_argument("range");
        cfg.eval_held_out_domains.push_back(d);
      } catch (const std::exception&) {
        throw ConfigError("eval.held_out_domains",
                          "expected domain indices below data.domains, got '" + piece + "'");
      }
    }
  }
  cfg.eval_holdout_fraction = t.real("eval.holdout_fraction", 0.0, 1.0);
  if (cfg.eval_holdout_fraction <= 0.0 || cfg.eval_holdout_fraction >= 1.0)
    throw ConfigError("eval.holdout_fraction", "must lie strictly between 0 and 1");
  return cfg;
}

ExperimentSpec make_experiment(const Config& cfg) {
  ExperimentSpec spec;
  spec.domain = cfg.domain;
  spec.noise_pairs = cfg.noise.pairs;
  spec.noise_ratios = cfg.eval_ratios;
  spec.train = cfg.train;
  spec.methods = cfg.eval_methods;
  spec.held_out_domains = cfg.eval_held_out_domains;
  spec.seeds = cfg.eval_seeds;
  spec.id_holdout_fraction = cfg.eval_holdout_fraction;
  spec.config_echo = cfg.resolved;
  return spec;
}

}  // namespace nag
