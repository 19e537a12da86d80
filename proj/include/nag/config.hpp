#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nag/datagen.hpp"
#include "nag/harness.hpp"
#include "nag/trainer.hpp"

namespace nag {

// Flat key-value configuration shared by every command. Keys live in a fixed
// registry with defaults; unknown keys are rejected up front. Precedence:
// defaults < config file < --set overrides < --seed.
struct Config {
  DomainSpec domain;
  NoiseSpec noise;
  TrainConfig train;

  std::vector<std::string> eval_methods;
  std::vector<double> eval_ratios;
  std::vector<std::uint64_t> eval_seeds;
  std::vector<int> eval_held_out_domains;
  double eval_holdout_fraction = 0.2;

  std::uint64_t master_seed = 0;
  std::map<std::string, std::string> resolved;  // every key, post-merge
};

// Registry of known keys with their default values, in emission order.
const std::vector<std::pair<std::string, std::string>>& config_registry();

// Parses "key = value" lines ('#' comments, blank lines allowed). Unknown
// keys raise ConfigError; malformed lines raise ParseError with the line
// number.
std::map<std::string, std::string> parse_config_file(const std::string& path);

Config resolve_config(const std::map<std::string, std::string>& file_values,
                      const std::vector<std::pair<std::string, std::string>>& overrides,
                      std::optional<std::uint64_t> seed_override);

ExperimentSpec make_experiment(const Config& cfg);

// "0>6,1>7" -> {(0,6),(1,7)}; validation against num_classes happens in
// resolve_config.
std::vector<std::pair<int, int>> parse_noise_pairs(const std::string& text);

}  // namespace nag
