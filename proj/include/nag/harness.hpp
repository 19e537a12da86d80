#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "nag/datagen.hpp"
#include "nag/dataset.hpp"
#include "nag/gmm.hpp"
#include "nag/trainer.hpp"

namespace nag {

// Leave-one-domain-out experiment. Every method in `methods` runs on the
// same generated datasets, splits, and initial parameters per (seed, ratio,
// fold), so method deltas are paired.
struct ExperimentSpec {
  DomainSpec domain;
  std::vector<std::pair<int, int>> noise_pairs = default_noise_pairs();
  std::vector<double> noise_ratios = {0.3};
  TrainConfig train;
  std::vector<std::string> methods = {"erm"};  // erm[+elr][+dl4nd]
  std::vector<int> held_out_domains;           // empty: every domain in turn
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  double id_holdout_fraction = 0.2;
  std::map<std::string, std::string> config_echo;  // copied into the report
};

struct BalanceTable {
  int num_classes = 0;
  int num_domains = 0;
  std::vector<std::vector<double>> proportions;  // [class][domain]
  double uniform_baseline = 0.0;                 // 1 / #domains present
  double l1_gap = 0.0;  // mean over classes of sum_d |p - baseline|

  bool operator==(const BalanceTable&) const = default;
};

struct FoldResult {
  std::string method;
  double noise_ratio = 0.0;
  std::uint64_t seed = 0;
  int held_out_domain = 0;
  double id_accuracy = 0.0;
  double ood_accuracy = 0.0;
  double label_accuracy_before = -1.0;  // -1: unavailable
  double label_accuracy_after = -1.0;
  std::int64_t num_relabeled = -1;  // -1: method does not relabel
  std::int64_t num_abstained = -1;
  bool gmm_fallback = false;
  std::optional<GmmParams> gmm;
  double separability = -1.0;
  BalanceTable low_loss_balance;  // empty for methods without a split
  std::uint64_t dataset_checksum = 0;

  bool operator==(const FoldResult&) const = default;
};

struct Aggregate {
  std::string method;
  double noise_ratio = 0.0;
  int num_seeds = 0;
  int num_folds = 0;  // per seed
  double id_mean = 0.0, id_std_over_seeds = 0.0, id_std_over_folds = 0.0;
  double ood_mean = 0.0, ood_std_over_seeds = 0.0, ood_std_over_folds = 0.0;
  double label_before_mean = -1.0;
  double label_after_mean = -1.0;
  double separability_mean = -1.0;

  bool operator==(const Aggregate&) const = default;
};

struct Report {
  std::string version = "nagreport v1";
  std::map<std::string, std::string> config;
  std::vector<FoldResult> folds;       // fixed order: ratio, seed, fold, method
  std::vector<Aggregate> aggregates;   // same order, collapsed

  bool operator==(const Report&) const = default;
};

struct FoldData {
  Dataset train;
  Dataset id_test;   // held-out fraction of each training domain, true labels
  Dataset ood_test;  // the held-out domain, true labels
};

// Selection depends only on (selection_seed, held_out_domain), never on the
// noise ratio or method, so folds stay paired across both.
FoldData make_fold(const Dataset& noisy, int held_out_domain, double id_fraction,
                   std::uint64_t selection_seed);

TrainConfig apply_method(const TrainConfig& base, const std::string& method);

BalanceTable domain_balance(const std::set<SampleId>& ids, const Dataset& ds);

std::vector<Aggregate> compute_aggregates(const std::vector<FoldResult>& folds);

Report leave_one_out(const ExperimentSpec& spec);
Report noise_sweep(const ExperimentSpec& spec);

}  // namespace nag
