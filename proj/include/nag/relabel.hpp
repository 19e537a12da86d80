#pragma once

#include <map>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "nag/dataset.hpp"
#include "nag/gmm.hpp"
#include "nag/numerics.hpp"

namespace nag {

struct Proxy {
  FeatureVector mean;
  int count = 0;
};

// Per-(class, domain) mean embedding of low-loss samples. Cells with no
// low-loss member stay empty rather than zero-filled.
struct ProxyTable {
  int num_classes = 0;
  int num_domains = 0;
  std::vector<std::optional<Proxy>> cells;  // index class * num_domains + domain

  const std::optional<Proxy>& at(int cls, int domain) const {
    return cells[static_cast<std::size_t>(cls) * num_domains + domain];
  }
  std::optional<Proxy>& at(int cls, int domain) {
    return cells[static_cast<std::size_t>(cls) * num_domains + domain];
  }
};

struct ClassDistance {
  double distance = 0.0;  // meaningful only when domains_used > 0
  int domains_used = 0;
};

enum class Decision { kKept, kRelabeled, kAbstained };

struct RelabelRecord {
  SampleId id = 0;
  int old_label = 0;
  int new_label = 0;
  Decision decision = Decision::kKept;
  // One entry per class for high-loss samples; empty for kept low-loss ones.
  std::vector<ClassDistance> class_distances;
};

struct RelabelOutcome {
  std::vector<RelabelRecord> records;        // sorted by sample id
  std::map<SampleId, int> assignment;        // every id -> final label
  std::size_t num_relabeled = 0;
  std::size_t num_abstained = 0;
  // -1 when the dataset carries no true labels.
  double label_accuracy_before = -1.0;
  double label_accuracy_after = -1.0;
};

using Features = std::map<SampleId, FeatureVector>;

ProxyTable build_proxies(const Features& features, const Dataset& ds,
                         const std::set<SampleId>& low_ids);

// Mean cosine distance from the embedding to class y's proxies in every
// domain other than sample_domain. domains_used == 0 signals that class y
// has no cross-domain evidence (caller falls back to abstain).
ClassDistance cross_domain_class_distance(const FeatureVector& embedding, int sample_domain,
                                          int y, const ProxyTable& proxies);

// Low-loss samples keep their labels. Each high-loss sample takes the argmin
// over classes of the mean cross-domain proxy distance (ties -> lowest class
// index); it abstains (label kept, flagged) when its own class has no proxy in
// any other domain, so starved classes are never forcibly reassigned.
RelabelOutcome relabel(const Features& features, const Dataset& ds, const LossSplit& split,
                       const ProxyTable& proxies);

// Copy of ds with noisy labels replaced by the assignment.
Dataset with_labels(const Dataset& ds, const std::map<SampleId, int>& assignment);

// Fraction of samples whose labelled class wins the strict cross-domain
// distance comparison against every other available class.
double separability_rate(const Features& features, const Dataset& ds, const ProxyTable& proxies,
                         bool use_true_labels);

double label_accuracy(const std::map<SampleId, int>& assignment, const Dataset& ds);

struct SummaryStats {
  std::size_t count = 0;
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
};

enum class MeanSource { kAll, kLowLossOnly };

// Distance diagnostics around (class, domain) group means: how far samples
// sit from their own cell, from their class in other domains, and from other
// classes in their own domain. overlap is true when some cross-class
// distance undercuts the largest within-class cross-domain distance, i.e.
// label noise is confusable with domain shift.
struct DistanceStats {
  MeanSource source = MeanSource::kAll;
  std::map<std::pair<int, int>, SummaryStats> per_cell;        // within-cell
  std::map<std::pair<int, int>, SummaryStats> per_class_pair;  // (c from, c' to), same domain
  SummaryStats within_class_cross_domain;
  SummaryStats cross_class_within_domain;
  bool overlap = false;
  std::vector<std::pair<int, int>> omitted_cells;  // no mean available
};

DistanceStats distance_stats(const Features& features, const Dataset& ds, MeanSource source,
                             const std::set<SampleId>* low_ids = nullptr);

}  // namespace nag
