#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "nag/dataset.hpp"

namespace nag {

// Multi-domain Gaussian-cluster generator. Each class gets a prototype
// (seeded directions repelled to a minimum pairwise separation); each domain
// applies a rotation on consecutive 2-D coordinate blocks plus a translation;
// samples are jittered copies of the transformed prototype.
struct DomainSpec {
  int num_classes = 10;
  int num_domains = 4;
  int samples_per_cell = 30;
  int feature_dim = 16;
  double class_separation = 4.0;
  double rotation_step_deg = 15.0;
  double translation = 0.5;
  double cluster_noise_sigma = 1.5;
  std::uint64_t seed = 0;
};

struct NoiseSpec {
  // Directed flips: a sample with true class `first` moves to label `second`
  // with probability `ratio`. Each source class may appear at most once.
  std::vector<std::pair<int, int>> pairs;
  double ratio = 0.0;
  std::uint64_t seed = 0;
};

// The eight digit-confusion pairs used throughout the default experiments.
std::vector<std::pair<int, int>> default_noise_pairs();

Dataset generate(const DomainSpec& spec);
Dataset inject_pairwise_noise(const Dataset& dataset, const NoiseSpec& spec);

// Fraction of samples whose noisy label equals the true label.
double label_accuracy(const Dataset& ds);

}  // namespace nag
