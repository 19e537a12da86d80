#pragma once

#include <string>
#include <vector>

#include "nag/numerics.hpp"

namespace nag {

struct Sample {
  SampleId id = 0;
  int domain = 0;
  int noisy_label = 0;
  int true_label = -1;  // -1 when unknown
  FeatureVector x;
};

struct Dataset {
  int num_classes = 0;
  int num_domains = 0;
  int dim = 0;
  bool has_true_labels = false;
  // Set when noise was injected with ratio >= 0.5 (loss-split assumption
  // strained); carried through save/load.
  bool high_ratio_warning = false;
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }

  std::vector<int> domains_present() const;
  std::vector<std::size_t> indices_of_domain(int domain) const;
};

// Text format, single header line then one line per sample. Doubles are
// printed with %.17g so save/load round-trips bit-exactly.
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

std::string format_double(double v);
std::uint64_t dataset_checksum(const Dataset& ds);

}  // namespace nag
