#pragma once

#include <stdexcept>
#include <string>

namespace nag {

// Configuration rejected before any work starts (unknown key, bad value).
// The message always names the offending key.
class ConfigError : public std::runtime_error {
public:
  ConfigError(std::string key, const std::string& what)
      : std::runtime_error("config: " + key + ": " + what), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

private:
  std::string key_;
};

// Malformed input file; message carries file and line/record index.
class ParseError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Two-component mixture fit cannot separate the data. Callers treat all
// samples as low-loss when they want to continue.
class DegenerateFitError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Requested metric needs true labels and the dataset has none.
class MetricUnavailableError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Training diverged; message carries the step index.
class AbortedRunError : public std::runtime_error {
public:
  explicit AbortedRunError(int step, const std::string& what = "loss diverged")
      : std::runtime_error("run aborted at step " + std::to_string(step) + ": " + what),
        step_(step) {}
  int step() const { return step_; }

private:
  int step_;
};

// Non-finite value met inside a forward/backward pass; names the sample.
class NumericOverflowError : public std::runtime_error {
public:
  explicit NumericOverflowError(long long sample_id,
                                const std::string& what = "non-finite intermediate")
      : std::runtime_error("numeric overflow on sample " + std::to_string(sample_id) + ": " +
                           what),
        sample_id_(sample_id) {}
  long long sample_id() const { return sample_id_; }

private:
  long long sample_id_;
};

}  // namespace nag
