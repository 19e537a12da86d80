#pragma once

#include <cstdint>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

namespace nag {

// Counter-based SplitMix64 stream. Output i is mix64(seed + (i+1)*kGamma),
// so the stream depends only on (seed, counter) and is identical across
// platforms. Derived child streams decorrelate via a second Weyl constant.
class Rng {
public:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;
  static constexpr std::uint64_t kChildGamma = 0xD1B54A32D192ED03ull;

  explicit Rng(std::uint64_t seed) : seed_(seed) {}

  static std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() {
    ++counter_;
    return mix64(seed_ + counter_ * kGamma);
  }

  // Uniform in [0, 1), 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller; consumes two outputs per call.
  double next_gaussian() {
    const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    const double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  // Unbiased integer in [0, bound) by rejection.
  std::uint64_t next_below(std::uint64_t bound) {
    const std::uint64_t threshold = (0 - bound) % bound;  // 2^64 mod bound
    std::uint64_t r = next_u64();
    while (r < threshold) r = next_u64();
    return r % bound;
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Seed for an independent child stream; never share one Rng across
  // consumers, derive children instead.
  std::uint64_t child_seed(std::uint64_t stream_id) const {
    return mix64(seed_ ^ mix64((stream_id + 1) * kChildGamma));
  }

private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

inline std::uint64_t child_seed(std::uint64_t seed, std::uint64_t stream_id) {
  return Rng(seed).child_seed(stream_id);
}

}  // namespace nag
