#include "doctest.h"

#include "nag/parallel.hpp"
#include "nag/rng.hpp"

#include <atomic>
#include <cstdint>
#include <numeric>
#include <vector>

using namespace nag;

namespace {

// Serial/parallel toggle helper that always restores the previous state.
struct ParallelGuard {
  explicit ParallelGuard(bool on) : before(par::enabled()) { par::set_enabled(on); }
  ~ParallelGuard() { par::set_enabled(before); }
  bool before;
};

std::vector<double> random_values(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.next_gaussian() * 1e3;
  return v;
}

}  // namespace

TEST_CASE("chunk bounds tile [0,n) exactly") {
  for (std::size_t n : {std::size_t{0}, std::size_t{1}, std::size_t{63}, std::size_t{64},
                        std::size_t{65}, std::size_t{1000}}) {
    const std::size_t chunks = par::detail::chunk_count(n);
    std::size_t covered = 0;
    std::size_t prev_end = 0;
    for (std::size_t c = 0; c < chunks; ++c) {
      std::size_t b, e;
      par::detail::chunk_bounds(c, n, &b, &e);
      CHECK(b == prev_end);
      CHECK(e <= n);
      CHECK(b < e);
      covered += e - b;
      prev_end = e;
    }
    CHECK(covered == n);
    if (n > 0) CHECK(prev_end == n);
    CHECK(chunks == (n + par::kReduceChunk - 1) / par::kReduceChunk);
  }
}

TEST_CASE("parallel_for covers every index exactly once") {
  const std::size_t n = 10007;
  std::vector<std::atomic<int>> hits(n);
  for (auto& h : hits) h.store(0);
  ParallelGuard guard(true);
  par::parallel_for(n, [&](std::size_t i) { hits[i].fetch_add(1); });
  for (std::size_t i = 0; i < n; ++i) CHECK(hits[i].load() == 1);
}

TEST_CASE("parallel_for n=0 runs no bodies") {
  std::atomic<int> calls{0};
  par::parallel_for(0, [&](std::size_t) { calls.fetch_add(1); });
  CHECK(calls.load() == 0);
}

TEST_CASE("chunked_sum is bit-identical with parallelism on and off") {
  const auto v = random_values(200000, 21);
  double with, without;
  {
    ParallelGuard guard(true);
    with = par::chunked_sum(v.size(), [&](std::size_t i) { return v[i]; });
  }
  {
    ParallelGuard guard(false);
    without = par::chunked_sum(v.size(), [&](std::size_t i) { return v[i]; });
  }
  // Bit-identical, not approximately equal: chunk partials are combined in
  // chunk-index order regardless of thread schedule.
  CHECK(with == without);
}

TEST_CASE("chunked_sum matches a serial double accumulation on chunk-aligned sizes") {
  // For n <= one chunk the reduction is a single left-to-right sum, so it
  // must equal std::accumulate exactly.
  const auto v = random_values(par::kReduceChunk, 4);
  const double expect = std::accumulate(v.begin(), v.end(), 0.0);
  ParallelGuard guard(true);
  const double got = par::chunked_sum(v.size(), [&](std::size_t i) { return v[i]; });
  CHECK(got == expect);
}

TEST_CASE("chunked_vector_sum is bit-identical across modes and matches per-lane sums") {
  const std::size_t n = 5000, width = 7;
  const auto v = random_values(n * width, 8);
  auto term = [&](std::size_t i, std::vector<double>& acc) {
    for (std::size_t k = 0; k < width; ++k) acc[k] += v[i * width + k];
  };
  std::vector<double> with, without;
  {
    ParallelGuard guard(true);
    par::chunked_vector_sum(n, width, &with, term);
  }
  {
    ParallelGuard guard(false);
    par::chunked_vector_sum(n, width, &without, term);
  }
  REQUIRE(with.size() == width);
  CHECK(with == without);
  // Cross-check one lane against a direct chunked scalar reduction.
  const double lane0 =
      par::chunked_sum(n, [&](std::size_t i) { return v[i * width]; });
  CHECK(with[0] == lane0);
}

TEST_CASE("enabled() reflects set_enabled and thread_count is positive") {
  ParallelGuard guard(true);
  CHECK(par::enabled());
  par::set_enabled(false);
  CHECK_FALSE(par::enabled());
  CHECK(par::thread_count() >= 1);
}
