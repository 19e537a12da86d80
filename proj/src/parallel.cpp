#include "nag/parallel.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace nag::par {

namespace {
bool g_enabled = true;
}

void set_enabled(bool on) { g_enabled = on; }

bool enabled() {
#ifdef _OPENMP
  return g_enabled;
#else
  return false;
#endif
}

int thread_count() {
#ifdef _OPENMP
  return enabled() ? omp_get_max_threads() : 1;
#else
  return 1;
#endif
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
#ifdef _OPENMP
  if (enabled() && n > 1) {
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(n); ++i)
      body(static_cast<std::size_t>(i));
    return;
  }
#endif
  for (std::size_t i = 0; i < n; ++i) body(i);
}

namespace detail {

std::size_t chunk_count(std::size_t n) { return (n + kReduceChunk - 1) / kReduceChunk; }

void chunk_bounds(std::size_t chunk, std::size_t n, std::size_t* begin, std::size_t* end) {
  *begin = chunk * kReduceChunk;
  *end = *begin + kReduceChunk;
  if (*end > n) *end = n;
}

void run_chunks(std::size_t n, const std::function<void(std::size_t)>& chunk_body) {
  const std::size_t chunks = chunk_count(n);
#ifdef _OPENMP
  if (enabled() && chunks > 1) {
#pragma omp parallel for schedule(static)
    for (long long c = 0; c < static_cast<long long>(chunks); ++c)
      chunk_body(static_cast<std::size_t>(c));
    return;
  }
#endif
  for (std::size_t c = 0; c < chunks; ++c) chunk_body(c);
}

}  // namespace detail

}  // namespace nag::par
