#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace nag::par {

// Reduction chunk width. Partial sums are always combined in chunk-index
// order, so reductions are bit-identical for any thread count, including the
// serial fallback.
inline constexpr std::size_t kReduceChunk = 64;

void set_enabled(bool on);
bool enabled();
int thread_count();

// Runs body(i) for i in [0, n). Bodies must write to disjoint slots.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

namespace detail {
std::size_t chunk_count(std::size_t n);
void chunk_bounds(std::size_t chunk, std::size_t n, std::size_t* begin, std::size_t* end);
void run_chunks(std::size_t n, const std::function<void(std::size_t)>& chunk_body);
}  // namespace detail

// Deterministic sum reduction: per-chunk partials accumulated in index order.
template <class Term>
double chunked_sum(std::size_t n, const Term& term) {
  const std::size_t chunks = detail::chunk_count(n);
  std::vector<double> partial(chunks, 0.0);
  detail::run_chunks(n, [&](std::size_t c) {
    std::size_t b, e;
    detail::chunk_bounds(c, n, &b, &e);
    double s = 0.0;
    for (std::size_t i = b; i < e; ++i) s += term(i);
    partial[c] = s;
  });
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

// Deterministic elementwise vector-sum reduction into out (resized to width).
template <class Term>
void chunked_vector_sum(std::size_t n, std::size_t width, std::vector<double>* out,
                        const Term& term_into) {
  const std::size_t chunks = detail::chunk_count(n);
  std::vector<std::vector<double>> partial(chunks, std::vector<double>(width, 0.0));
  detail::run_chunks(n, [&](std::size_t c) {
    std::size_t b, e;
    detail::chunk_bounds(c, n, &b, &e);
    for (std::size_t i = b; i < e; ++i) term_into(i, partial[c]);
  });
  out->assign(width, 0.0);
  for (const auto& p : partial)
    for (std::size_t k = 0; k < width; ++k) (*out)[k] += p[k];
}

}  // namespace nag::par
