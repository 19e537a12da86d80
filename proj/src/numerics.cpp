#include "nag/numerics.hpp"

#include <cmath>
#include <stdexcept>

namespace nag {

namespace {
constexpr double kZeroNorm = 1e-12;
}

double dot(const FeatureVector& a, const FeatureVector& b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(const FeatureVector& a) { return std::sqrt(dot(a, a)); }

bool has_zero_norm(const FeatureVector& a) { return norm2(a) < kZeroNorm; }

double cosine_distance(const FeatureVector& a, const FeatureVector& b) {
  const double na = norm2(a);
  const double nb = norm2(b);
  if (na < kZeroNorm || nb < kZeroNorm) return 1.0;
  double c = dot(a, b) / (na * nb);
  if (c > 1.0) c = 1.0;
  if (c < -1.0) c = -1.0;
  return 1.0 - c;
}

void axpy(double alpha, const FeatureVector& x, FeatureVector* y) {
  if (x.size() != y->size()) throw std::invalid_argument("axpy: dimension mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) (*y)[i] += alpha * x[i];
}

void scale(double alpha, FeatureVector* y) {
  for (double& v : *y) v *= alpha;
}

FeatureVector mean_of(const std::vector<FeatureVector>& rows,
                      const std::vector<std::size_t>& idx) {
  if (idx.empty()) throw std::invalid_argument("mean_of: empty selection");
  FeatureVector m(rows[idx[0]].size(), 0.0);
  for (std::size_t i : idx) axpy(1.0, rows[i], &m);
  scale(1.0 / static_cast<double>(idx.size()), &m);
  return m;
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("quantile_sorted: empty input");
  if (q <= 0.0) return sorted.front();
  if (q >= 1.0) return sorted.back();
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const double frac = pos - static_cast<double>(lo);
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac;
}

std::map<std::int64_t, FeatureVector> group_mean(const std::vector<FeatureVector>& rows,
                                                 const std::vector<std::int64_t>& keys) {
  if (rows.size() != keys.size())
    throw std::invalid_argument("group_mean: rows/keys size mismatch");
  std::map<std::int64_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < keys.size(); ++i) groups[keys[i]].push_back(i);
  std::map<std::int64_t, FeatureVector> out;
  for (const auto& [k, idx] : groups) out[k] = mean_of(rows, idx);
  return out;
}

}  // namespace nag
