#pragma once

#include <cstdint>
#include <map>
#include <vector>

namespace nag {

using FeatureVector = std::vector<double>;
using SampleId = std::int64_t;

double dot(const FeatureVector& a, const FeatureVector& b);
double norm2(const FeatureVector& a);

// 1 - cos(a, b), clamped to [0, 2]. Throws NumericOverflowError via caller
// policy only at relabel time; here a zero-norm input (norm < 1e-12) yields
// the maximally uninformative distance 1.
double cosine_distance(const FeatureVector& a, const FeatureVector& b);

bool has_zero_norm(const FeatureVector& a);

void axpy(double alpha, const FeatureVector& x, FeatureVector* y);
void scale(double alpha, FeatureVector* y);

// Elementwise mean of the selected rows; empty selection is the caller's
// error and throws std::invalid_argument.
FeatureVector mean_of(const std::vector<FeatureVector>& rows,
                      const std::vector<std::size_t>& idx);

// Group rows by key and return per-group means, keys in sorted order.
std::map<std::int64_t, FeatureVector> group_mean(const std::vector<FeatureVector>& rows,
                                                 const std::vector<std::int64_t>& keys);

// Linear-interpolation quantile of sorted values, q in [0, 1].
double quantile_sorted(const std::vector<double>& sorted, double q);

}  // namespace nag
