#pragma once

#include <map>
#include <set>
#include <vector>

#include "nag/numerics.hpp"

namespace nag {

struct GmmOptions {
  int max_iters = 100;
  double tol = 1e-6;           // on |Δ log-likelihood|
  double variance_floor = 1e-8;
};

// Two-component 1-D Gaussian mixture; component 0 has the smaller mean.
struct GmmParams {
  double means[2] = {0.0, 0.0};
  double variances[2] = {0.0, 0.0};
  double weights[2] = {0.5, 0.5};
  double log_likelihood = 0.0;
  int iterations_used = 0;
  std::vector<double> ll_trace;  // log-likelihood per EM iteration

  bool operator==(const GmmParams&) const = default;
};

struct LossSplit {
  std::set<SampleId> low_ids;
  std::set<SampleId> high_ids;
  std::map<SampleId, double> posterior;  // P(low component | loss)
};

// Deterministic initialization: means at the 10th/90th percentiles, equal
// weights, shared variance equal to the population variance.
GmmParams gmm_init(const std::vector<double>& losses, const GmmOptions& opt = {});

double posterior_low(const GmmParams& g, double x);

// EM fit. Throws DegenerateFitError when the losses carry no two-cluster
// structure (identical values, a collapsed component, or a single Gaussian
// explaining the data at least as well by BIC); callers should then treat
// every sample as low-loss.
GmmParams fit_gmm(const std::map<SampleId, double>& losses, const GmmOptions& opt = {});
GmmParams fit_gmm_reference(const std::map<SampleId, double>& losses, const GmmOptions& opt = {});

LossSplit split(const std::map<SampleId, double>& losses, const GmmParams& g,
                double threshold = 0.5);

}  // namespace nag
