#include "nag/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "nag/errors.hpp"
#include "nag/parallel.hpp"

namespace nag {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

double log_pdf(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * (kLog2Pi + std::log(var) + d * d / var);
}

// Values only: the fit depends on the multiset of losses, never on which id
// carried which value. Sorting makes that exact at the bit level, so any id
// relabeling produces an identical fit.
std::vector<double> unpack_sorted(const std::map<SampleId, double>& losses) {
  std::vector<double> x;
  x.reserve(losses.size());
  for (const auto& [id, v] : losses) {
    if (!std::isfinite(v) || v < 0.0)
      throw std::invalid_argument("fit_gmm: losses must be finite and non-negative");
    x.push_back(v);
  }
  std::sort(x.begin(), x.end());
  return x;
}

// Log-likelihood of the single-Gaussian MLE fit, for the BIC comparison.
double single_gaussian_ll(const std::vector<double>& x, double variance_floor) {
  const double n = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var = std::max(var / n, variance_floor);
  double ll = 0.0;
  for (double v : x) ll += log_pdf(v, mean, var);
  return ll;
}

struct EmSums {
  double n[2];
  double sx[2];
  double ll;
};

// One E-step pass: responsibilities plus the count/first-moment sums.
template <bool Parallel>
EmSums e_step(const std::vector<double>& x, const GmmParams& g,
              std::vector<double>* resp_low) {
  const std::size_t n = x.size();
  resp_low->resize(n);
  const double lw0 = std::log(g.weights[0]);
  const double lw1 = std::log(g.weights[1]);
  auto resp_at = [&](std::size_t i, double* log_mix) {
    const double a = lw0 + log_pdf(x[i], g.means[0], g.variances[0]);
    const double b = lw1 + log_pdf(x[i], g.means[1], g.variances[1]);
    const double m = std::max(a, b);
    const double s = std::exp(a - m) + std::exp(b - m);
    *log_mix = m + std::log(s);
    return std::exp(a - m) / s;
  };

  EmSums sums{};
  if constexpr (Parallel) {
    std::vector<double> log_mix(n);
    par::parallel_for(n, [&](std::size_t i) { (*resp_low)[i] = resp_at(i, &log_mix[i]); });
    sums.ll = par::chunked_sum(n, [&](std::size_t i) { return log_mix[i]; });
    sums.n[0] = par::chunked_sum(n, [&](std::size_t i) { return (*resp_low)[i]; });
    sums.sx[0] = par::chunked_sum(n, [&](std::size_t i) { return (*resp_low)[i] * x[i]; });
    sums.n[1] = par::chunked_sum(n, [&](std::size_t i) { return 1.0 - (*resp_low)[i]; });
    sums.sx[1] =
        par::chunked_sum(n, [&](std::size_t i) { return (1.0 - (*resp_low)[i]) * x[i]; });
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      double lm;
      const double r = resp_at(i, &lm);
      (*resp_low)[i] = r;
      sums.ll += lm;
      sums.n[0] += r;
      sums.sx[0] += r * x[i];
      sums.n[1] += 1.0 - r;
      sums.sx[1] += (1.0 - r) * x[i];
    }
  }
  return sums;
}

template <bool Parallel>
double centered_moment(const std::vector<double>& x, const std::vector<double>& resp_low,
                       int component, double mean) {
  const std::size_t n = x.size();
  auto term = [&](std::size_t i) {
    const double r = component == 0 ? resp_low[i] : 1.0 - resp_low[i];
    const double d = x[i] - mean;
    return r * d * d;
  };
  if constexpr (Parallel) return par::chunked_sum(n, term);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += term(i);
  return s;
}

template <bool Parallel>
GmmParams fit_impl(const std::map<SampleId, double>& losses, const GmmOptions& opt) {
  if (losses.size() < 4) throw std::invalid_argument("fit_gmm: need at least 4 samples");
  const std::vector<double> x = unpack_sorted(losses);
  if (x.back() - x.front() < 1e-12)
    throw DegenerateFitError("all losses identical; treat every sample as low-loss");

  GmmParams g = gmm_init(x, opt);
  std::vector<double> resp_low;
  double prev_ll = -std::numeric_limits<double>::infinity();
  for (int it = 0; it < opt.max_iters; ++it) {
    EmSums s = e_step<Parallel>(x, g, &resp_low);
    g.log_likelihood = s.ll;
    g.ll_trace.push_back(s.ll);
    g.iterations_used = it + 1;

    const double total = static_cast<double>(x.size());
    if (s.n[0] < 1e-8 * total || s.n[1] < 1e-8 * total)
      throw DegenerateFitError("mixture component collapsed; treat every sample as low-loss");

    const double m0 = s.sx[0] / s.n[0];
    const double m1 = s.sx[1] / s.n[1];
    g.variances[0] =
        std::max(centered_moment<Parallel>(x, resp_low, 0, m0) / s.n[0], opt.variance_floor);
    g.variances[1] =
        std::max(centered_moment<Parallel>(x, resp_low, 1, m1) / s.n[1], opt.variance_floor);
    g.means[0] = m0;
    g.means[1] = m1;
    g.weights[0] = s.n[0] / total;
    g.weights[1] = s.n[1] / total;

    if (std::abs(s.ll - prev_ll) < opt.tol) break;
    prev_ll = s.ll;
  }

  if (g.means[0] > g.means[1]) {
    std::swap(g.means[0], g.means[1]);
    std::swap(g.variances[0], g.variances[1]);
    std::swap(g.weights[0], g.weights[1]);
  }

  // A two-cluster story must beat a single Gaussian under BIC (2 vs 5 free
  // parameters); otherwise the split is noise, not structure.
  const double n = static_cast<double>(x.size());
  const double bic1 = -2.0 * single_gaussian_ll(x, opt.variance_floor) + 2.0 * std::log(n);
  const double bic2 = -2.0 * g.log_likelihood + 5.0 * std::log(n);
  if (bic1 <= bic2)
    throw DegenerateFitError(
        "losses not bimodal (single Gaussian preferred by BIC); treat every sample as low-loss");
  return g;
}

}  // namespace

GmmParams gmm_init(const std::vector<double>& losses, const GmmOptions& opt) {
  std::vector<double> sorted = losses;
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double mean = 0.0;
  for (double v : sorted) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : sorted) var += (v - mean) * (v - mean);
  var = std::max(var / n, opt.variance_floor);

  GmmParams g;
  g.means[0] = quantile_sorted(sorted, 0.10);
  g.means[1] = quantile_sorted(sorted, 0.90);
  g.variances[0] = var;
  g.variances[1] = var;
  g.weights[0] = 0.5;
  g.weights[1] = 0.5;
  return g;
}

double posterior_low(const GmmParams& g, double x) {
  const double a = std::log(g.weights[0]) + log_pdf(x, g.means[0], g.variances[0]);
  const double b = std::log(g.weights[1]) + log_pdf(x, g.means[1], g.variances[1]);
  const double m = std::max(a, b);
  return std::exp(a - m) / (std::exp(a - m) + std::exp(b - m));
}

GmmParams fit_gmm(const std::map<SampleId, double>& losses, const GmmOptions& opt) {
  return fit_impl<true>(losses, opt);
}

GmmParams fit_gmm_reference(const std::map<SampleId, double>& losses, const GmmOptions& opt) {
  return fit_impl<false>(losses, opt);
}

LossSplit split(const std::map<SampleId, double>& losses, const GmmParams& g,
                double threshold) {
  LossSplit out;
  for (const auto& [id, v] : losses) {
    const double p = posterior_low(g, v);
    out.posterior[id] = p;
    if (p >= threshold)
      out.low_ids.insert(id);
    else
      out.high_ids.insert(id);
  }
  return out;
}

}  // namespace nag
