// Times the OpenMP kernels against their serial reference implementations
// and reports the largest numeric deviation between the two.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <vector>

#include "nag/gmm.hpp"
#include "nag/model.hpp"
#include "nag/parallel.hpp"
#include "nag/rng.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double best_of(int reps, const std::function<void()>& fn) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = Clock::now();
    fn();
    const auto t1 = Clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

void report(const char* name, double serial_ms, double parallel_ms, double max_diff) {
  std::printf("%-24s serial %9.3f ms   parallel %9.3f ms   speedup %5.2fx   max|diff| %.3e\n",
              name, serial_ms, parallel_ms, serial_ms / parallel_ms, max_diff);
}

void bench_batch_gradients() {
  const std::vector<int> dims = {64, 128, 32, 10};
  const nag::ModelParams params = nag::init_params(dims, 7);
  nag::Rng rng(11);
  const std::size_t n = 4096;
  std::vector<nag::FeatureVector> xs(n, nag::FeatureVector(dims[0]));
  std::vector<nag::BatchItem> batch(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (double& v : xs[i]) v = rng.next_gaussian();
    batch[i] = nag::BatchItem{static_cast<nag::SampleId>(i), &xs[i],
                              static_cast<int>(rng.next_below(10))};
  }

  nag::BatchGradients ser, par;
  const double t_ser =
      best_of(3, [&] { ser = nag::batch_gradients_reference(params, batch); });
  const double t_par = best_of(3, [&] { par = nag::batch_gradients(params, batch); });
  double diff = 0.0;
  for (std::size_t i = 0; i < ser.grad.size(); ++i)
    diff = std::max(diff, std::abs(ser.grad[i] - par.grad[i]));
  report("batch_gradients", t_ser, t_par, diff);
}

void bench_fit_gmm() {
  nag::Rng rng(23);
  std::map<nag::SampleId, double> losses;
  for (nag::SampleId i = 0; i < 200000; ++i) {
    const bool high = rng.next_double() < 0.25;
    const double v = (high ? 2.0 : 0.1) + 0.05 * rng.next_gaussian();
    losses[i] = std::max(0.0, v);
  }
  nag::GmmParams ser, par;
  const double t_ser = best_of(3, [&] { ser = nag::fit_gmm_reference(losses); });
  const double t_par = best_of(3, [&] { par = nag::fit_gmm(losses); });
  double diff = 0.0;
  for (int k = 0; k < 2; ++k) {
    diff = std::max(diff, std::abs(ser.means[k] - par.means[k]));
    diff = std::max(diff, std::abs(ser.variances[k] - par.variances[k]));
    diff = std::max(diff, std::abs(ser.weights[k] - par.weights[k]));
  }
  report("fit_gmm", t_ser, t_par, diff);
}

void bench_chunked_sum() {
  nag::Rng rng(31);
  const std::size_t n = 1 << 22;
  std::vector<double> v(n);
  for (double& x : v) x = rng.next_double();

  double s_ser = 0.0, s_par = 0.0;
  const double t_ser = best_of(5, [&] {
    nag::par::set_enabled(false);
    s_ser = nag::par::chunked_sum(n, [&](std::size_t i) { return v[i]; });
  });
  const double t_par = best_of(5, [&] {
    nag::par::set_enabled(true);
    s_par = nag::par::chunked_sum(n, [&](std::size_t i) { return v[i]; });
  });
  nag::par::set_enabled(true);
  // Chunked reduction order is fixed, so the sums must agree bit-for-bit.
  report("chunked_sum", t_ser, t_par, std::abs(s_ser - s_par));
}

}  // namespace

int main() {
  std::printf("threads available: %d\n", nag::par::thread_count());
  bench_chunked_sum();
  bench_batch_gradients();
  bench_fit_gmm();
  return 0;
}
