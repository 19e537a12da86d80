#include "nag/harness.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <stdexcept>

#include "nag/errors.hpp"
#include "nag/parallel.hpp"
#include "nag/rng.hpp"

namespace nag {

namespace {

// Child-stream ids for the per-repetition seed.
constexpr std::uint64_t kStreamDomain = 1;
constexpr std::uint64_t kStreamNoise = 2;
constexpr std::uint64_t kStreamInit = 100;       // + fold
constexpr std::uint64_t kStreamSelection = 200;  // + fold
constexpr std::uint64_t kStreamTrain = 300;      // + fold

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// Population standard deviation; deterministic and well-defined for n = 1.
double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

TrainConfig apply_method(const TrainConfig& base, const std::string& method) {
  TrainConfig cfg = base;
  cfg.use_elr = false;
  cfg.use_dl4nd = false;
  std::size_t pos = 0;
  std::vector<std::string> parts;
  while (pos <= method.size()) {
    const std::size_t next = method.find('+', pos);
    parts.push_back(method.substr(pos, next == std::string::npos ? next : next - pos));
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  if (parts.empty() || parts[0] != "erm")
    throw ConfigError("eval.methods", "method must start with 'erm': " + method);
  for (std::size_t i = 1; i < parts.size(); ++i) {
    if (parts[i] == "elr")
      cfg.use_elr = true;
    else if (parts[i] == "dl4nd")
      cfg.use_dl4nd = true;
    else
      throw ConfigError("eval.methods", "unknown method component '" + parts[i] + "'");
  }
  return cfg;
}

FoldData make_fold(const Dataset& noisy, int held_out_domain, double id_fraction,
                   std::uint64_t selection_seed) {
  if (held_out_domain < 0 || held_out_domain >= noisy.num_domains)
    throw std::invalid_argument("make_fold: held_out_domain out of range");
  if (id_fraction <= 0.0 || id_fraction >= 1.0)
    throw std::invalid_argument("make_fold: id_fraction must be in (0, 1)");

  FoldData fold;
  for (Dataset* d : {&fold.train, &fold.id_test, &fold.ood_test}) {
    d->num_classes = noisy.num_classes;
    d->num_domains = noisy.num_domains;
    d->dim = noisy.dim;
    d->has_true_labels = noisy.has_true_labels;
    d->high_ratio_warning = noisy.high_ratio_warning;
  }

  Rng rng(selection_seed);
  std::set<SampleId> holdout;
  for (int dom = 0; dom < noisy.num_domains; ++dom) {
    if (dom == held_out_domain) continue;
    std::vector<SampleId> ids;
    for (const auto& s : noisy.samples)
      if (s.domain == dom) ids.push_back(s.id);
    std::sort(ids.begin(), ids.end());
    rng.shuffle(ids);
    const std::size_t take =
        static_cast<std::size_t>(std::ceil(id_fraction * static_cast<double>(ids.size())));
    for (std::size_t k = 0; k < take && k < ids.size(); ++k) holdout.insert(ids[k]);
  }

  for (const auto& s : noisy.samples) {
    if (s.domain == held_out_domain)
      fold.ood_test.samples.push_back(s);
    else if (holdout.count(s.id))
      fold.id_test.samples.push_back(s);
    else
      fold.train.samples.push_back(s);
  }
  return fold;
}

BalanceTable domain_balance(const std::set<SampleId>& ids, const Dataset& ds) {
  BalanceTable t;
  t.num_classes = ds.num_classes;
  t.num_domains = ds.num_domains;
  t.proportions.assign(ds.num_classes, std::vector<double>(ds.num_domains, 0.0));
  const std::vector<int> present = ds.domains_present();
  t.uniform_baseline = present.empty() ? 0.0 : 1.0 / static_cast<double>(present.size());

  std::vector<std::vector<std::int64_t>> counts(
      ds.num_classes, std::vector<std::int64_t>(ds.num_domains, 0));
  for (const auto& s : ds.samples) {
    if (!ids.count(s.id)) continue;
    counts[s.noisy_label][s.domain] += 1;
  }
  double gap_sum = 0.0;
  int gap_classes = 0;
  for (int c = 0; c < ds.num_classes; ++c) {
    std::int64_t total = 0;
    for (int d = 0; d < ds.num_domains; ++d) total += counts[c][d];
    if (total == 0) continue;
    double gap = 0.0;
    for (int d = 0; d < ds.num_domains; ++d) {
      t.proportions[c][d] = static_cast<double>(counts[c][d]) / static_cast<double>(total);
    }
    for (int d : present) gap += std::abs(t.proportions[c][d] - t.uniform_baseline);
    gap_sum += gap;
    ++gap_classes;
  }
  t.l1_gap = gap_classes > 0 ? gap_sum / gap_classes : 0.0;
  return t;
}

namespace {

FoldResult run_fold(const ExperimentSpec& spec, const Dataset& noisy, double ratio,
                    std::uint64_t seed, int fold, const std::string& method) {
  const FoldData data = make_fold(noisy, fold, spec.id_holdout_fraction,
                                  child_seed(seed, kStreamSelection + fold));
  TrainConfig cfg = apply_method(spec.train, method);
  cfg.seed = child_seed(seed, kStreamTrain + fold);

  const std::vector<int> dims = cfg.layer_dims(noisy.dim, noisy.num_classes);
  const ModelParams init = init_params(dims, child_seed(seed, kStreamInit + fold));

  const RunArtifacts art = cfg.use_dl4nd ? run_nag_pipeline(cfg, data.train, init)
                                         : train(cfg, data.train, init);

  FoldResult r;
  r.method = method;
  r.noise_ratio = ratio;
  r.seed = seed;
  r.held_out_domain = fold;
  r.dataset_checksum = dataset_checksum(noisy);
  r.id_accuracy = classification_accuracy(art.final_params, data.id_test, true);
  r.ood_accuracy = classification_accuracy(art.final_params, data.ood_test, true);
  r.gmm_fallback = art.gmm_fallback;
  r.gmm = art.gmm;

  if (data.train.has_true_labels) {
    std::map<SampleId, int> labels;
    for (const auto& s : data.train.samples) labels[s.id] = s.noisy_label;
    r.label_accuracy_before = label_accuracy(labels, data.train);
    r.label_accuracy_after = r.label_accuracy_before;
  }
  if (art.relabel_outcome) {
    r.num_relabeled = static_cast<std::int64_t>(art.relabel_outcome->num_relabeled);
    r.num_abstained = static_cast<std::int64_t>(art.relabel_outcome->num_abstained);
    if (art.relabel_outcome->label_accuracy_after >= 0.0)
      r.label_accuracy_after = art.relabel_outcome->label_accuracy_after;
    // Balance of the low-loss selection: kept records with no evaluated
    // distances are exactly the low-loss side of the split.
    std::set<SampleId> low;
    for (const auto& rec : art.relabel_outcome->records)
      if (rec.class_distances.empty()) low.insert(rec.id);
    r.low_loss_balance = domain_balance(low, data.train);
  }

  // Separability of the final embedding space, measured against true labels
  // with proxies from the labels training actually used.
  const Dataset& final_train = art.refined ? *art.refined : data.train;
  std::set<SampleId> all_ids;
  for (const auto& s : final_train.samples) all_ids.insert(s.id);
  const Features feats = extract_features(art.final_params, final_train);
  const ProxyTable proxies = build_proxies(feats, final_train, all_ids);
  r.separability = separability_rate(feats, final_train, proxies, final_train.has_true_labels);
  return r;
}

struct Job {
  double ratio;
  std::uint64_t seed;
  int fold;
  std::string method;
  const Dataset* noisy;
};

Report run_all(const ExperimentSpec& spec) {
  if (spec.domain.num_domains < 2)
    throw std::invalid_argument("leave_one_out: protocol needs at least 2 domains");
  if (spec.seeds.empty()) throw std::invalid_argument("leave_one_out: need at least one seed");
  if (spec.methods.empty()) throw std::invalid_argument("leave_one_out: need at least one method");
  for (double r : spec.noise_ratios)
    if (r < 0.0 || r >= 0.5)
      throw std::invalid_argument("noise_sweep: ratios must lie in [0, 0.5)");

  std::vector<int> folds = spec.held_out_domains;
  if (folds.empty())
    for (int d = 0; d < spec.domain.num_domains; ++d) folds.push_back(d);
  for (int f : folds)
    if (f < 0 || f >= spec.domain.num_domains)
      throw std::invalid_argument("leave_one_out: held-out domain out of range");

  // Datasets per (seed, ratio); the base geometry depends only on the seed,
  // so every ratio relabels the same samples.
  std::map<std::pair<std::uint64_t, double>, Dataset> datasets;
  for (std::uint64_t seed : spec.seeds) {
    DomainSpec dspec = spec.domain;
    dspec.seed = child_seed(seed, kStreamDomain);
    const Dataset base = generate(dspec);
    for (double ratio : spec.noise_ratios) {
      NoiseSpec nspec;
      nspec.pairs = spec.noise_pairs;
      nspec.ratio = ratio;
      nspec.seed = child_seed(seed, kStreamNoise);
      datasets[{seed, ratio}] = inject_pairwise_noise(base, nspec);
    }
  }

  std::vector<Job> jobs;
  for (double ratio : spec.noise_ratios)
    for (std::uint64_t seed : spec.seeds)
      for (int fold : folds)
        for (const std::string& method : spec.methods)
          jobs.push_back(Job{ratio, seed, fold, method, &datasets.at({seed, ratio})});

  Report report;
  report.config = spec.config_echo;
  report.folds.resize(jobs.size());
  std::exception_ptr failure = nullptr;
  std::mutex failure_mutex;
  par::parallel_for(jobs.size(), [&](std::size_t i) {
    try {
      const Job& j = jobs[i];
      report.folds[i] = run_fold(spec, *j.noisy, j.ratio, j.seed, j.fold, j.method);
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  });
  if (failure) std::rethrow_exception(failure);

  report.aggregates = compute_aggregates(report.folds);
  return report;
}

}  // namespace

std::vector<Aggregate> compute_aggregates(const std::vector<FoldResult>& folds) {
  // Group by (method, ratio) preserving first-appearance order.
  std::vector<std::pair<std::string, double>> keys;
  for (const auto& f : folds) {
    const std::pair<std::string, double> k{f.method, f.noise_ratio};
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
  }

  std::vector<Aggregate> out;
  for (const auto& [method, ratio] : keys) {
    Aggregate a;
    a.method = method;
    a.noise_ratio = ratio;

    std::vector<std::uint64_t> seeds;
    for (const auto& f : folds) {
      if (f.method != method || f.noise_ratio != ratio) continue;
      if (std::find(seeds.begin(), seeds.end(), f.seed) == seeds.end()) seeds.push_back(f.seed);
    }

    std::vector<double> id_all, ood_all, id_seed_means, ood_seed_means;
    std::vector<double> before, after, sep;
    int folds_per_seed = 0;
    for (std::uint64_t seed : seeds) {
      std::vector<double> id_s, ood_s;
      for (const auto& f : folds) {
        if (f.method != method || f.noise_ratio != ratio || f.seed != seed) continue;
        id_s.push_back(f.id_accuracy);
        ood_s.push_back(f.ood_accuracy);
        id_all.push_back(f.id_accuracy);
        ood_all.push_back(f.ood_accuracy);
        if (f.label_accuracy_before >= 0.0) before.push_back(f.label_accuracy_before);
        if (f.label_accuracy_after >= 0.0) after.push_back(f.label_accuracy_after);
        if (f.separability >= 0.0) sep.push_back(f.separability);
      }
      folds_per_seed = static_cast<int>(id_s.size());
      id_seed_means.push_back(mean_of(id_s));
      ood_seed_means.push_back(mean_of(ood_s));
    }
    a.num_seeds = static_cast<int>(seeds.size());
    a.num_folds = folds_per_seed;
    a.id_mean = mean_of(id_seed_means);
    a.id_std_over_seeds = std_of(id_seed_means);
    a.id_std_over_folds = std_of(id_all);
    a.ood_mean = mean_of(ood_seed_means);
    a.ood_std_over_seeds = std_of(ood_seed_means);
    a.ood_std_over_folds = std_of(ood_all);
    if (!before.empty()) a.label_before_mean = mean_of(before);
    if (!after.empty()) a.label_after_mean = mean_of(after);
    if (!sep.empty()) a.separability_mean = mean_of(sep);
    out.push_back(a);
  }
  return out;
}

Report leave_one_out(const ExperimentSpec& spec) {
  ExperimentSpec one = spec;
  if (one.noise_ratios.size() != 1)
    throw std::invalid_argument("leave_one_out: expects exactly one noise ratio");
  return run_all(one);
}

Report noise_sweep(const ExperimentSpec& spec) { return run_all(spec); }

}  // namespace nag
