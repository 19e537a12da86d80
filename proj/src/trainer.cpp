#include "nag/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "nag/errors.hpp"
#include "nag/parallel.hpp"
#include "nag/rng.hpp"

namespace nag {

std::vector<int> TrainConfig::layer_dims(int input_dim, int num_classes) const {
  std::vector<int> dims;
  dims.push_back(input_dim);
  dims.insert(dims.end(), hidden_dims.begin(), hidden_dims.end());
  dims.push_back(embedding_dim);
  dims.push_back(num_classes);
  return dims;
}

int TrainConfig::effective_refine_step() const {
  if (refine_step >= 0) return refine_step;
  return std::max(1, total_steps / 5);
}

std::string TrainConfig::method_name() const {
  std::string m = "erm";
  if (use_elr) m += "+elr";
  if (use_dl4nd) m += "+dl4nd";
  return m;
}

namespace {

void validate(const TrainConfig& cfg, const Dataset& ds) {
  if (ds.samples.empty()) throw std::invalid_argument("train: empty dataset");
  if (cfg.total_steps < 0) throw std::invalid_argument("train: total_steps negative");
  if (cfg.batch_size <= 0) throw std::invalid_argument("train: batch_size must be positive");
  if (cfg.learning_rate <= 0.0)
    throw std::invalid_argument("train: learning_rate must be positive");
  if (cfg.elr_beta < 0.0 || cfg.elr_beta >= 1.0)
    throw std::invalid_argument("train: elr_beta must be in [0, 1)");
  if (cfg.elr_lambda < 0.0) throw std::invalid_argument("train: elr_lambda must be >= 0");
  if (cfg.refine_passes < 1) throw std::invalid_argument("train: refine_passes must be >= 1");
  if (cfg.swad_enabled && cfg.swad_start >= 0 && cfg.swad_end >= 0) {
    if (cfg.swad_start > cfg.swad_end || cfg.swad_end > cfg.total_steps)
      throw std::invalid_argument("train: swad window must satisfy start <= end <= total_steps");
  }
}

// Epoch-shuffled batch source. Batches never span an epoch boundary, so a
// batch never holds the same sample id twice and the ELR hook may write its
// per-id slot without synchronization.
class BatchSource {
 public:
  BatchSource(const Dataset& ds, int batch_size, std::uint64_t seed)
      : ds_(ds), batch_size_(batch_size), rng_(seed) {
    order_.resize(ds.samples.size());
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
    pos_ = order_.size();  // force shuffle on first batch
  }

  std::vector<BatchItem> next() {
    if (pos_ >= order_.size()) {
      rng_.shuffle(order_);
      pos_ = 0;
    }
    const std::size_t take = std::min(static_cast<std::size_t>(batch_size_),
                                      order_.size() - pos_);
    std::vector<BatchItem> batch;
    batch.reserve(take);
    for (std::size_t k = 0; k < take; ++k) {
      const Sample& s = ds_.samples[order_[pos_ + k]];
      batch.push_back(BatchItem{s.id, &s.x, s.noisy_label});
    }
    pos_ += take;
    return batch;
  }

 private:
  const Dataset& ds_;
  int batch_size_;
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

ExtraLogitTerm make_elr_hook(const TrainConfig& cfg, ElrState* state) {
  if (!cfg.use_elr || cfg.elr_lambda == 0.0) return nullptr;
  const double beta = cfg.elr_beta;
  const double lambda = cfg.elr_lambda;
  return [state, beta, lambda](SampleId id, const std::vector<double>& probs) {
    auto it = state->targets.find(id);
    if (it == state->targets.end())
      throw std::invalid_argument("elr: sample id missing from preallocated state");
    ElrTerms t = elr_step_terms(probs, it->second, beta, lambda);
    it->second = std::move(t.updated_t);
    LogitTermResult r;
    r.loss = t.loss;
    r.dlogits = std::move(t.dlogits);
    return r;
  };
}

void init_elr_state(const TrainConfig& cfg, const Dataset& ds, ElrState* state) {
  if (!cfg.use_elr) return;
  for (const auto& s : ds.samples) {
    auto& t = state->targets[s.id];
    if (t.empty()) t.assign(ds.num_classes, 0.0);
  }
}

// Runs steps [step_begin, step_end) of SGD, recording mean batch loss and
// feeding SWAD inside [swad_start, swad_end] (global step indices). The batch
// source persists across calls so a phase may be trained in slices.
void train_span(const TrainConfig& cfg, BatchSource* source, int step_begin, int step_end,
                ModelParams* params, ElrState* elr, SwadState* swad, int swad_start,
                int swad_end, std::vector<double>* loss_history) {
  const ExtraLogitTerm hook = make_elr_hook(cfg, elr);
  for (int step = step_begin; step < step_end; ++step) {
    const std::vector<BatchItem> batch = source->next();
    BatchGradients g;
    try {
      g = batch_gradients(*params, batch, hook);
    } catch (const NumericOverflowError& e) {
      // A non-finite intermediate during training is divergence; report it
      // with the step index instead of the per-sample overflow.
      throw AbortedRunError(step, e.what());
    }
    if (!std::isfinite(g.mean_loss) || g.mean_loss > 1e6) throw AbortedRunError(step);
    params_axpy(-cfg.learning_rate, g.grad, params);
    loss_history->push_back(g.mean_loss);
    if (swad != nullptr && step >= swad_start && step <= swad_end)
      swad_accumulate(swad, *params);
  }
}

std::pair<int, int> swad_window(const TrainConfig& cfg, int phase_begin) {
  int s = cfg.swad_start;
  int e = cfg.swad_end;
  const int span = cfg.total_steps - phase_begin;
  if (s < 0) s = cfg.total_steps - std::max(1, (span + 3) / 4);
  if (e < 0) e = cfg.total_steps - 1;
  if (s < phase_begin) s = phase_begin;
  return {s, e};
}

}  // namespace

ElrTerms elr_step_terms(const std::vector<double>& probs, const std::vector<double>& t_prev,
                        double beta, double lambda) {
  if (probs.size() != t_prev.size())
    throw std::invalid_argument("elr_step_terms: dimension mismatch");
  const std::size_t C = probs.size();
  ElrTerms out;
  out.updated_t.resize(C);
  for (std::size_t k = 0; k < C; ++k)
    out.updated_t[k] = beta * t_prev[k] + (1.0 - beta) * probs[k];

  double s_raw = 0.0;
  for (std::size_t k = 0; k < C; ++k) s_raw += probs[k] * out.updated_t[k];
  constexpr double kCap = 1.0 - 1e-6;
  const double s = std::min(s_raw, kCap);
  out.loss = lambda * std::log(1.0 - s);
  out.dlogits.assign(C, 0.0);
  if (lambda != 0.0 && s_raw < kCap) {
    // d<p,t>/dlogit_k = p_k (t_k - <p,t>) with t constant.
    for (std::size_t k = 0; k < C; ++k)
      out.dlogits[k] = -lambda * probs[k] * (out.updated_t[k] - s_raw) / (1.0 - s_raw);
  }
  return out;
}

void swad_accumulate(SwadState* state, const ModelParams& params) {
  const std::vector<double> flat = flatten(params);
  if (state->count == 0) {
    state->layer_dims = params.layer_dims;
    state->sum.assign(flat.size(), 0.0);
  } else if (state->layer_dims != params.layer_dims) {
    throw std::invalid_argument("swad_accumulate: layer dims changed");
  }
  for (std::size_t i = 0; i < flat.size(); ++i) state->sum[i] += flat[i];
  state->count += 1;
}

ModelParams swad_finalize(const SwadState& state) {
  if (state.count == 0) throw std::logic_error("swad_finalize: no checkpoints accumulated");
  ModelParams p = init_params(state.layer_dims, 0);
  std::vector<double> mean = state.sum;
  for (double& v : mean) v /= static_cast<double>(state.count);
  unflatten(mean, &p);
  return p;
}

RunArtifacts train(const TrainConfig& cfg, const Dataset& ds, const ModelParams& initial) {
  validate(cfg, ds);
  RunArtifacts art;
  art.final_params = initial;
  if (cfg.total_steps == 0) return art;

  Rng master(cfg.seed);
  ElrState elr;
  init_elr_state(cfg, ds, &elr);
  SwadState swad;
  const auto [ws, we] = swad_window(cfg, 0);
  BatchSource source(ds, cfg.batch_size, master.child_seed(0));
  train_span(cfg, &source, 0, cfg.total_steps, &art.final_params, &elr,
             cfg.swad_enabled ? &swad : nullptr, ws, we, &art.loss_history);
  if (cfg.swad_enabled && swad.count > 0) art.final_params = swad_finalize(swad);
  return art;
}

RefineResult refine_once(const ModelParams& params, const Dataset& ds, const GmmOptions& opt,
                         double threshold) {
  RefineResult res;
  const std::map<SampleId, double> losses = per_sample_losses(params, ds);
  LossSplit ls;
  try {
    res.gmm = fit_gmm(losses, opt);
    ls = split(losses, *res.gmm, threshold);
  } catch (const DegenerateFitError&) {
    res.fallback = true;
    return res;
  }
  if (ls.low_ids.empty() || ls.high_ids.empty()) {
    // Nothing to refine; an empty low side means proxies cannot be built.
    res.fallback = ls.low_ids.empty();
    if (!res.fallback) {
      RelabelOutcome none;
      for (const auto& s : ds.samples) {
        none.assignment[s.id] = s.noisy_label;
        RelabelRecord rec;
        rec.id = s.id;
        rec.old_label = rec.new_label = s.noisy_label;
        none.records.push_back(rec);
      }
      std::sort(none.records.begin(), none.records.end(),
                [](const RelabelRecord& a, const RelabelRecord& b) { return a.id < b.id; });
      if (ds.has_true_labels) {
        none.label_accuracy_before = label_accuracy(none.assignment, ds);
        none.label_accuracy_after = none.label_accuracy_before;
      }
      res.outcome = std::move(none);
    }
    return res;
  }
  const Features feats = extract_features(params, ds);
  const ProxyTable proxies = build_proxies(feats, ds, ls.low_ids);
  res.outcome = relabel(feats, ds, ls, proxies);
  return res;
}

namespace {

// Between-means gap of the loss GMM, or 0 when the fit degenerates.
double gmm_gap(const ModelParams& params, const Dataset& ds, const GmmOptions& opt) {
  try {
    const GmmParams g = fit_gmm(per_sample_losses(params, ds), opt);
    return g.means[1] - g.means[0];
  } catch (const DegenerateFitError&) {
    return 0.0;
  }
}

}  // namespace

RunArtifacts run_nag_pipeline(const TrainConfig& cfg, const Dataset& ds,
                              const ModelParams& initial) {
  validate(cfg, ds);
  const int refine_at = cfg.effective_refine_step();
  if (refine_at <= 0 || refine_at >= cfg.total_steps)
    throw std::invalid_argument("pipeline: refine step must satisfy 0 < refine < total_steps");

  Rng master(cfg.seed);
  RunArtifacts art;
  art.final_params = initial;

  ElrState elr;
  init_elr_state(cfg, ds, &elr);

  // Phase 1: warmup on the dataset as given.
  int refine_step_used = refine_at;
  {
    BatchSource warmup(ds, cfg.batch_size, master.child_seed(0));
    if (cfg.refine_on_gap_peak) {
      double peak = 0.0;
      bool fired = false;
      for (int step = 0; step < refine_at && !fired; step += 10) {
        const int end = std::min(step + 10, refine_at);
        train_span(cfg, &warmup, step, end, &art.final_params, &elr, nullptr, 0, -1,
                   &art.loss_history);
        const double gap = gmm_gap(art.final_params, ds, cfg.gmm);
        if (gap < peak) {
          refine_step_used = end;
          fired = true;
        }
        peak = std::max(peak, gap);
      }
      if (!fired) refine_step_used = refine_at;
    } else {
      train_span(cfg, &warmup, 0, refine_at, &art.final_params, &elr, nullptr, 0, -1,
                 &art.loss_history);
    }
  }
  art.refine_step_used = refine_step_used;

  // Refinement passes on a frozen parameter snapshot; labels change, the
  // snapshot does not.
  Dataset current = ds;
  for (int pass = 0; pass < cfg.refine_passes; ++pass) {
    RefineResult r = refine_once(art.final_params, current, cfg.gmm, cfg.split_threshold);
    if (pass == 0) {
      art.gmm = r.gmm;
      art.gmm_fallback = r.fallback;
    }
    if (r.fallback || !r.outcome) break;
    current = with_labels(current, r.outcome->assignment);
    art.relabel_outcome = std::move(r.outcome);
  }
  // Multi-pass summaries compare the original labels with the final ones.
  if (art.relabel_outcome && cfg.refine_passes > 1) {
    std::size_t changed = 0;
    for (std::size_t i = 0; i < ds.samples.size(); ++i)
      if (ds.samples[i].noisy_label != current.samples[i].noisy_label) ++changed;
    art.relabel_outcome->num_relabeled = changed;
    if (ds.has_true_labels) {
      std::map<SampleId, int> orig;
      for (const auto& s : ds.samples) orig[s.id] = s.noisy_label;
      art.relabel_outcome->label_accuracy_before = label_accuracy(orig, ds);
      std::map<SampleId, int> fin;
      for (const auto& s : current.samples) fin[s.id] = s.noisy_label;
      art.relabel_outcome->label_accuracy_after = label_accuracy(fin, ds);
    }
  }
  art.refined = current;

  // Phase 2: resume on refined labels; SWAD runs here when enabled.
  SwadState swad;
  const auto [ws, we] = swad_window(cfg, refine_step_used);
  BatchSource resume(current, cfg.batch_size, master.child_seed(1));
  train_span(cfg, &resume, refine_step_used, cfg.total_steps, &art.final_params, &elr,
             cfg.swad_enabled ? &swad : nullptr, ws, we, &art.loss_history);
  if (cfg.swad_enabled && swad.count > 0) art.final_params = swad_finalize(swad);
  return art;
}

double classification_accuracy(const ModelParams& params, const Dataset& ds,
                               bool use_true_labels) {
  if (ds.samples.empty())
    throw std::invalid_argument("classification_accuracy: empty dataset");
  if (use_true_labels && !ds.has_true_labels)
    throw MetricUnavailableError("classification_accuracy: dataset lacks true labels");
  std::vector<int> ok(ds.samples.size(), 0);
  par::parallel_for(ds.samples.size(), [&](std::size_t i) {
    const Sample& s = ds.samples[i];
    const ForwardResult r = forward(params, s.x, 0);
    int best = 0;
    for (int k = 1; k < params.num_classes(); ++k)
      if (r.probs[k] > r.probs[best]) best = k;
    ok[i] = best == (use_true_labels ? s.true_label : s.noisy_label) ? 1 : 0;
  });
  std::size_t hits = 0;
  for (int v : ok) hits += v;
  return static_cast<double>(hits) / static_cast<double>(ds.samples.size());
}

}  // namespace nag
