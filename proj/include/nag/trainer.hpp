#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "nag/dataset.hpp"
#include "nag/gmm.hpp"
#include "nag/model.hpp"
#include "nag/relabel.hpp"

namespace nag {

struct TrainConfig {
  int total_steps = 800;
  int batch_size = 128;
  double learning_rate = 0.05;
  std::vector<int> hidden_dims = {64, 32};
  int embedding_dim = 16;

  bool use_elr = false;
  double elr_beta = 0.7;
  double elr_lambda = 3.0;

  bool use_dl4nd = false;
  int refine_step = -1;  // -1: 20% of total_steps
  int refine_passes = 1;
  // Opt-in trigger: refine at the first decline of the GMM between-means gap
  // (checked every 10 steps), falling back to refine_step.
  bool refine_on_gap_peak = false;

  bool swad_enabled = false;
  int swad_start = -1;  // -1: final 25% of the (phase-2) steps
  int swad_end = -1;

  GmmOptions gmm;
  double split_threshold = 0.5;

  std::uint64_t seed = 0;

  std::vector<int> layer_dims(int input_dim, int num_classes) const;
  int effective_refine_step() const;
  std::string method_name() const;  // "erm", "erm+elr", "erm+dl4nd", ...
};

// Temporal ensemble of per-sample prediction targets; entries start at zero
// and move toward the running softmax outputs.
struct ElrState {
  std::map<SampleId, std::vector<double>> targets;
};

struct ElrTerms {
  std::vector<double> updated_t;
  double loss = 0.0;
  std::vector<double> dlogits;
};

// t <- beta*t + (1-beta)*p, then loss = lambda*log(1 - <p,t>) with the inner
// product clamped below 1 - 1e-6; the gradient treats t as a constant.
ElrTerms elr_step_terms(const std::vector<double>& probs, const std::vector<double>& t_prev,
                        double beta, double lambda);

struct SwadState {
  std::vector<int> layer_dims;
  std::vector<double> sum;
  std::size_t count = 0;
};

void swad_accumulate(SwadState* state, const ModelParams& params);
ModelParams swad_finalize(const SwadState& state);

struct RunArtifacts {
  ModelParams final_params;
  std::vector<double> loss_history;  // mean batch loss per executed step
  std::optional<GmmParams> gmm;
  std::optional<RelabelOutcome> relabel_outcome;
  std::optional<Dataset> refined;  // labels after refinement
  bool gmm_fallback = false;       // degenerate loss split: labels kept
  int refine_step_used = -1;
};

RunArtifacts train(const TrainConfig& cfg, const Dataset& ds, const ModelParams& initial);

// One refinement: snapshot losses and embeddings at the given parameters,
// split by GMM, build proxies, relabel. A degenerate split sets fallback and
// leaves labels untouched.
struct RefineResult {
  std::optional<GmmParams> gmm;
  std::optional<RelabelOutcome> outcome;
  bool fallback = false;
};
RefineResult refine_once(const ModelParams& params, const Dataset& ds, const GmmOptions& opt,
                         double threshold);

// Warmup to the refinement step, relabel, resume on refined labels.
RunArtifacts run_nag_pipeline(const TrainConfig& cfg, const Dataset& ds,
                              const ModelParams& initial);

double classification_accuracy(const ModelParams& params, const Dataset& ds,
                               bool use_true_labels);

}  // namespace nag
