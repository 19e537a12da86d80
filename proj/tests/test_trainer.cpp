#include "doctest.h"

#include "nag/datagen.hpp"
#include "nag/errors.hpp"
#include "nag/trainer.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

using namespace nag;

namespace {

Dataset small_clean(std::uint64_t seed = 3) {
  DomainSpec spec;
  spec.num_classes = 4;
  spec.num_domains = 3;
  spec.samples_per_cell = 10;
  spec.seed = seed;
  return generate(spec);
}

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.total_steps = 60;
  cfg.batch_size = 64;
  cfg.seed = 9;
  return cfg;
}

ModelParams initial_for(const TrainConfig& cfg, const Dataset& ds, std::uint64_t seed = 1) {
  return init_params(cfg.layer_dims(ds.dim, ds.num_classes), seed);
}

}  // namespace

TEST_CASE("config helpers compose layer dims, refine step, and method name") {
  TrainConfig cfg;
  cfg.hidden_dims = {64, 32};
  cfg.embedding_dim = 16;
  CHECK(cfg.layer_dims(16, 10) == std::vector<int>{16, 64, 32, 16, 10});
  cfg.total_steps = 800;
  CHECK(cfg.effective_refine_step() == 160);  // default: 20% of the schedule
  cfg.refine_step = 123;
  CHECK(cfg.effective_refine_step() == 123);
  CHECK(cfg.method_name() == "erm");
  cfg.use_elr = true;
  CHECK(cfg.method_name() == "erm+elr");
  cfg.use_dl4nd = true;
  CHECK(cfg.method_name() == "erm+elr+dl4nd");
  cfg.use_elr = false;
  CHECK(cfg.method_name() == "erm+dl4nd");
}

TEST_CASE("zero steps return the initial parameters unchanged") {
  const Dataset ds = small_clean();
  TrainConfig cfg = small_config();
  cfg.total_steps = 0;
  const ModelParams initial = initial_for(cfg, ds);
  const RunArtifacts art = train(cfg, ds, initial);
  CHECK(flatten(art.final_params) == flatten(initial));
  CHECK(art.loss_history.empty());
}

TEST_CASE("training is bit-identical under a repeated seed") {
  const Dataset ds = small_clean();
  const TrainConfig cfg = small_config();
  const ModelParams initial = initial_for(cfg, ds);
  const RunArtifacts a = train(cfg, ds, initial);
  const RunArtifacts b = train(cfg, ds, initial);
  CHECK(flatten(a.final_params) == flatten(b.final_params));
  CHECK(a.loss_history == b.loss_history);

  TrainConfig other = cfg;
  other.seed = cfg.seed + 1;
  const RunArtifacts c = train(other, ds, initial);
  CHECK(flatten(a.final_params) != flatten(c.final_params));
}

TEST_CASE("clean separable data trains to high accuracy") {
  const Dataset ds = small_clean();
  TrainConfig cfg = small_config();
  cfg.total_steps = 500;
  const RunArtifacts art = train(cfg, ds, initial_for(cfg, ds));
  CHECK(classification_accuracy(art.final_params, ds, false) >= 0.99);
}

TEST_CASE("training with the regularized objective stays deterministic") {
  const Dataset clean = small_clean();
  NoiseSpec noise;
  noise.pairs = {{0, 1}, {2, 3}};
  noise.ratio = 0.3;
  noise.seed = 4;
  const Dataset ds = inject_pairwise_noise(clean, noise);
  TrainConfig cfg = small_config();
  cfg.use_elr = true;
  const ModelParams initial = initial_for(cfg, ds);
  const RunArtifacts a = train(cfg, ds, initial);
  const RunArtifacts b = train(cfg, ds, initial);
  CHECK(flatten(a.final_params) == flatten(b.final_params));
  CHECK(a.loss_history == b.loss_history);
  // The extra term changes the trajectory relative to the plain objective.
  TrainConfig plain = small_config();
  const RunArtifacts c = train(plain, ds, initial);
  CHECK(flatten(a.final_params) != flatten(c.final_params));
}

TEST_CASE("temporal-target terms match hand arithmetic") {
  // First visit: targets start at zero, so t = (1-beta) * p. With uniform
  // probabilities the inner product equals every t entry, making the
  // gradient vanish exactly.
  const std::vector<double> uniform(10, 0.1);
  const std::vector<double> zeros(10, 0.0);
  const ElrTerms a = elr_step_terms(uniform, zeros, 0.7, 3.0);
  for (double t : a.updated_t) CHECK(t == doctest::Approx(0.03).epsilon(1e-12));
  CHECK(a.loss == doctest::Approx(3.0 * std::log(1.0 - 0.03)).epsilon(1e-12));
  for (double g : a.dlogits) CHECK(g == doctest::Approx(0.0).epsilon(1e-12));

  // General case, all quantities worked out by hand:
  //   t = 0.5*t_prev + 0.5*p = {0.55, 0.30, 0.15}
  //   s = <p, t> = 0.275 + 0.09 + 0.03 = 0.395
  //   loss = 2 * log(0.605)
  //   dlogit_k = -2 * p_k * (t_k - s) / (1 - s)
  const ElrTerms b = elr_step_terms({0.5, 0.3, 0.2}, {0.6, 0.3, 0.1}, 0.5, 2.0);
  CHECK(b.updated_t[0] == doctest::Approx(0.55).epsilon(1e-12));
  CHECK(b.updated_t[1] == doctest::Approx(0.30).epsilon(1e-12));
  CHECK(b.updated_t[2] == doctest::Approx(0.15).epsilon(1e-12));
  CHECK(b.loss == doctest::Approx(2.0 * std::log(0.605)).epsilon(1e-12));
  CHECK(b.dlogits[0] == doctest::Approx(-2.0 * 0.5 * (0.55 - 0.395) / 0.605).epsilon(1e-12));
  CHECK(b.dlogits[1] == doctest::Approx(-2.0 * 0.3 * (0.30 - 0.395) / 0.605).epsilon(1e-12));
  CHECK(b.dlogits[2] == doctest::Approx(-2.0 * 0.2 * (0.15 - 0.395) / 0.605).epsilon(1e-12));

  // Saturation: <p, t> = 1 exactly, clamped to 1 - 1e-6, so the term bottoms
  // out at lambda * log(1 - clamped) and the gradient is switched off. The
  // expected value states the clamped expression itself because 1 - (1 - 1e-6)
  // is not exactly 1e-6 in double arithmetic.
  const ElrTerms c = elr_step_terms({1.0, 0.0}, {1.0, 0.0}, 0.9, 1.5);
  CHECK(c.loss == doctest::Approx(1.5 * std::log(1.0 - (1.0 - 1e-6))).epsilon(1e-12));
  for (double g : c.dlogits) CHECK(g == doctest::Approx(0.0));

  // lambda = 0 disables the term but the targets still move.
  const ElrTerms d = elr_step_terms({0.5, 0.5}, {0.0, 0.0}, 0.5, 0.0);
  CHECK(d.loss == 0.0);
  for (double g : d.dlogits) CHECK(g == 0.0);
  CHECK(d.updated_t[0] == doctest::Approx(0.25).epsilon(1e-12));

  CHECK_THROWS_AS((void)elr_step_terms({0.5, 0.5}, {0.0, 0.0, 0.0}, 0.5, 1.0),
                  std::invalid_argument);
}

TEST_CASE("checkpoint averaging is the exact mean of accumulated snapshots") {
  const std::vector<int> dims{3, 4, 2};
  const ModelParams a = init_params(dims, 10);
  const ModelParams b = init_params(dims, 11);
  const std::vector<double> fa = flatten(a);
  const std::vector<double> fb = flatten(b);

  SwadState st;
  swad_accumulate(&st, a);
  swad_accumulate(&st, b);
  CHECK(st.count == 2);
  const std::vector<double> mid = flatten(swad_finalize(st));
  REQUIRE(mid.size() == fa.size());
  for (std::size_t i = 0; i < mid.size(); ++i)
    CHECK(mid[i] == (fa[i] + fb[i]) / 2.0);  // exact midpoint

  // Order does not matter.
  SwadState rev;
  swad_accumulate(&rev, b);
  swad_accumulate(&rev, a);
  CHECK(flatten(swad_finalize(rev)) == mid);

  // Identical snapshots average to themselves exactly.
  SwadState same;
  swad_accumulate(&same, a);
  swad_accumulate(&same, a);
  CHECK(flatten(swad_finalize(same)) == fa);

  SwadState empty;
  CHECK_THROWS_AS((void)swad_finalize(empty), std::logic_error);

  SwadState mismatch;
  swad_accumulate(&mismatch, a);
  CHECK_THROWS_AS(swad_accumulate(&mismatch, init_params({3, 2}, 1)), std::invalid_argument);
}

TEST_CASE("a single-step averaging window reproduces that step's parameters") {
  const Dataset ds = small_clean();
  TrainConfig cfg = small_config();
  cfg.total_steps = 6;
  const ModelParams initial = initial_for(cfg, ds);
  const RunArtifacts plain = train(cfg, ds, initial);

  TrainConfig swad = cfg;
  swad.swad_enabled = true;
  swad.swad_start = 5;
  swad.swad_end = 5;
  const RunArtifacts avg = train(swad, ds, initial);
  CHECK(flatten(avg.final_params) == flatten(plain.final_params));
}

TEST_CASE("the default averaging window holds the last quarter of the steps") {
  // For 8 steps the window is [6, 7]: the average of the parameters after
  // step 6 and after step 7. Both checkpoints are reproduced by shorter runs
  // with the same seed, because the batch sequence is a pure function of
  // (dataset, seed).
  const Dataset ds = small_clean();
  TrainConfig cfg = small_config();
  cfg.total_steps = 8;
  cfg.swad_enabled = true;
  const ModelParams initial = initial_for(cfg, ds);
  const RunArtifacts avg = train(cfg, ds, initial);

  TrainConfig upto7 = small_config();
  upto7.total_steps = 7;
  TrainConfig upto8 = small_config();
  upto8.total_steps = 8;
  const std::vector<double> f7 = flatten(train(upto7, ds, initial).final_params);
  const std::vector<double> f8 = flatten(train(upto8, ds, initial).final_params);
  const std::vector<double> got = flatten(avg.final_params);
  REQUIRE(got.size() == f7.size());
  for (std::size_t i = 0; i < got.size(); ++i)
    CHECK(got[i] == (f7[i] + f8[i]) / 2.0);
}

TEST_CASE("non-finite parameters abort the run with a step index") {
  const Dataset ds = small_clean();
  TrainConfig cfg = small_config();
  ModelParams initial = initial_for(cfg, ds);
  // A non-finite weight in the linear head drives the loss to NaN on the
  // first batch (a hidden-layer inf would be clipped by tanh).
  initial.weights.back()[0] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS((void)train(cfg, ds, initial), AbortedRunError);
  try {
    (void)train(cfg, ds, initial);
  } catch (const AbortedRunError& e) {
    CHECK(e.step() == 0);
  }
}

TEST_CASE("invalid configurations are rejected before any work") {
  const Dataset ds = small_clean();
  TrainConfig cfg = small_config();
  const ModelParams initial = initial_for(cfg, ds);

  TrainConfig bad = cfg;
  bad.batch_size = 0;
  CHECK_THROWS_AS((void)train(bad, ds, initial), std::invalid_argument);
  bad = cfg;
  bad.learning_rate = 0.0;
  CHECK_THROWS_AS((void)train(bad, ds, initial), std::invalid_argument);
  bad = cfg;
  bad.elr_beta = 1.0;
  CHECK_THROWS_AS((void)train(bad, ds, initial), std::invalid_argument);
  bad = cfg;
  bad.swad_enabled = true;
  bad.swad_start = 50;
  bad.swad_end = 10;
  CHECK_THROWS_AS((void)train(bad, ds, initial), std::invalid_argument);
  CHECK_THROWS_AS((void)train(cfg, Dataset{}, initial), std::invalid_argument);
}

TEST_CASE("refinement step must fall strictly inside the schedule") {
  const Dataset ds = small_clean();
  TrainConfig cfg = small_config();
  cfg.use_dl4nd = true;
  const ModelParams initial = initial_for(cfg, ds);

  TrainConfig bad = cfg;
  bad.refine_step = 0;
  CHECK_THROWS_AS((void)run_nag_pipeline(bad, ds, initial), std::invalid_argument);
  bad.refine_step = cfg.total_steps;
  CHECK_THROWS_AS((void)run_nag_pipeline(bad, ds, initial), std::invalid_argument);

  // The last interior step is legal: phase 2 is a single step.
  TrainConfig edge = cfg;
  edge.refine_step = cfg.total_steps - 1;
  const RunArtifacts art = run_nag_pipeline(edge, ds, initial);
  CHECK(art.refine_step_used == cfg.total_steps - 1);
  CHECK(art.loss_history.size() == static_cast<std::size_t>(cfg.total_steps));
}

TEST_CASE("the pipeline never mutates its input dataset") {
  const Dataset clean = small_clean();
  NoiseSpec noise;
  noise.pairs = {{0, 2}, {1, 3}};
  noise.ratio = 0.3;
  noise.seed = 8;
  const Dataset ds = inject_pairwise_noise(clean, noise);
  std::vector<int> labels_before;
  for (const auto& s : ds.samples) labels_before.push_back(s.noisy_label);

  TrainConfig cfg = small_config();
  cfg.use_dl4nd = true;
  cfg.total_steps = 100;
  (void)run_nag_pipeline(cfg, ds, initial_for(cfg, ds));

  std::vector<int> labels_after;
  for (const auto& s : ds.samples) labels_after.push_back(s.noisy_label);
  CHECK(labels_before == labels_after);
}

TEST_CASE("refinement on noisy data improves label accuracy") {
  DomainSpec spec;
  spec.seed = 5;
  const Dataset clean = generate(spec);
  NoiseSpec noise;
  noise.pairs = default_noise_pairs();
  noise.ratio = 0.3;
  noise.seed = 6;
  const Dataset ds = inject_pairwise_noise(clean, noise);

  TrainConfig cfg;
  cfg.use_dl4nd = true;
  cfg.seed = 7;
  const RunArtifacts art = run_nag_pipeline(cfg, ds, initial_for(cfg, ds));
  REQUIRE(art.relabel_outcome.has_value());
  CHECK_FALSE(art.gmm_fallback);
  REQUIRE(art.gmm.has_value());
  CHECK(art.relabel_outcome->label_accuracy_after > art.relabel_outcome->label_accuracy_before);
  CHECK(art.relabel_outcome->label_accuracy_after >= 0.90);
  REQUIRE(art.refined.has_value());
  CHECK(label_accuracy(*art.refined) == doctest::Approx(art.relabel_outcome->label_accuracy_after));
  CHECK(art.refine_step_used == cfg.effective_refine_step());
}

TEST_CASE("after warmup the low-loss side carries cleaner labels than the whole set") {
  DomainSpec spec;
  spec.seed = 15;
  const Dataset clean = generate(spec);
  NoiseSpec noise;
  noise.pairs = default_noise_pairs();
  noise.ratio = 0.3;
  noise.seed = 16;
  const Dataset ds = inject_pairwise_noise(clean, noise);

  TrainConfig cfg;
  cfg.seed = 17;
  cfg.total_steps = cfg.effective_refine_step();  // warmup only
  const RunArtifacts warm = train(cfg, ds, initial_for(cfg, ds));
  const RefineResult r = refine_once(warm.final_params, ds, cfg.gmm, cfg.split_threshold);
  REQUIRE_FALSE(r.fallback);
  REQUIRE(r.gmm.has_value());

  const LossSplit ls = split(per_sample_losses(warm.final_params, ds), *r.gmm);
  std::size_t low_ok = 0;
  std::size_t all_ok = 0;
  for (const auto& s : ds.samples) {
    const bool ok = s.noisy_label == s.true_label;
    all_ok += ok ? 1 : 0;
    if (ls.low_ids.count(s.id)) low_ok += ok ? 1 : 0;
  }
  REQUIRE_FALSE(ls.low_ids.empty());
  const double low_acc = static_cast<double>(low_ok) / ls.low_ids.size();
  const double all_acc = static_cast<double>(all_ok) / ds.samples.size();
  CHECK(low_acc > all_acc);
  CHECK(low_acc >= 0.95);
}

TEST_CASE("a clean dataset passes through refinement nearly untouched") {
  DomainSpec spec;
  spec.seed = 21;
  const Dataset ds = generate(spec);

  TrainConfig cfg;
  cfg.use_dl4nd = true;
  cfg.seed = 22;
  const RunArtifacts art = run_nag_pipeline(cfg, ds, initial_for(cfg, ds));
  std::size_t changed = 0;
  REQUIRE(art.refined.has_value());
  for (std::size_t i = 0; i < ds.samples.size(); ++i)
    if (ds.samples[i].noisy_label != art.refined->samples[i].noisy_label) ++changed;
  CHECK(static_cast<double>(changed) / ds.samples.size() < 0.02);

  // Final accuracy stays within a point of the plain run.
  TrainConfig plain;
  plain.seed = 22;
  const RunArtifacts base = train(plain, ds, initial_for(plain, ds));
  const double acc_pipeline = classification_accuracy(art.final_params, ds, true);
  const double acc_plain = classification_accuracy(base.final_params, ds, true);
  CHECK(acc_pipeline >= acc_plain - 0.01);
}

TEST_CASE("pipeline runs are bit-identical under a repeated seed") {
  DomainSpec spec;
  spec.num_classes = 5;
  spec.num_domains = 3;
  spec.samples_per_cell = 12;
  spec.seed = 31;
  const Dataset clean = generate(spec);
  NoiseSpec noise;
  noise.pairs = {{0, 1}, {2, 3}};
  noise.ratio = 0.3;
  noise.seed = 32;
  const Dataset ds = inject_pairwise_noise(clean, noise);

  TrainConfig cfg;
  cfg.use_dl4nd = true;
  cfg.total_steps = 200;
  cfg.seed = 33;
  const ModelParams initial = initial_for(cfg, ds);
  const RunArtifacts a = run_nag_pipeline(cfg, ds, initial);
  const RunArtifacts b = run_nag_pipeline(cfg, ds, initial);
  CHECK(flatten(a.final_params) == flatten(b.final_params));
  CHECK(a.loss_history == b.loss_history);
  CHECK(a.refine_step_used == b.refine_step_used);
  REQUIRE(a.relabel_outcome.has_value());
  REQUIRE(b.relabel_outcome.has_value());
  CHECK(a.relabel_outcome->assignment == b.relabel_outcome->assignment);
}

TEST_CASE("prediction accuracy counts argmax hits") {
  ModelParams p;
  p.layer_dims = {2, 2};
  p.weights = {{10.0, 0.0, 0.0, 10.0}};
  p.biases = {{0.0, 0.0}};

  Dataset ds;
  ds.num_classes = 2;
  ds.num_domains = 1;
  ds.dim = 2;
  ds.has_true_labels = true;
  Sample a;
  a.id = 0;
  a.domain = 0;
  a.x = {1.0, 0.0};
  a.noisy_label = 0;
  a.true_label = 0;
  Sample b = a;
  b.id = 1;
  b.x = {0.0, 1.0};
  b.noisy_label = 0;  // predicted class is 1
  b.true_label = 1;
  ds.samples = {a, b};

  CHECK(classification_accuracy(p, ds, false) == doctest::Approx(0.5));
  CHECK(classification_accuracy(p, ds, true) == doctest::Approx(1.0));
  Dataset no_truth = ds;
  no_truth.has_true_labels = false;
  CHECK_THROWS_AS((void)classification_accuracy(p, no_truth, true), MetricUnavailableError);
}
