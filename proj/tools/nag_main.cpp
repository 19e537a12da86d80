#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nag/config.hpp"
#include "nag/datagen.hpp"
#include "nag/dataset.hpp"
#include "nag/errors.hpp"
#include "nag/gmm.hpp"
#include "nag/harness.hpp"
#include "nag/model.hpp"
#include "nag/relabel.hpp"
#include "nag/report.hpp"
#include "nag/rng.hpp"
#include "nag/trainer.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonArgs* args) {
  cmd->add_option("--config", args->config_path, "Config file (key = value lines)");
  cmd->add_option("--set", args->sets, "Override a config key, e.g. --set noise.ratio=0.2");
  cmd->add_option("--seed", args->seed, "Override the master seed (highest precedence)");
}

nag::Config resolve(const CommonArgs& args) {
  std::map<std::string, std::string> file_values;
  if (!args.config_path.empty()) file_values = nag::parse_config_file(args.config_path);
  std::vector<std::pair<std::string, std::string>> overrides;
  for (const std::string& s : args.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw nag::ConfigError(s, "--set expects key=value");
    overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  return nag::resolve_config(file_values, overrides, args.seed);
}

void write_or_print(const std::string& body, const std::string& path) {
  if (path.empty()) {
    std::fputs(body.c_str(), stdout);
    return;
  }
  FILE* f = std::fopen(path.c_str(), "w");
  if (f == nullptr) throw nag::ParseError("cannot open for write: " + path);
  std::fputs(body.c_str(), f);
  std::fclose(f);
}

nag::ReportFormat parse_format(const std::string& format) {
  if (format == "structured") return nag::ReportFormat::kStructured;
  if (format == "tabular") return nag::ReportFormat::kTabular;
  throw nag::ConfigError("format", "expected 'structured' or 'tabular', got '" + format + "'");
}

int cmd_gen(const CommonArgs& common, const std::string& out_path) {
  const nag::Config cfg = resolve(common);
  nag::Dataset ds = nag::generate(cfg.domain);
  if (cfg.noise.ratio > 0.0 && !cfg.noise.pairs.empty())
    ds = nag::inject_pairwise_noise(ds, cfg.noise);
  nag::save_dataset(ds, out_path);
  std::printf("gen: wrote %zu samples to %s\n", ds.samples.size(), out_path.c_str());
  return 0;
}

int cmd_train(const CommonArgs& common, const std::string& data_path,
              const std::string& checkpoint_path, const std::string& report_path) {
  const nag::Config cfg = resolve(common);
  const nag::Dataset ds = nag::load_dataset(data_path);
  const std::vector<int> dims = cfg.train.layer_dims(ds.dim, ds.num_classes);
  const nag::ModelParams init =
      nag::init_params(dims, nag::child_seed(cfg.master_seed, 14));
  const nag::RunArtifacts art = cfg.train.use_dl4nd
                                    ? nag::run_nag_pipeline(cfg.train, ds, init)
                                    : nag::train(cfg.train, ds, init);
  if (!checkpoint_path.empty()) nag::save_params(art.final_params, checkpoint_path);
  const nag::Dataset& trained_on = art.refined ? *art.refined : ds;
  write_or_print(nag::train_report_to_string(art, trained_on, cfg.resolved), report_path);
  return 0;
}

int cmd_refine(const CommonArgs& common, const std::string& data_path,
               const std::string& checkpoint_path, const std::string& report_path,
               const std::string& out_path) {
  const nag::Config cfg = resolve(common);
  const nag::Dataset ds = nag::load_dataset(data_path);
  const nag::ModelParams params = nag::load_params(checkpoint_path);
  const nag::RefineResult res =
      nag::refine_once(params, ds, cfg.train.gmm, cfg.train.split_threshold);
  write_or_print(nag::relabel_report_to_string(res.outcome, res.gmm, res.fallback, cfg.resolved),
                 report_path);
  if (!out_path.empty()) {
    const nag::Dataset refined =
        res.outcome ? nag::with_labels(ds, res.outcome->assignment) : ds;
    nag::save_dataset(refined, out_path);
  }
  return 0;
}

int cmd_eval(const CommonArgs& common, const std::string& report_path,
             const std::string& format, bool sweep) {
  const nag::Config cfg = resolve(common);
  nag::ExperimentSpec spec = nag::make_experiment(cfg);
  nag::Report report;
  if (sweep) {
    report = nag::noise_sweep(spec);
  } else {
    if (spec.noise_ratios.size() != 1) spec.noise_ratios = {cfg.noise.ratio};
    report = nag::leave_one_out(spec);
  }
  const nag::ReportFormat fmt = parse_format(format);
  write_or_print(fmt == nag::ReportFormat::kStructured ? nag::report_to_string(report)
                                                       : nag::report_to_csv(report),
                 report_path);
  return 0;
}

int cmd_distances(const CommonArgs& common, const std::string& data_path,
                  const std::string& checkpoint_path, const std::string& mean_source,
                  const std::string& report_path, const std::string& format) {
  const nag::Config cfg = resolve(common);
  const nag::Dataset ds = nag::load_dataset(data_path);

  nag::Features feats;
  if (checkpoint_path.empty()) {
    for (const auto& s : ds.samples) feats[s.id] = s.x;  // raw inputs, pre-training view
  } else {
    const nag::ModelParams params = nag::load_params(checkpoint_path);
    feats = nag::extract_features(params, ds);
  }

  nag::MeanSource source;
  std::set<nag::SampleId> low_ids;
  if (mean_source == "all") {
    source = nag::MeanSource::kAll;
  } else if (mean_source == "low_loss_only") {
    if (checkpoint_path.empty())
      throw nag::ConfigError("mean_source", "low_loss_only requires --checkpoint for losses");
    source = nag::MeanSource::kLowLossOnly;
    const nag::ModelParams params = nag::load_params(checkpoint_path);
    const auto losses = nag::per_sample_losses(params, ds);
    try {
      const nag::GmmParams g = nag::fit_gmm(losses, cfg.train.gmm);
      low_ids = nag::split(losses, g, cfg.train.split_threshold).low_ids;
    } catch (const nag::DegenerateFitError&) {
      for (const auto& s : ds.samples) low_ids.insert(s.id);  // all low-loss
    }
  } else {
    throw nag::ConfigError("mean_source",
                           "expected 'all' or 'low_loss_only', got '" + mean_source + "'");
  }

  const nag::DistanceStats stats = nag::distance_stats(
      feats, ds, source, source == nag::MeanSource::kLowLossOnly ? &low_ids : nullptr);
  const nag::ReportFormat fmt = parse_format(format);
  write_or_print(fmt == nag::ReportFormat::kStructured
                     ? nag::distance_stats_to_string(stats, cfg.resolved)
                     : nag::distance_stats_to_csv(stats),
                 report_path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Noise-aware domain-generalization workbench"};
  app.require_subcommand(1);

  CommonArgs common;
  std::string out_path, data_path, checkpoint_path, report_path;
  std::string format = "structured";
  std::string mean_source = "all";

  CLI::App* gen = app.add_subcommand("gen", "Generate a noisy multi-domain dataset");
  add_common(gen, &common);
  gen->add_option("--out", out_path, "Dataset output path")->required();

  CLI::App* train = app.add_subcommand("train", "Train a model (pipeline when method has dl4nd)");
  add_common(train, &common);
  train->add_option("--data", data_path, "Dataset file")->required();
  train->add_option("--checkpoint", checkpoint_path, "Checkpoint output path");
  train->add_option("--report", report_path, "Report output path (stdout when omitted)");

  CLI::App* refine = app.add_subcommand("refine", "Relabel a dataset from a checkpoint");
  add_common(refine, &common);
  refine->add_option("--data", data_path, "Dataset file")->required();
  refine->add_option("--checkpoint", checkpoint_path, "Model checkpoint")->required();
  refine->add_option("--report", report_path, "Report output path (stdout when omitted)");
  refine->add_option("--out", out_path, "Write the refined dataset here");

  CLI::App* eval = app.add_subcommand("eval", "Leave-one-domain-out evaluation");
  add_common(eval, &common);
  eval->add_option("--report", report_path, "Report output path (stdout when omitted)");
  eval->add_option("--format", format, "structured|tabular");

  CLI::App* sweep = app.add_subcommand("sweep", "Noise-ratio sweep over eval.ratios");
  add_common(sweep, &common);
  sweep->add_option("--report", report_path, "Report output path (stdout when omitted)");
  sweep->add_option("--format", format, "structured|tabular");

  CLI::App* distances = app.add_subcommand("distances", "Distance distribution diagnostics");
  add_common(distances, &common);
  distances->add_option("--data", data_path, "Dataset file")->required();
  distances->add_option("--checkpoint", checkpoint_path,
                        "Model checkpoint (raw input features when omitted)");
  distances->add_option("--mean-source", mean_source, "all|low_loss_only");
  distances->add_option("--report", report_path, "Report output path (stdout when omitted)");
  distances->add_option("--format", format, "structured|tabular");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen(common, out_path);
    if (train->parsed()) return cmd_train(common, data_path, checkpoint_path, report_path);
    if (refine->parsed())
      return cmd_refine(common, data_path, checkpoint_path, report_path, out_path);
    if (eval->parsed()) return cmd_eval(common, report_path, format, false);
    if (sweep->parsed()) return cmd_eval(common, report_path, format, true);
    if (distances->parsed())
      return cmd_distances(common, data_path, checkpoint_path, mean_source, report_path, format);
  } catch (const nag::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
