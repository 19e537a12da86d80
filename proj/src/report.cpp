#include "nag/report.hpp"

#include <fstream>

#include "json.hpp"
#include "nag/dataset.hpp"
#include "nag/errors.hpp"

namespace nag {

namespace {

using json = nlohmann::ordered_json;

// -1 sentinels become null in the structured form so "unavailable" is
// explicit rather than a plausible-looking number.
json opt_num(double v) { return v < 0.0 ? json(nullptr) : json(v); }
json opt_count(std::int64_t v) { return v < 0 ? json(nullptr) : json(v); }
double num_or(const json& j, double fallback) {
  return j.is_null() ? fallback : j.get<double>();
}
std::int64_t count_or(const json& j, std::int64_t fallback) {
  return j.is_null() ? fallback : j.get<std::int64_t>();
}

json gmm_to_json(const GmmParams& g) {
  return json{{"means", {g.means[0], g.means[1]}},
              {"variances", {g.variances[0], g.variances[1]}},
              {"weights", {g.weights[0], g.weights[1]}},
              {"log_likelihood", g.log_likelihood},
              {"iterations_used", g.iterations_used},
              {"ll_trace", g.ll_trace}};
}

GmmParams gmm_from_json(const json& j) {
  GmmParams g;
  for (int k = 0; k < 2; ++k) {
    g.means[k] = j.at("means").at(k).get<double>();
    g.variances[k] = j.at("variances").at(k).get<double>();
    g.weights[k] = j.at("weights").at(k).get<double>();
  }
  g.log_likelihood = j.at("log_likelihood").get<double>();
  g.iterations_used = j.at("iterations_used").get<int>();
  g.ll_trace = j.at("ll_trace").get<std::vector<double>>();
  return g;
}

json balance_to_json(const BalanceTable& b) {
  return json{{"num_classes", b.num_classes},
              {"num_domains", b.num_domains},
              {"proportions", b.proportions},
              {"uniform_baseline", b.uniform_baseline},
              {"l1_gap", b.l1_gap}};
}

BalanceTable balance_from_json(const json& j) {
  BalanceTable b;
  b.num_classes = j.at("num_classes").get<int>();
  b.num_domains = j.at("num_domains").get<int>();
  b.proportions = j.at("proportions").get<std::vector<std::vector<double>>>();
  b.uniform_baseline = j.at("uniform_baseline").get<double>();
  b.l1_gap = j.at("l1_gap").get<double>();
  return b;
}

json fold_to_json(const FoldResult& f) {
  json j{{"method", f.method},
         {"noise_ratio", f.noise_ratio},
         {"seed", f.seed},
         {"held_out_domain", f.held_out_domain},
         {"id_accuracy", f.id_accuracy},
         {"ood_accuracy", f.ood_accuracy},
         {"label_accuracy_before", opt_num(f.label_accuracy_before)},
         {"label_accuracy_after", opt_num(f.label_accuracy_after)},
         {"num_relabeled", opt_count(f.num_relabeled)},
         {"num_abstained", opt_count(f.num_abstained)},
         {"gmm_fallback", f.gmm_fallback},
         {"gmm", f.gmm ? gmm_to_json(*f.gmm) : json(nullptr)},
         {"separability", opt_num(f.separability)},
         {"low_loss_balance", balance_to_json(f.low_loss_balance)},
         {"dataset_checksum", f.dataset_checksum}};
  return j;
}

FoldResult fold_from_json(const json& j) {
  FoldResult f;
  f.method = j.at("method").get<std::string>();
  f.noise_ratio = j.at("noise_ratio").get<double>();
  f.seed = j.at("seed").get<std::uint64_t>();
  f.held_out_domain = j.at("held_out_domain").get<int>();
  f.id_accuracy = j.at("id_accuracy").get<double>();
  f.ood_accuracy = j.at("ood_accuracy").get<double>();
  f.label_accuracy_before = num_or(j.at("label_accuracy_before"), -1.0);
  f.label_accuracy_after = num_or(j.at("label_accuracy_after"), -1.0);
  f.num_relabeled = count_or(j.at("num_relabeled"), -1);
  f.num_abstained = count_or(j.at("num_abstained"), -1);
  f.gmm_fallback = j.at("gmm_fallback").get<bool>();
  if (!j.at("gmm").is_null()) f.gmm = gmm_from_json(j.at("gmm"));
  f.separability = num_or(j.at("separability"), -1.0);
  f.low_loss_balance = balance_from_json(j.at("low_loss_balance"));
  f.dataset_checksum = j.at("dataset_checksum").get<std::uint64_t>();
  return f;
}

json aggregate_to_json(const Aggregate& a) {
  return json{{"method", a.method},
              {"noise_ratio", a.noise_ratio},
              {"num_seeds", a.num_seeds},
              {"num_folds", a.num_folds},
              {"id_mean", a.id_mean},
              {"id_std_over_seeds", a.id_std_over_seeds},
              {"id_std_over_folds", a.id_std_over_folds},
              {"ood_mean", a.ood_mean},
              {"ood_std_over_seeds", a.ood_std_over_seeds},
              {"ood_std_over_folds", a.ood_std_over_folds},
              {"label_before_mean", opt_num(a.label_before_mean)},
              {"label_after_mean", opt_num(a.label_after_mean)},
              {"separability_mean", opt_num(a.separability_mean)}};
}

Aggregate aggregate_from_json(const json& j) {
  Aggregate a;
  a.method = j.at("method").get<std::string>();
  a.noise_ratio = j.at("noise_ratio").get<double>();
  a.num_seeds = j.at("num_seeds").get<int>();
  a.num_folds = j.at("num_folds").get<int>();
  a.id_mean = j.at("id_mean").get<double>();
  a.id_std_over_seeds = j.at("id_std_over_seeds").get<double>();
  a.id_std_over_folds = j.at("id_std_over_folds").get<double>();
  a.ood_mean = j.at("ood_mean").get<double>();
  a.ood_std_over_seeds = j.at("ood_std_over_seeds").get<double>();
  a.ood_std_over_folds = j.at("ood_std_over_folds").get<double>();
  a.label_before_mean = num_or(j.at("label_before_mean"), -1.0);
  a.label_after_mean = num_or(j.at("label_after_mean"), -1.0);
  a.separability_mean = num_or(j.at("separability_mean"), -1.0);
  return a;
}

std::string csv_num(double v) { return v < 0.0 ? "unavailable" : format_double(v); }
std::string csv_count(std::int64_t v) {
  return v < 0 ? "unavailable" : std::to_string(v);
}

void write_file(const std::string& path, const std::string& body) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open for write: " + path);
  out << body;
  if (!out) throw ParseError("write failed: " + path);
}

json summary_to_json(const SummaryStats& s) {
  return json{{"count", s.count}, {"min", s.min},    {"q1", s.q1},
              {"median", s.median}, {"q3", s.q3},    {"max", s.max}};
}

std::string summary_csv(const std::string& kind, const std::string& a, const std::string& b,
                        const SummaryStats& s) {
  std::string row = kind + ',' + a + ',' + b + ',' + std::to_string(s.count);
  for (double v : {s.min, s.q1, s.median, s.q3, s.max}) row += ',' + format_double(v);
  return row + '\n';
}

}  // namespace

std::string report_to_string(const Report& report) {
  json j;
  j["version"] = report.version;
  j["config"] = report.config;
  j["folds"] = json::array();
  for (const auto& f : report.folds) j["folds"].push_back(fold_to_json(f));
  j["aggregates"] = json::array();
  for (const auto& a : report.aggregates) j["aggregates"].push_back(aggregate_to_json(a));
  return j.dump(2) + "\n";
}

std::string report_to_csv(const Report& report) {
  std::string out =
      "method,noise_ratio,seed,held_out_domain,id_accuracy,ood_accuracy,"
      "label_accuracy_before,label_accuracy_after,num_relabeled,num_abstained,"
      "separability,gmm_fallback,dataset_checksum\n";
  for (const auto& f : report.folds) {
    out += f.method + ',' + format_double(f.noise_ratio) + ',' + std::to_string(f.seed) + ',' +
           std::to_string(f.held_out_domain) + ',' + format_double(f.id_accuracy) + ',' +
           format_double(f.ood_accuracy) + ',' + csv_num(f.label_accuracy_before) + ',' +
           csv_num(f.label_accuracy_after) + ',' + csv_count(f.num_relabeled) + ',' +
           csv_count(f.num_abstained) + ',' + csv_num(f.separability) + ',' +
           (f.gmm_fallback ? "1" : "0") + ',' + std::to_string(f.dataset_checksum) + '\n';
  }
  return out;
}

void emit_report(const Report& report, const std::string& path, ReportFormat format) {
  write_file(path, format == ReportFormat::kStructured ? report_to_string(report)
                                                       : report_to_csv(report));
}

Report parse_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(std::string("report parse: ") + e.what());
  }
  Report r;
  try {
    r.version = j.at("version").get<std::string>();
    if (r.version != "nagreport v1") throw ParseError("unsupported report version " + r.version);
    r.config = j.at("config").get<std::map<std::string, std::string>>();
    for (const auto& jf : j.at("folds")) r.folds.push_back(fold_from_json(jf));
    for (const auto& ja : j.at("aggregates")) r.aggregates.push_back(aggregate_from_json(ja));
  } catch (const json::exception& e) {
    throw ParseError(std::string("report parse: ") + e.what());
  }
  return r;
}

std::string train_report_to_string(const RunArtifacts& art, const Dataset& ds,
                                   const std::map<std::string, std::string>& config) {
  json j;
  j["version"] = "nagtrain v1";
  j["config"] = config;
  j["steps_executed"] = art.loss_history.size();
  j["final_loss"] = art.loss_history.empty() ? json(nullptr) : json(art.loss_history.back());
  j["train_accuracy"] = classification_accuracy(art.final_params, ds, false);
  j["train_accuracy_true"] =
      ds.has_true_labels ? json(classification_accuracy(art.final_params, ds, true))
                         : json(nullptr);
  if (art.refine_step_used >= 0) {
    j["refine_step_used"] = art.refine_step_used;
    j["gmm_fallback"] = art.gmm_fallback;
    j["gmm"] = art.gmm ? gmm_to_json(*art.gmm) : json(nullptr);
    if (art.relabel_outcome) {
      j["num_relabeled"] = art.relabel_outcome->num_relabeled;
      j["num_abstained"] = art.relabel_outcome->num_abstained;
      j["label_accuracy_before"] = opt_num(art.relabel_outcome->label_accuracy_before);
      j["label_accuracy_after"] = opt_num(art.relabel_outcome->label_accuracy_after);
    }
  }
  return j.dump(2) + "\n";
}

std::string relabel_report_to_string(const std::optional<RelabelOutcome>& outcome,
                                     const std::optional<GmmParams>& gmm, bool fallback,
                                     const std::map<std::string, std::string>& config) {
  json j;
  j["version"] = "nagrefine v1";
  j["config"] = config;
  j["gmm_fallback"] = fallback;
  j["gmm"] = gmm ? gmm_to_json(*gmm) : json(nullptr);
  if (outcome) {
    j["num_relabeled"] = outcome->num_relabeled;
    j["num_abstained"] = outcome->num_abstained;
    j["label_accuracy_before"] = opt_num(outcome->label_accuracy_before);
    j["label_accuracy_after"] = opt_num(outcome->label_accuracy_after);
    json recs = json::array();
    for (const auto& rec : outcome->records) {
      json r{{"id", rec.id},
             {"old_label", rec.old_label},
             {"new_label", rec.new_label},
             {"decision", rec.decision == Decision::kKept        ? "kept"
                          : rec.decision == Decision::kRelabeled ? "relabeled"
                                                                 : "abstained"}};
      if (!rec.class_distances.empty()) {
        json dists = json::array();
        for (const auto& cd : rec.class_distances)
          dists.push_back(json{{"distance", cd.domains_used > 0 ? json(cd.distance) : json(nullptr)},
                               {"domains_used", cd.domains_used}});
        r["class_distances"] = std::move(dists);
      }
      recs.push_back(std::move(r));
    }
    j["records"] = std::move(recs);
  } else {
    j["num_relabeled"] = nullptr;
    j["num_abstained"] = nullptr;
  }
  return j.dump(2) + "\n";
}

std::string distance_stats_to_string(const DistanceStats& stats,
                                     const std::map<std::string, std::string>& config) {
  json j;
  j["version"] = "nagdist v1";
  j["config"] = config;
  j["mean_source"] = stats.source == MeanSource::kAll ? "all" : "low_loss_only";
  j["within_class_cross_domain"] = summary_to_json(stats.within_class_cross_domain);
  j["cross_class_within_domain"] = summary_to_json(stats.cross_class_within_domain);
  j["overlap"] = stats.overlap;
  json cells = json::array();
  for (const auto& [key, s] : stats.per_cell) {
    json c = summary_to_json(s);
    c["class"] = key.first;
    c["domain"] = key.second;
    cells.push_back(std::move(c));
  }
  j["per_cell"] = std::move(cells);
  json pairs = json::array();
  for (const auto& [key, s] : stats.per_class_pair) {
    json c = summary_to_json(s);
    c["from_class"] = key.first;
    c["to_class"] = key.second;
    pairs.push_back(std::move(c));
  }
  j["per_class_pair"] = std::move(pairs);
  json omitted = json::array();
  for (const auto& [c, d] : stats.omitted_cells) omitted.push_back(json{{"class", c}, {"domain", d}});
  j["omitted_cells"] = std::move(omitted);
  return j.dump(2) + "\n";
}

std::string distance_stats_to_csv(const DistanceStats& stats) {
  std::string out = "kind,key_a,key_b,count,min,q1,median,q3,max\n";
  out += summary_csv("within_class_cross_domain", "", "", stats.within_class_cross_domain);
  out += summary_csv("cross_class_within_domain", "", "", stats.cross_class_within_domain);
  for (const auto& [key, s] : stats.per_cell)
    out += summary_csv("cell", std::to_string(key.first), std::to_string(key.second), s);
  for (const auto& [key, s] : stats.per_class_pair)
    out += summary_csv("class_pair", std::to_string(key.first), std::to_string(key.second), s);
  out += "overlap,,," + std::string(stats.overlap ? "1" : "0") + ",,,,,\n";
  return out;
}

}  // namespace nag
