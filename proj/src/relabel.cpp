#include "nag/relabel.hpp"

#include <algorithm>
#include <stdexcept>

#include "nag/errors.hpp"
#include "nag/parallel.hpp"

namespace nag {

ProxyTable build_proxies(const Features& features, const Dataset& ds,
                         const std::set<SampleId>& low_ids) {
  if (low_ids.empty()) throw std::invalid_argument("build_proxies: low_ids empty");
  ProxyTable table;
  table.num_classes = ds.num_classes;
  table.num_domains = ds.num_domains;
  table.cells.resize(static_cast<std::size_t>(ds.num_classes) * ds.num_domains);

  for (const auto& s : ds.samples) {
    if (!low_ids.count(s.id)) continue;
    const auto it = features.find(s.id);
    if (it == features.end())
      throw std::invalid_argument("build_proxies: missing features for a low-loss id");
    auto& cell = table.at(s.noisy_label, s.domain);
    if (!cell) cell = Proxy{FeatureVector(it->second.size(), 0.0), 0};
    axpy(1.0, it->second, &cell->mean);
    cell->count += 1;
  }
  for (auto& cell : table.cells)
    if (cell) scale(1.0 / cell->count, &cell->mean);
  return table;
}

ClassDistance cross_domain_class_distance(const FeatureVector& embedding, int sample_domain,
                                          int y, const ProxyTable& proxies) {
  ClassDistance out;
  double sum = 0.0;
  for (int k = 0; k < proxies.num_domains; ++k) {
    if (k == sample_domain) continue;
    const auto& cell = proxies.at(y, k);
    if (!cell) continue;
    sum += cosine_distance(embedding, cell->mean);
    out.domains_used += 1;
  }
  if (out.domains_used > 0) out.distance = sum / out.domains_used;
  return out;
}

RelabelOutcome relabel(const Features& features, const Dataset& ds, const LossSplit& split,
                       const ProxyTable& proxies) {
  RelabelOutcome out;
  out.records.resize(ds.samples.size());

  // Decisions are independent per sample; slot writes keep record order equal
  // to id order because ids are sorted below before dispatch. Exceptions must
  // not escape a parallel body, so inputs are validated first.
  std::vector<const Sample*> by_id;
  by_id.reserve(ds.samples.size());
  for (const auto& s : ds.samples) by_id.push_back(&s);
  std::sort(by_id.begin(), by_id.end(),
            [](const Sample* a, const Sample* b) { return a->id < b->id; });
  for (SampleId id : split.high_ids)
    if (!features.count(id))
      throw std::invalid_argument("relabel: missing features for a high-loss id");

  par::parallel_for(by_id.size(), [&](std::size_t i) {
    const Sample& s = *by_id[i];
    RelabelRecord rec;
    rec.id = s.id;
    rec.old_label = s.noisy_label;
    rec.new_label = s.noisy_label;
    if (split.high_ids.count(s.id)) {
      const auto fit = features.find(s.id);
      rec.class_distances.resize(proxies.num_classes);
      int best = -1;
      for (int y = 0; y < proxies.num_classes; ++y) {
        rec.class_distances[y] =
            cross_domain_class_distance(fit->second, s.domain, y, proxies);
        const auto& cd = rec.class_distances[y];
        if (cd.domains_used == 0) continue;
        if (best < 0 || cd.distance < rec.class_distances[best].distance) best = y;
      }
      // A sample whose own class has no cross-domain proxy cannot be compared
      // fairly against the candidates, so it abstains (label kept). This also
      // covers the single-domain case where every class is unavailable.
      if (best < 0 || rec.class_distances[rec.old_label].domains_used == 0) {
        rec.decision = Decision::kAbstained;
      } else {
        rec.new_label = best;
        rec.decision = best == rec.old_label ? Decision::kKept : Decision::kRelabeled;
      }
    }
    out.records[i] = std::move(rec);
  });

  for (const auto& rec : out.records) {
    out.assignment[rec.id] = rec.new_label;
    if (rec.decision == Decision::kRelabeled) ++out.num_relabeled;
    if (rec.decision == Decision::kAbstained) ++out.num_abstained;
  }
  if (ds.has_true_labels) {
    std::map<SampleId, int> before;
    for (const auto& s : ds.samples) before[s.id] = s.noisy_label;
    out.label_accuracy_before = label_accuracy(before, ds);
    out.label_accuracy_after = label_accuracy(out.assignment, ds);
  }
  return out;
}

Dataset with_labels(const Dataset& ds, const std::map<SampleId, int>& assignment) {
  Dataset out = ds;
  for (auto& s : out.samples) {
    const auto it = assignment.find(s.id);
    if (it == assignment.end())
      throw std::invalid_argument("with_labels: assignment missing a sample id");
    if (it->second < 0 || it->second >= ds.num_classes)
      throw std::invalid_argument("with_labels: label out of range");
    s.noisy_label = it->second;
  }
  return out;
}

double separability_rate(const Features& features, const Dataset& ds, const ProxyTable& proxies,
                         bool use_true_labels) {
  if (ds.samples.empty()) throw std::invalid_argument("separability_rate: empty dataset");
  if (use_true_labels && !ds.has_true_labels)
    throw MetricUnavailableError("separability_rate: dataset lacks true labels");

  for (const auto& s : ds.samples)
    if (!features.count(s.id))
      throw std::invalid_argument("separability_rate: missing features for a sample");

  std::vector<int> ok(ds.samples.size(), 0);
  par::parallel_for(ds.samples.size(), [&](std::size_t i) {
    const Sample& s = ds.samples[i];
    const int own = use_true_labels ? s.true_label : s.noisy_label;
    const auto fit = features.find(s.id);
    const ClassDistance own_d =
        cross_domain_class_distance(fit->second, s.domain, own, proxies);
    if (own_d.domains_used == 0) return;  // no evidence for own class: not separable
    bool wins = true;
    for (int y = 0; y < proxies.num_classes && wins; ++y) {
      if (y == own) continue;
      const ClassDistance d = cross_domain_class_distance(fit->second, s.domain, y, proxies);
      if (d.domains_used == 0) continue;  // unavailable classes leave the comparison
      if (!(own_d.distance < d.distance)) wins = false;
    }
    ok[i] = wins ? 1 : 0;
  });
  std::size_t wins = 0;
  for (int v : ok) wins += v;
  return static_cast<double>(wins) / static_cast<double>(ds.samples.size());
}

double label_accuracy(const std::map<SampleId, int>& assignment, const Dataset& ds) {
  if (!ds.has_true_labels)
    throw MetricUnavailableError("label_accuracy: dataset lacks true labels");
  if (ds.samples.empty()) throw MetricUnavailableError("label_accuracy: empty dataset");
  std::size_t ok = 0;
  for (const auto& s : ds.samples) {
    const auto it = assignment.find(s.id);
    if (it == assignment.end())
      throw std::invalid_argument("label_accuracy: assignment missing a sample id");
    if (it->second == s.true_label) ++ok;
  }
  return static_cast<double>(ok) / static_cast<double>(ds.samples.size());
}

namespace {

SummaryStats summarize(std::vector<double> v) {
  SummaryStats s;
  s.count = v.size();
  if (v.empty()) return s;
  std::sort(v.begin(), v.end());
  s.min = v.front();
  s.max = v.back();
  s.q1 = quantile_sorted(v, 0.25);
  s.median = quantile_sorted(v, 0.50);
  s.q3 = quantile_sorted(v, 0.75);
  return s;
}

}  // namespace

DistanceStats distance_stats(const Features& features, const Dataset& ds, MeanSource source,
                             const std::set<SampleId>* low_ids) {
  if (source == MeanSource::kLowLossOnly && low_ids == nullptr)
    throw std::invalid_argument("distance_stats: low_loss_only requires low_ids");

  DistanceStats out;
  out.source = source;

  // Group means per (class, domain) cell from the configured member set.
  std::map<std::pair<int, int>, Proxy> means;
  for (const auto& s : ds.samples) {
    if (source == MeanSource::kLowLossOnly && !low_ids->count(s.id)) continue;
    const auto it = features.find(s.id);
    if (it == features.end())
      throw std::invalid_argument("distance_stats: missing features for a sample");
    auto& cell = means[{s.noisy_label, s.domain}];
    if (cell.count == 0) cell.mean.assign(it->second.size(), 0.0);
    axpy(1.0, it->second, &cell.mean);
    cell.count += 1;
  }
  for (auto& [key, cell] : means) scale(1.0 / cell.count, &cell.mean);

  for (int c = 0; c < ds.num_classes; ++c)
    for (int d = 0; d < ds.num_domains; ++d)
      if (!means.count({c, d})) out.omitted_cells.emplace_back(c, d);

  std::map<std::pair<int, int>, std::vector<double>> cell_d;
  std::map<std::pair<int, int>, std::vector<double>> pair_d;
  std::vector<double> cross_domain;
  std::vector<double> cross_class;
  for (const auto& s : ds.samples) {
    const FeatureVector& e = features.at(s.id);
    const auto own = means.find({s.noisy_label, s.domain});
    if (own != means.end())
      cell_d[{s.noisy_label, s.domain}].push_back(cosine_distance(e, own->second.mean));
    for (int k = 0; k < ds.num_domains; ++k) {
      if (k == s.domain) continue;
      const auto it = means.find({s.noisy_label, k});
      if (it != means.end()) cross_domain.push_back(cosine_distance(e, it->second.mean));
    }
    for (int c = 0; c < ds.num_classes; ++c) {
      if (c == s.noisy_label) continue;
      const auto it = means.find({c, s.domain});
      if (it == means.end()) continue;
      const double d = cosine_distance(e, it->second.mean);
      cross_class.push_back(d);
      pair_d[{s.noisy_label, c}].push_back(d);
    }
  }

  for (auto& [key, v] : cell_d) out.per_cell[key] = summarize(std::move(v));
  for (auto& [key, v] : pair_d) out.per_class_pair[key] = summarize(std::move(v));
  out.within_class_cross_domain = summarize(std::move(cross_domain));
  out.cross_class_within_domain = summarize(std::move(cross_class));
  out.overlap = out.cross_class_within_domain.count > 0 &&
                out.within_class_cross_domain.count > 0 &&
                out.cross_class_within_domain.min < out.within_class_cross_domain.max;
  return out;
}

}  // namespace nag
