#include "nag/datagen.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

#include "nag/errors.hpp"
#include "nag/rng.hpp"

namespace nag {

std::vector<std::pair<int, int>> default_noise_pairs() {
  return {{0, 6}, {1, 7}, {3, 5}, {4, 9}, {5, 3}, {6, 0}, {7, 1}, {9, 4}};
}

namespace {

constexpr double kPi = 3.14159265358979323846;

std::vector<FeatureVector> make_prototypes(const DomainSpec& spec, Rng* rng) {
  const int C = spec.num_classes;
  const int d = spec.feature_dim;
  std::vector<FeatureVector> proto(C, FeatureVector(d, 0.0));
  for (auto& p : proto)
    for (double& v : p) v = rng->next_gaussian() * spec.class_separation;
  // Repel until every pair is at least class_separation apart. Moves are
  // symmetric along the connecting line, so the pass is deterministic.
  for (int pass = 0; pass < 200; ++pass) {
    bool moved = false;
    for (int a = 0; a < C; ++a) {
      for (int b = a + 1; b < C; ++b) {
        FeatureVector diff(d);
        for (int k = 0; k < d; ++k) diff[k] = proto[a][k] - proto[b][k];
        double dist = norm2(diff);
        if (dist >= spec.class_separation) continue;
        moved = true;
        if (dist < 1e-9) {
          // Coincident prototypes: split along a seeded direction.
          for (int k = 0; k < d; ++k) diff[k] = rng->next_gaussian();
          dist = norm2(diff);
        }
        const double push = 0.5 * (spec.class_separation - dist) / dist;
        for (int k = 0; k < d; ++k) {
          proto[a][k] += push * diff[k];
          proto[b][k] -= push * diff[k];
        }
      }
    }
    if (!moved) break;
  }
  return proto;
}

FeatureVector apply_domain_transform(const FeatureVector& p, double angle_rad,
                                     const FeatureVector& shift) {
  const int d = static_cast<int>(p.size());
  FeatureVector out = p;
  const double c = std::cos(angle_rad);
  const double s = std::sin(angle_rad);
  for (int k = 0; k + 1 < d; k += 2) {
    const double x = p[k];
    const double y = p[k + 1];
    out[k] = c * x - s * y;
    out[k + 1] = s * x + c * y;
  }
  for (int k = 0; k < d; ++k) out[k] += shift[k];
  return out;
}

}  // namespace

Dataset generate(const DomainSpec& spec) {
  if (spec.num_classes <= 0 || spec.num_domains <= 0 || spec.samples_per_cell <= 0)
    throw std::invalid_argument("generate: counts must be positive");
  if (spec.feature_dim < 2)
    throw std::invalid_argument("generate: feature_dim must be >= 2 (rotation needs a plane)");

  Rng master(spec.seed);
  Rng proto_rng(master.child_seed(0));
  Rng shift_rng(master.child_seed(1));
  Rng jitter_rng(master.child_seed(2));

  const auto proto = make_prototypes(spec, &proto_rng);

  std::vector<FeatureVector> shifts(spec.num_domains, FeatureVector(spec.feature_dim, 0.0));
  for (int i = 0; i < spec.num_domains; ++i) {
    FeatureVector dir(spec.feature_dim);
    for (double& v : dir) v = shift_rng.next_gaussian();
    const double n = norm2(dir);
    if (n > 1e-12)
      for (int k = 0; k < spec.feature_dim; ++k)
        shifts[i][k] = spec.translation * dir[k] / n;
  }

  Dataset ds;
  ds.num_classes = spec.num_classes;
  ds.num_domains = spec.num_domains;
  ds.dim = spec.feature_dim;
  ds.has_true_labels = true;
  SampleId next_id = 0;
  for (int dom = 0; dom < spec.num_domains; ++dom) {
    const double angle = dom * spec.rotation_step_deg * kPi / 180.0;
    for (int cls = 0; cls < spec.num_classes; ++cls) {
      const FeatureVector center = apply_domain_transform(proto[cls], angle, shifts[dom]);
      for (int k = 0; k < spec.samples_per_cell; ++k) {
        Sample s;
        s.id = next_id++;
        s.domain = dom;
        s.true_label = cls;
        s.noisy_label = cls;
        s.x = center;
        for (double& v : s.x) v += spec.cluster_noise_sigma * jitter_rng.next_gaussian();
        ds.samples.push_back(std::move(s));
      }
    }
  }
  return ds;
}

Dataset inject_pairwise_noise(const Dataset& dataset, const NoiseSpec& spec) {
  if (spec.ratio < 0.0 || spec.ratio >= 1.0)
    throw std::invalid_argument("inject_pairwise_noise: ratio must be in [0, 1)");
  std::set<int> sources;
  for (const auto& [a, b] : spec.pairs) {
    if (a == b) throw std::invalid_argument("inject_pairwise_noise: pair with class_a == class_b");
    if (a < 0 || b < 0 || a >= dataset.num_classes || b >= dataset.num_classes)
      throw std::invalid_argument("inject_pairwise_noise: pair class out of range");
    if (!sources.insert(a).second)
      throw std::invalid_argument("inject_pairwise_noise: duplicate source class in pairs");
  }
  if (!dataset.has_true_labels)
    throw std::invalid_argument("inject_pairwise_noise: dataset lacks true labels");

  std::vector<int> target(dataset.num_classes, -1);
  for (const auto& [a, b] : spec.pairs) target[a] = b;

  Dataset out = dataset;
  if (spec.ratio >= 0.5) out.high_ratio_warning = true;
  Rng rng(spec.seed);
  // Draw only for eligible samples, in storage order, so a seed fully
  // determines which samples flip.
  for (auto& s : out.samples) {
    const int t = target[s.true_label];
    if (t < 0) continue;
    if (rng.next_double() < spec.ratio) s.noisy_label = t;
  }
  return out;
}

double label_accuracy(const Dataset& ds) {
  if (!ds.has_true_labels)
    throw MetricUnavailableError("label_accuracy: dataset lacks true labels");
  if (ds.samples.empty()) throw MetricUnavailableError("label_accuracy: empty dataset");
  std::size_t ok = 0;
  for (const auto& s : ds.samples)
    if (s.noisy_label == s.true_label) ++ok;
  return static_cast<double>(ok) / static_cast<double>(ds.samples.size());
}

}  // namespace nag
