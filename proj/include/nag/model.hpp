#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "nag/dataset.hpp"
#include "nag/numerics.hpp"

namespace nag {

// MLP with tanh hidden layers and a linear classification head. layer_dims
// is the full chain: input, hidden..., embedding, num_classes. The embedding
// is the activation feeding the head.
struct ModelParams {
  std::vector<int> layer_dims;
  // weights[l] is row-major (layer_dims[l+1] x layer_dims[l]).
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;

  int input_dim() const { return layer_dims.front(); }
  int num_classes() const { return layer_dims.back(); }
  int embedding_dim() const { return layer_dims[layer_dims.size() - 2]; }
};

struct ForwardResult {
  FeatureVector embedding;
  std::vector<double> logits;
  std::vector<double> probs;
  double loss = 0.0;
};

struct BatchItem {
  SampleId id = 0;
  const FeatureVector* x = nullptr;
  int label = 0;
};

// Differentiable per-sample loss term added on top of cross-entropy. Called
// with the sample's softmax output; returns the extra loss value and its
// gradient with respect to the logits.
struct LogitTermResult {
  double loss = 0.0;
  std::vector<double> dlogits;  // empty means zero
};
using ExtraLogitTerm = std::function<LogitTermResult(SampleId, const std::vector<double>& probs)>;

struct BatchGradients {
  std::vector<double> losses;  // per-sample total loss (cross-entropy + extra)
  double mean_loss = 0.0;
  std::vector<double> grad;  // flat, d(mean_loss)/d(params)
};

std::size_t param_count(const std::vector<int>& layer_dims);
std::vector<double> flatten(const ModelParams& p);
void unflatten(const std::vector<double>& flat, ModelParams* p);

ModelParams init_params(const std::vector<int>& layer_dims, std::uint64_t seed);

std::vector<double> softmax(const std::vector<double>& logits);

ForwardResult forward(const ModelParams& p, const FeatureVector& x, int label);

BatchGradients batch_gradients(const ModelParams& p, const std::vector<BatchItem>& batch,
                               const ExtraLogitTerm& extra = nullptr);
// Serial reference with plain left-to-right accumulation; used by tests and
// the kernel benchmark.
BatchGradients batch_gradients_reference(const ModelParams& p,
                                         const std::vector<BatchItem>& batch,
                                         const ExtraLogitTerm& extra = nullptr);

// Mean total loss only (no gradient); the finite-difference oracle in tests
// evaluates this at perturbed parameters.
double batch_mean_loss(const ModelParams& p, const std::vector<BatchItem>& batch,
                       const ExtraLogitTerm& extra = nullptr);

void params_axpy(double alpha, const std::vector<double>& flat_grad, ModelParams* p);

std::map<SampleId, FeatureVector> extract_features(const ModelParams& p, const Dataset& ds);
std::map<SampleId, double> per_sample_losses(const ModelParams& p, const Dataset& ds);

void save_params(const ModelParams& p, const std::string& path);
ModelParams load_params(const std::string& path);

}  // namespace nag
