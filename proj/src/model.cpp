#include "nag/model.hpp"

#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>

#include "nag/errors.hpp"
#include "nag/parallel.hpp"
#include "nag/rng.hpp"

namespace nag {

namespace {

constexpr double kProbFloor = 1e-12;

void check_dims(const std::vector<int>& dims) {
  if (dims.size() < 2) throw std::invalid_argument("model: need at least input and output dims");
  for (int d : dims)
    if (d <= 0) throw std::invalid_argument("model: non-positive layer dim");
}

// Forward keeping all activations; layer L-1 output is the logits.
struct Trace {
  std::vector<std::vector<double>> act;  // act[0] = x, act[l+1] = layer l output
};

Trace forward_trace(const ModelParams& p, const FeatureVector& x) {
  const std::size_t L = p.weights.size();
  Trace t;
  t.act.resize(L + 1);
  t.act[0] = x;
  for (std::size_t l = 0; l < L; ++l) {
    const int in = p.layer_dims[l];
    const int out = p.layer_dims[l + 1];
    std::vector<double> z(out);
    const auto& W = p.weights[l];
    const auto& a = t.act[l];
    for (int r = 0; r < out; ++r) {
      double s = p.biases[l][r];
      const double* row = &W[static_cast<std::size_t>(r) * in];
      for (int c = 0; c < in; ++c) s += row[c] * a[c];
      z[r] = (l + 1 < L) ? std::tanh(s) : s;
    }
    t.act[l + 1] = std::move(z);
  }
  return t;
}

// Per-sample gradient of (cross-entropy + extra) accumulated into flat_grad.
double sample_grad(const ModelParams& p, const BatchItem& item, const ExtraLogitTerm& extra,
                   std::vector<double>& flat_grad) {
  const Trace t = forward_trace(p, *item.x);
  const std::size_t L = p.weights.size();
  const std::vector<double>& logits = t.act[L];
  const std::vector<double> probs = softmax(logits);
  double loss = -std::log(std::max(probs[item.label], kProbFloor));

  // dLoss/dlogits for cross-entropy, then any extra term on top.
  std::vector<double> delta = probs;
  delta[item.label] -= 1.0;
  if (extra) {
    LogitTermResult r = extra(item.id, probs);
    loss += r.loss;
    if (!r.dlogits.empty())
      for (std::size_t k = 0; k < delta.size(); ++k) delta[k] += r.dlogits[k];
  }
  if (!std::isfinite(loss)) throw NumericOverflowError(item.id);

  // Backprop; flat layout is weights then biases per layer, in layer order.
  std::vector<std::size_t> layer_off(L);
  std::size_t offset = 0;
  for (std::size_t l = 0; l < L; ++l) {
    layer_off[l] = offset;
    offset += p.weights[l].size() + p.biases[l].size();
  }

  for (std::size_t l = L; l-- > 0;) {
    const int in = p.layer_dims[l];
    const int out = p.layer_dims[l + 1];
    const auto& a = t.act[l];
    double* gw = &flat_grad[layer_off[l]];
    double* gb = gw + static_cast<std::size_t>(out) * in;
    for (int r = 0; r < out; ++r) {
      const double d = delta[r];
      if (!std::isfinite(d)) throw NumericOverflowError(item.id);
      double* grow = gw + static_cast<std::size_t>(r) * in;
      for (int c = 0; c < in; ++c) grow[c] += d * a[c];
      gb[r] += d;
    }
    if (l == 0) break;
    // delta for previous layer: W^T delta, times tanh'(z) = 1 - a^2.
    std::vector<double> prev(in, 0.0);
    const auto& W = p.weights[l];
    for (int r = 0; r < out; ++r) {
      const double d = delta[r];
      const double* row = &W[static_cast<std::size_t>(r) * in];
      for (int c = 0; c < in; ++c) prev[c] += d * row[c];
    }
    for (int c = 0; c < in; ++c) prev[c] *= 1.0 - a[c] * a[c];
    delta = std::move(prev);
  }
  return loss;
}

void validate_batch(const ModelParams& p, const std::vector<BatchItem>& batch) {
  if (batch.empty()) throw std::invalid_argument("batch_gradients: empty batch");
  for (const auto& item : batch) {
    if (item.label < 0 || item.label >= p.num_classes())
      throw std::invalid_argument("batch_gradients: label out of range");
    if (static_cast<int>(item.x->size()) != p.input_dim())
      throw std::invalid_argument("batch_gradients: input dim mismatch");
  }
}

}  // namespace

std::size_t param_count(const std::vector<int>& layer_dims) {
  check_dims(layer_dims);
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l)
    n += static_cast<std::size_t>(layer_dims[l]) * layer_dims[l + 1] + layer_dims[l + 1];
  return n;
}

std::vector<double> flatten(const ModelParams& p) {
  std::vector<double> flat;
  flat.reserve(param_count(p.layer_dims));
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    flat.insert(flat.end(), p.weights[l].begin(), p.weights[l].end());
    flat.insert(flat.end(), p.biases[l].begin(), p.biases[l].end());
  }
  return flat;
}

void unflatten(const std::vector<double>& flat, ModelParams* p) {
  std::size_t k = 0;
  for (std::size_t l = 0; l < p->weights.size(); ++l) {
    for (double& v : p->weights[l]) v = flat[k++];
    for (double& v : p->biases[l]) v = flat[k++];
  }
  if (k != flat.size()) throw std::invalid_argument("unflatten: size mismatch");
}

ModelParams init_params(const std::vector<int>& layer_dims, std::uint64_t seed) {
  check_dims(layer_dims);
  ModelParams p;
  p.layer_dims = layer_dims;
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    const int in = layer_dims[l];
    const int out = layer_dims[l + 1];
    const double limit = std::sqrt(6.0 / (in + out));
    std::vector<double> W(static_cast<std::size_t>(in) * out);
    for (double& v : W) v = (2.0 * rng.next_double() - 1.0) * limit;
    p.weights.push_back(std::move(W));
    p.biases.emplace_back(out, 0.0);
  }
  return p;
}

std::vector<double> softmax(const std::vector<double>& logits) {
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  std::vector<double> e(logits.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    e[k] = std::exp(logits[k] - mx);
    sum += e[k];
  }
  for (double& v : e) v /= sum;
  return e;
}

ForwardResult forward(const ModelParams& p, const FeatureVector& x, int label) {
  if (static_cast<int>(x.size()) != p.input_dim())
    throw std::invalid_argument("forward: input dim mismatch");
  if (label < 0 || label >= p.num_classes())
    throw std::invalid_argument("forward: label out of range");
  const Trace t = forward_trace(p, x);
  ForwardResult r;
  r.embedding = t.act[t.act.size() - 2];
  r.logits = t.act.back();
  r.probs = softmax(r.logits);
  r.loss = -std::log(std::max(r.probs[label], kProbFloor));
  return r;
}

BatchGradients batch_gradients(const ModelParams& p, const std::vector<BatchItem>& batch,
                               const ExtraLogitTerm& extra) {
  validate_batch(p, batch);
  const std::size_t n = batch.size();
  const std::size_t width = param_count(p.layer_dims);

  BatchGradients out;
  out.losses.assign(n, 0.0);
  // Exceptions must not escape a parallel body; the first one is latched and
  // rethrown after the region.
  std::exception_ptr failure = nullptr;
  std::mutex failure_mutex;
  par::chunked_vector_sum(n, width, &out.grad, [&](std::size_t i, std::vector<double>& acc) {
    try {
      out.losses[i] = sample_grad(p, batch[i], extra, acc);
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  });
  if (failure) std::rethrow_exception(failure);
  const double inv = 1.0 / static_cast<double>(n);
  for (double& g : out.grad) g *= inv;
  out.mean_loss = par::chunked_sum(n, [&](std::size_t i) { return out.losses[i]; }) * inv;
  return out;
}

BatchGradients batch_gradients_reference(const ModelParams& p,
                                         const std::vector<BatchItem>& batch,
                                         const ExtraLogitTerm& extra) {
  validate_batch(p, batch);
  const std::size_t n = batch.size();
  BatchGradients out;
  out.losses.assign(n, 0.0);
  out.grad.assign(param_count(p.layer_dims), 0.0);
  for (std::size_t i = 0; i < n; ++i) out.losses[i] = sample_grad(p, batch[i], extra, out.grad);
  const double inv = 1.0 / static_cast<double>(n);
  for (double& g : out.grad) g *= inv;
  double s = 0.0;
  for (double l : out.losses) s += l;
  out.mean_loss = s * inv;
  return out;
}

double batch_mean_loss(const ModelParams& p, const std::vector<BatchItem>& batch,
                       const ExtraLogitTerm& extra) {
  validate_batch(p, batch);
  double s = 0.0;
  for (const auto& item : batch) {
    ForwardResult r = forward(p, *item.x, item.label);
    double loss = r.loss;
    if (extra) loss += extra(item.id, r.probs).loss;
    s += loss;
  }
  return s / static_cast<double>(batch.size());
}

namespace {
void validate_dataset_inputs(const ModelParams& p, const Dataset& ds) {
  for (const auto& s : ds.samples) {
    if (static_cast<int>(s.x.size()) != p.input_dim())
      throw std::invalid_argument("model: dataset input dim mismatch");
    if (s.noisy_label < 0 || s.noisy_label >= p.num_classes())
      throw std::invalid_argument("model: dataset label out of range");
  }
}
}  // namespace

std::map<SampleId, FeatureVector> extract_features(const ModelParams& p, const Dataset& ds) {
  validate_dataset_inputs(p, ds);
  std::vector<FeatureVector> rows(ds.samples.size());
  par::parallel_for(ds.samples.size(), [&](std::size_t i) {
    rows[i] = forward(p, ds.samples[i].x, ds.samples[i].noisy_label).embedding;
  });
  std::map<SampleId, FeatureVector> out;
  for (std::size_t i = 0; i < ds.samples.size(); ++i)
    out[ds.samples[i].id] = std::move(rows[i]);
  return out;
}

std::map<SampleId, double> per_sample_losses(const ModelParams& p, const Dataset& ds) {
  validate_dataset_inputs(p, ds);
  std::vector<double> loss(ds.samples.size());
  par::parallel_for(ds.samples.size(), [&](std::size_t i) {
    loss[i] = forward(p, ds.samples[i].x, ds.samples[i].noisy_label).loss;
  });
  std::map<SampleId, double> out;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) out[ds.samples[i].id] = loss[i];
  return out;
}

void save_params(const ModelParams& p, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open for write: " + path);
  out << "nagmodel v1 layers=" << p.layer_dims.size() << " dims=";
  for (std::size_t i = 0; i < p.layer_dims.size(); ++i)
    out << (i ? "," : "") << p.layer_dims[i];
  out << "\n";
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    for (std::size_t i = 0; i < p.weights[l].size(); ++i)
      out << (i ? " " : "") << format_double(p.weights[l][i]);
    out << "\n";
    for (std::size_t i = 0; i < p.biases[l].size(); ++i)
      out << (i ? " " : "") << format_double(p.biases[l][i]);
    out << "\n";
  }
  if (!out) throw ParseError("write failed: " + path);
}

ModelParams load_params(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open: " + path);
  std::string header;
  if (!std::getline(in, header) || header.rfind("nagmodel v1 ", 0) != 0)
    throw ParseError("unrecognized checkpoint header");
  const auto dims_pos = header.find("dims=");
  if (dims_pos == std::string::npos) throw ParseError("checkpoint header missing dims");
  std::vector<int> dims;
  {
    std::stringstream ss(header.substr(dims_pos + 5));
    std::string piece;
    while (std::getline(ss, piece, ',')) dims.push_back(std::stoi(piece));
  }
  check_dims(dims);
  ModelParams p;
  p.layer_dims = dims;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const std::size_t wn = static_cast<std::size_t>(dims[l]) * dims[l + 1];
    std::vector<double> W(wn);
    std::vector<double> b(dims[l + 1]);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("checkpoint truncated at layer " + std::to_string(l));
    std::stringstream ws(line);
    for (double& v : W)
      if (!(ws >> v)) throw ParseError("checkpoint weight row short at layer " + std::to_string(l));
    if (!std::getline(in, line)) throw ParseError("checkpoint truncated at layer " + std::to_string(l));
    std::stringstream bs(line);
    for (double& v : b)
      if (!(bs >> v)) throw ParseError("checkpoint bias row short at layer " + std::to_string(l));
    p.weights.push_back(std::move(W));
    p.biases.push_back(std::move(b));
  }
  return p;
}

void params_axpy(double alpha, const std::vector<double>& flat_grad, ModelParams* p) {
  std::size_t k = 0;
  for (std::size_t l = 0; l < p->weights.size(); ++l) {
    for (double& v : p->weights[l]) v += alpha * flat_grad[k++];
    for (double& v : p->biases[l]) v += alpha * flat_grad[k++];
  }
  if (k != flat_grad.size()) throw std::invalid_argument("params_axpy: size mismatch");
}

}  // namespace nag
