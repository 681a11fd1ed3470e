#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mmr/data.hpp"
#include "mmr/errors.hpp"
#include "mmr/numerics.hpp"
#include "mmr/random.hpp"

namespace mmr {

enum class Activation { Identity, Relu, Tanh };
enum class LossKind { SoftmaxCrossEntropy, SigmoidBce };

inline std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
  }
  return "?";
}

inline Activation parse_activation(std::string_view s) {
  if (s == "identity") return Activation::Identity;
  if (s == "relu") return Activation::Relu;
  if (s == "tanh") return Activation::Tanh;
  throw DomainError("unknown activation '" + std::string(s) + "'");
}

inline std::string_view to_string(LossKind k) {
  return k == LossKind::SoftmaxCrossEntropy ? "softmax-cross-entropy" : "sigmoid-bce";
}

/// Affine map followed by an elementwise activation. `weight` is out x in,
/// row-major.
struct Layer {
  std::size_t in = 0;
  std::size_t out = 0;
  Vector weight;
  Vector bias;
  Activation activation = Activation::Identity;
};

using Mlp = std::vector<Layer>;

/// Mid-fusion classifier: logits = head(audio_encoder(x_A) ++ video_encoder(x_V)).
struct FusionModel {
  Mlp audio_encoder;
  Mlp video_encoder;
  Mlp head;
  LossKind loss_kind = LossKind::SoftmaxCrossEntropy;

  std::size_t audio_dim() const { return audio_encoder.front().in; }
  std::size_t video_dim() const { return video_encoder.front().in; }
  std::size_t audio_bottleneck() const { return audio_encoder.back().out; }
  std::size_t video_bottleneck() const { return video_encoder.back().out; }
  std::size_t bottleneck_dim() const { return audio_bottleneck() + video_bottleneck(); }
  std::size_t num_classes() const { return head.back().out; }
  bool multi_label() const { return loss_kind == LossKind::SigmoidBce; }

  void validate() const {
    auto check_chain = [](const Mlp& m, const char* name) {
      if (m.empty()) throw ShapeError(std::string(name) + " has no layers");
      for (std::size_t i = 0; i < m.size(); ++i) {
        const Layer& l = m[i];
        if (l.in == 0 || l.out == 0) throw ShapeError(std::string(name) + " has an empty layer");
        if (l.weight.size() != l.in * l.out || l.bias.size() != l.out)
          throw ShapeError(std::string(name) + " layer payload does not match its dimensions");
        if (i > 0 && m[i - 1].out != l.in) throw ShapeError(std::string(name) + " layers do not chain");
      }
    };
    check_chain(audio_encoder, "audio encoder");
    check_chain(video_encoder, "video encoder");
    check_chain(head, "head");
    if (head.front().in != bottleneck_dim()) throw ShapeError("head input does not match bottleneck");
  }
};

struct Architecture {
  std::size_t audio_dim = 8;
  std::size_t video_dim = 8;
  std::vector<std::size_t> audio_hidden{16};
  std::vector<std::size_t> video_hidden{16};
  std::size_t audio_bottleneck = 4;
  std::size_t video_bottleneck = 4;
  std::vector<std::size_t> head_hidden{16};
  std::size_t num_classes = 3;
  Activation activation = Activation::Relu;
  /// Apply the activation to the encoder outputs (the bottleneck).
  bool activate_bottleneck = true;
  LossKind loss_kind = LossKind::SoftmaxCrossEntropy;
};

namespace detail {

inline Layer glorot_layer(std::size_t in, std::size_t out, Activation act, Rng& rng) {
  Layer l{in, out, Vector(in * out), Vector(out, 0.0), act};
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  for (double& w : l.weight) w = rng.uniform(-limit, limit);
  return l;
}

inline Mlp build_mlp(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out,
                     Activation act, Activation last, Rng& rng) {
  Mlp m;
  std::size_t prev = in;
  for (std::size_t h : hidden) {
    m.push_back(glorot_layer(prev, h, act, rng));
    prev = h;
  }
  m.push_back(glorot_layer(prev, out, last, rng));
  return m;
}

}  // namespace detail

/// Seeded Glorot-uniform initialisation; biases start at zero.
inline FusionModel make_model(const Architecture& arch, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x1a17));
  const Activation enc_out = arch.activate_bottleneck ? arch.activation : Activation::Identity;
  FusionModel m;
  m.audio_encoder = detail::build_mlp(arch.audio_dim, arch.audio_hidden, arch.audio_bottleneck,
                                      arch.activation, enc_out, rng);
  m.video_encoder = detail::build_mlp(arch.video_dim, arch.video_hidden, arch.video_bottleneck,
                                      arch.activation, enc_out, rng);
  m.head = detail::build_mlp(arch.audio_bottleneck + arch.video_bottleneck, arch.head_hidden,
                             arch.num_classes, arch.activation, Activation::Identity, rng);
  m.loss_kind = arch.loss_kind;
  return m;
}

// ---------------------------------------------------------------------------
// forward / backward

inline double activate(Activation a, double x) {
  switch (a) {
    case Activation::Identity: return x;
    case Activation::Relu: return x > 0.0 ? x : 0.0;
    case Activation::Tanh: return std::tanh(x);
  }
  return x;
}

/// d activation / d pre-activation, expressed through pre- and post-values.
inline double activate_derivative(Activation a, double pre, double post) {
  switch (a) {
    case Activation::Identity: return 1.0;
    case Activation::Relu: return pre > 0.0 ? 1.0 : 0.0;
    case Activation::Tanh: return 1.0 - post * post;
  }
  return 1.0;
}

/// Per-layer inputs and pre-activations kept for backpropagation.
struct MlpTrace {
  std::vector<Vector> inputs;
  std::vector<Vector> pre;
  std::vector<Vector> post;
};

inline Vector layer_forward(const Layer& l, ConstSpan x, Vector* pre_out = nullptr) {
  Vector pre(l.out);
  for (std::size_t o = 0; o < l.out; ++o) {
    double s = l.bias[o];
    const double* w = l.weight.data() + o * l.in;
    for (std::size_t i = 0; i < l.in; ++i) s += w[i] * x[i];
    pre[o] = s;
  }
  Vector post(l.out);
  for (std::size_t o = 0; o < l.out; ++o) post[o] = activate(l.activation, pre[o]);
  if (pre_out) *pre_out = std::move(pre);
  return post;
}

inline Vector mlp_forward(const Mlp& m, ConstSpan x) {
  Vector cur(x.begin(), x.end());
  for (const Layer& l : m) cur = layer_forward(l, cur);
  return cur;
}

inline Vector mlp_forward(const Mlp& m, ConstSpan x, MlpTrace& trace) {
  trace.inputs.clear();
  trace.pre.clear();
  trace.post.clear();
  Vector cur(x.begin(), x.end());
  for (const Layer& l : m) {
    trace.inputs.push_back(cur);
    Vector pre;
    cur = layer_forward(l, cur, &pre);
    trace.pre.push_back(std::move(pre));
    trace.post.push_back(cur);
  }
  return cur;
}

struct LayerGradient {
  Vector weight;
  Vector bias;
};

using MlpGradient = std::vector<LayerGradient>;

/// Parameter-shaped gradient of a FusionModel.
struct ModelGradient {
  MlpGradient audio_encoder;
  MlpGradient video_encoder;
  MlpGradient head;
};

inline MlpGradient zeros_like(const Mlp& m) {
  MlpGradient g;
  for (const Layer& l : m) g.push_back({Vector(l.weight.size(), 0.0), Vector(l.bias.size(), 0.0)});
  return g;
}

inline ModelGradient zeros_like(const FusionModel& m) {
  return {zeros_like(m.audio_encoder), zeros_like(m.video_encoder), zeros_like(m.head)};
}

/// Backpropagates grad_out through the traced MLP. Parameter gradients are
/// accumulated into `grads` scaled by `weight` when non-null; the gradient
/// with respect to the MLP input is returned.
inline Vector mlp_backward(const Mlp& m, const MlpTrace& trace, ConstSpan grad_out,
                           MlpGradient* grads, double weight) {
  Vector g(grad_out.begin(), grad_out.end());
  for (std::size_t k = m.size(); k-- > 0;) {
    const Layer& l = m[k];
    const Vector& pre = trace.pre[k];
    const Vector& post = trace.post[k];
    const Vector& in = trace.inputs[k];
    for (std::size_t o = 0; o < l.out; ++o) g[o] *= activate_derivative(l.activation, pre[o], post[o]);
    if (grads) {
      LayerGradient& lg = (*grads)[k];
      for (std::size_t o = 0; o < l.out; ++o) {
        const double go = weight * g[o];
        if (go == 0.0) continue;
        lg.bias[o] += go;
        double* w = lg.weight.data() + o * l.in;
        for (std::size_t i = 0; i < l.in; ++i) w[i] += go * in[i];
      }
    }
    Vector gin(l.in, 0.0);
    for (std::size_t o = 0; o < l.out; ++o) {
      const double go = g[o];
      if (go == 0.0) continue;
      const double* w = l.weight.data() + o * l.in;
      for (std::size_t i = 0; i < l.in; ++i) gin[i] += go * w[i];
    }
    g = std::move(gin);
  }
  return g;
}

struct ForwardResult {
  Vector logits;
  Vector bottleneck;
};

inline void check_input_dims(const FusionModel& m, ConstSpan xa, ConstSpan xv) {
  if (xa.size() != m.audio_dim() || xv.size() != m.video_dim())
    throw ShapeError("input dimensions (" + std::to_string(xa.size()) + ", " +
                     std::to_string(xv.size()) + ") do not match model (" +
                     std::to_string(m.audio_dim()) + ", " + std::to_string(m.video_dim()) + ")");
}

inline Vector bottleneck(const FusionModel& m, ConstSpan xa, ConstSpan xv) {
  check_input_dims(m, xa, xv);
  return concat(mlp_forward(m.audio_encoder, xa), mlp_forward(m.video_encoder, xv));
}

inline ForwardResult forward(const FusionModel& m, ConstSpan xa, ConstSpan xv) {
  Vector l = bottleneck(m, xa, xv);
  Vector z = mlp_forward(m.head, l);
  return {std::move(z), std::move(l)};
}

inline Vector head_logits(const FusionModel& m, ConstSpan bottleneck_point) {
  if (bottleneck_point.size() != m.bottleneck_dim()) throw ShapeError("bottleneck dimension mismatch");
  return mlp_forward(m.head, bottleneck_point);
}

// ---------------------------------------------------------------------------
// losses and decisions

inline double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }
inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline Vector softmax(ConstSpan z) {
  const double m = *std::max_element(z.begin(), z.end());
  Vector p(z.size());
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) s += (p[i] = std::exp(z[i] - m));
  for (double& x : p) x /= s;
  return p;
}

inline double log_sum_exp(ConstSpan z) {
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double x : z) s += std::exp(x - m);
  return m + std::log(s);
}

namespace detail {

// -log softmax(z)_k = log sum_j exp(z_j - z_k), with log1p when z_k is the
// largest logit so that confident predictions keep full relative precision.
inline double neg_log_softmax(ConstSpan z, std::size_t k) {
  double m = 0.0;
  for (double x : z) m = std::max(m, x - z[k]);
  double s = 0.0;
  if (m == 0.0) {
    for (std::size_t j = 0; j < z.size(); ++j)
      if (j != k) s += std::exp(z[j] - z[k]);
    return std::log1p(s);
  }
  for (double x : z) s += std::exp(x - z[k] - m);
  return m + std::log(s);
}

}  // namespace detail

/// Softmax cross-entropy against a (possibly soft) label, or the mean
/// per-class sigmoid binary cross-entropy.
inline double loss_value(LossKind kind, ConstSpan logits, ConstSpan label) {
  if (logits.size() != label.size()) throw ShapeError("logits and label lengths differ");
  if (kind == LossKind::SoftmaxCrossEntropy) {
    double s = 0.0;
    for (std::size_t k = 0; k < logits.size(); ++k)
      if (label[k] != 0.0) s += label[k] * detail::neg_log_softmax(logits, k);
    return s;
  }
  // y softplus(-z) + (1 - y) softplus(z) avoids cancelling large terms
  double s = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k)
    s += label[k] * softplus(-logits[k]) + (1.0 - label[k]) * softplus(logits[k]);
  return s / static_cast<double>(logits.size());
}

inline Vector loss_gradient(LossKind kind, ConstSpan logits, ConstSpan label) {
  Vector g(logits.size());
  if (kind == LossKind::SoftmaxCrossEntropy) {
    const Vector p = softmax(logits);
    const double mass = std::accumulate(label.begin(), label.end(), 0.0);
    for (std::size_t k = 0; k < g.size(); ++k) g[k] = mass * p[k] - label[k];
  } else {
    const double inv_k = 1.0 / static_cast<double>(logits.size());
    for (std::size_t k = 0; k < g.size(); ++k) g[k] = (sigmoid(logits[k]) - label[k]) * inv_k;
  }
  return g;
}

inline double loss(const FusionModel& m, ConstSpan logits, ConstSpan label) {
  return loss_value(m.loss_kind, logits, label);
}

/// Class scores in [0, 1]: softmax for single-label models, per-class
/// sigmoid for multi-label models.
inline Vector scores(LossKind kind, ConstSpan logits) {
  if (kind == LossKind::SoftmaxCrossEntropy) return softmax(logits);
  Vector s(logits.size());
  for (std::size_t k = 0; k < s.size(); ++k) s[k] = sigmoid(logits[k]);
  return s;
}

/// Whether logits assign class c under the model's decision rule
/// (argmax, or sigmoid >= 0.5 for multi-label).
inline bool predicts_class(LossKind kind, ConstSpan logits, std::size_t c) {
  return kind == LossKind::SoftmaxCrossEntropy ? argmax(logits) == c : logits[c] >= 0.0;
}

/// Decision equality between two logit vectors.
inline bool same_decision(LossKind kind, ConstSpan a, ConstSpan b) {
  if (kind == LossKind::SoftmaxCrossEntropy) return argmax(a) == argmax(b);
  for (std::size_t k = 0; k < a.size(); ++k)
    if ((a[k] >= 0.0) != (b[k] >= 0.0)) return false;
  return true;
}

/// Correct = argmax matches the label's argmax (single-label) or every
/// thresholded decision matches the label (multi-label).
inline bool is_correct(LossKind kind, ConstSpan logits, ConstSpan label) {
  if (kind == LossKind::SoftmaxCrossEntropy) return argmax(logits) == argmax(label);
  for (std::size_t k = 0; k < logits.size(); ++k)
    if ((logits[k] >= 0.0) != (label[k] >= 0.5)) return false;
  return true;
}

// ---------------------------------------------------------------------------
// gradients

struct Backprop {
  double loss = 0.0;
  Vector logits;
  Vector grad_audio;
  Vector grad_video;
};

/// Full forward/backward pass for one sample. Parameter gradients are
/// accumulated into `grads` (scaled by `weight`) when non-null.
inline Backprop backprop(const FusionModel& m, ConstSpan xa, ConstSpan xv, ConstSpan label,
                         ModelGradient* grads = nullptr, double weight = 1.0) {
  check_input_dims(m, xa, xv);
  if (label.size() != m.num_classes()) throw ShapeError("label length does not match model");
  MlpTrace ta, tv, th;
  Vector ea = mlp_forward(m.audio_encoder, xa, ta);
  Vector ev = mlp_forward(m.video_encoder, xv, tv);
  Vector z = mlp_forward(m.head, concat(ea, ev), th);
  Backprop out;
  out.loss = loss_value(m.loss_kind, z, label);
  const Vector dz = loss_gradient(m.loss_kind, z, label);
  const Vector dl = mlp_backward(m.head, th, dz, grads ? &grads->head : nullptr, weight);
  const std::size_t da = ea.size();
  out.grad_audio = mlp_backward(m.audio_encoder, ta, ConstSpan(dl).first(da),
                                grads ? &grads->audio_encoder : nullptr, weight);
  out.grad_video = mlp_backward(m.video_encoder, tv, ConstSpan(dl).subspan(da),
                                grads ? &grads->video_encoder : nullptr, weight);
  out.logits = std::move(z);
  return out;
}

/// Mean loss gradient over a batch with respect to every parameter.
inline ModelGradient grad_params(const FusionModel& m, std::span<const MultiModalSample> batch) {
  if (batch.empty()) throw EmptyInputError("gradient of an empty batch");
  ModelGradient g = zeros_like(m);
  const double w = 1.0 / static_cast<double>(batch.size());
  for (const auto& s : batch) backprop(m, s.audio, s.video, s.label, &g, w);
  return g;
}

/// Loss gradient with respect to each raw input modality.
inline std::pair<Vector, Vector> grad_input(const FusionModel& m, const MultiModalSample& s) {
  Backprop b = backprop(m, s.audio, s.video, s.label);
  return {std::move(b.grad_audio), std::move(b.grad_video)};
}

/// Pointers to every parameter in a fixed order (audio encoder, video
/// encoder, head; per layer weights then biases).
inline std::vector<double*> parameter_pointers(FusionModel& m) {
  std::vector<double*> out;
  for (Mlp* mlp : {&m.audio_encoder, &m.video_encoder, &m.head})
    for (Layer& l : *mlp) {
      for (double& w : l.weight) out.push_back(&w);
      for (double& b : l.bias) out.push_back(&b);
    }
  return out;
}

/// Flattened gradient in parameter_pointers order.
inline Vector flatten(const ModelGradient& g) {
  Vector out;
  for (const MlpGradient* mg : {&g.audio_encoder, &g.video_encoder, &g.head})
    for (const LayerGradient& lg : *mg) {
      out.insert(out.end(), lg.weight.begin(), lg.weight.end());
      out.insert(out.end(), lg.bias.begin(), lg.bias.end());
    }
  return out;
}

// ---------------------------------------------------------------------------
// training

enum class Optimizer { Sgd, SgdMomentum };

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  double learning_rate = 0.05;
  Optimizer optimizer = Optimizer::SgdMomentum;
  double momentum = 0.9;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(learning_rate > 0.0)) throw DomainError("learning_rate must be positive");
    if (batch_size == 0) throw DomainError("batch_size must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw DomainError("momentum must lie in [0, 1)");
  }
};

/// Hooks let robust-training strategies reuse the plain loop. The batch
/// hook may rewrite the batch in place before its gradient is taken; it
/// must draw randomness from its own streams so that a no-op hook leaves
/// training bit-identical to the plain loop.
struct TrainHooks {
  std::function<void(std::size_t epoch, const FusionModel&)> on_epoch_begin;
  std::function<void(std::size_t epoch, std::size_t batch_index, const FusionModel&,
                     std::vector<MultiModalSample>&)>
      transform_batch;
};

struct TrainResult {
  FusionModel model;
  std::vector<double> loss_history;
};

inline TrainResult train(FusionModel model, const Dataset& data, const TrainConfig& cfg,
                         const TrainHooks& hooks = {}) {
  cfg.validate();
  model.validate();
  if (data.empty()) throw EmptyInputError("training set is empty");
  if (data.audio_dim != model.audio_dim() || data.video_dim != model.video_dim() ||
      data.num_classes != model.num_classes())
    throw ShapeError("dataset does not match model dimensions");

  TrainResult result;
  Rng shuffle_rng(derive_seed(cfg.seed, 0x5f11));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double*> params = parameter_pointers(model);
  Vector velocity(params.size(), 0.0);
  const bool use_momentum = cfg.optimizer == Optimizer::SgdMomentum;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (hooks.on_epoch_begin) hooks.on_epoch_begin(epoch, model);
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t seen = 0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      std::vector<MultiModalSample> batch;
      batch.reserve(stop - start);
      for (std::size_t k = start; k < stop; ++k) batch.push_back(data.samples[order[k]]);
      if (hooks.transform_batch) hooks.transform_batch(epoch, batch_index, model, batch);

      ModelGradient g = zeros_like(model);
      const double w = 1.0 / static_cast<double>(batch.size());
      for (const auto& s : batch) {
        epoch_loss += backprop(model, s.audio, s.video, s.label, &g, w).loss;
        ++seen;
      }
      const Vector flat = flatten(g);
      for (std::size_t i = 0; i < params.size(); ++i) {
        if (use_momentum) {
          velocity[i] = cfg.momentum * velocity[i] + flat[i];
          *params[i] -= cfg.learning_rate * velocity[i];
        } else {
          *params[i] -= cfg.learning_rate * flat[i];
        }
      }
    }
    result.loss_history.push_back(epoch_loss / static_cast<double>(seen));
  }
  result.model = std::move(model);
  return result;
}

// ---------------------------------------------------------------------------
// bottleneck export

struct Embeddings {
  Matrix points;  // n x d bottleneck features
  Matrix labels;  // n x K
};

inline Embeddings extract_bottleneck(const FusionModel& m, const Dataset& data) {
  Embeddings e{Matrix(data.size(), m.bottleneck_dim()), Matrix(data.size(), m.num_classes())};
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& s = data.samples[i];
    const Vector l = bottleneck(m, s.audio, s.video);
    std::copy(l.begin(), l.end(), e.points.row(i).begin());
    if (s.label.size() != m.num_classes()) throw ShapeError("label length does not match model");
    std::copy(s.label.begin(), s.label.end(), e.labels.row(i).begin());
  }
  return e;
}

/// Logits for every sample of a dataset, as an n x K matrix.
inline Matrix predict_logits(const FusionModel& m, const Dataset& data) {
  Matrix out(data.size(), m.num_classes());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Vector z = forward(m, data.samples[i].audio, data.samples[i].video).logits;
    std::copy(z.begin(), z.end(), out.row(i).begin());
  }
  return out;
}

inline double accuracy(const FusionModel& m, const Dataset& data) {
  if (data.empty()) return 0.0;
  std::size_t hit = 0;
  for (const auto& s : data.samples)
    if (is_correct(m.loss_kind, forward(m, s.audio, s.video).logits, s.label)) ++hit;
  return static_cast<double>(hit) / static_cast<double>(data.size());
}

}  // namespace mmr
