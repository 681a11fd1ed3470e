#pragma once

#include <cmath>
#include <vector>

#include "mmr/mmr.hpp"

namespace testing_helpers {

using mmr::Vector;

inline Vector random_vector(mmr::Rng& rng, std::size_t n, double scale = 1.0) {
  Vector v(n);
  for (double& x : v) x = scale * rng.normal();
  return v;
}

inline mmr::Layer affine(std::size_t in, std::size_t out, Vector w, Vector b,
                         mmr::Activation act = mmr::Activation::Identity) {
  return mmr::Layer{in, out, std::move(w), std::move(b), act};
}

inline mmr::Layer identity_layer(std::size_t n) {
  Vector w(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) w[i * n + i] = 1.0;
  return affine(n, n, std::move(w), Vector(n, 0.0));
}

/// Identity encoders and a single affine head: logits = W [x_A; x_V] + b.
inline mmr::FusionModel linear_model(std::size_t da, std::size_t dv, std::size_t k, const Vector& w, const Vector& b,
                                     mmr::LossKind loss = mmr::LossKind::SoftmaxCrossEntropy) {
  mmr::FusionModel m;
  m.audio_encoder = {identity_layer(da)};
  m.video_encoder = {identity_layer(dv)};
  m.head = {affine(da + dv, k, w, b)};
  m.loss_kind = loss;
  return m;
}

inline mmr::FusionModel small_model(std::uint64_t seed, mmr::Activation act = mmr::Activation::Tanh) {
  mmr::Architecture a;
  a.audio_dim = 3;
  a.video_dim = 3;
  a.audio_hidden = {5};
  a.video_hidden = {4};
  a.audio_bottleneck = 2;
  a.video_bottleneck = 2;
  a.head_hidden = {6};
  a.num_classes = 3;
  a.activation = act;
  mmr::FusionModel m = mmr::make_model(a, seed);
  // non-zero biases so the bias gradients are exercised
  mmr::Rng rng(seed + 99);
  for (mmr::Mlp* mlp : {&m.audio_encoder, &m.video_encoder, &m.head})
    for (auto& l : *mlp)
      for (double& b : l.bias) b = 0.1 * rng.normal();
  return m;
}

inline mmr::MultiModalSample random_sample(mmr::Rng& rng, std::size_t da, std::size_t dv, std::size_t k,
                                           std::size_t cls) {
  mmr::MultiModalSample s{random_vector(rng, da), random_vector(rng, dv), Vector(k, 0.0)};
  s.label[cls] = 1.0;
  return s;
}

inline mmr::Matrix matrix_from_rows(const std::vector<Vector>& rows) {
  mmr::Matrix m(rows.size(), rows.empty() ? 0 : rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  return m;
}

}  // namespace testing_helpers
