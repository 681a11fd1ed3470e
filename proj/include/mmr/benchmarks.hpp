#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "mmr/errors.hpp"
#include "mmr/models.hpp"
#include "mmr/strategies.hpp"
#include "mmr/synthetic.hpp"

namespace mmr {

/// A reproducible train/test pair plus the model and training settings the
/// preset was calibrated with. Everything is a function of one seed.
struct Benchmark {
  SyntheticConfig train_data;
  SyntheticConfig test_data;
  Architecture arch;
  TrainConfig train;
  MixupConfig mixup;
};

namespace detail {

inline Benchmark finish_benchmark(Benchmark b, std::size_t test_per_class, std::uint64_t seed) {
  b.train_data.seed = seed;
  b.test_data = b.train_data;
  b.test_data.samples_per_class = test_per_class;
  b.test_data.split = 1;
  b.arch.num_classes = b.train_data.num_classes;
  b.arch.audio_dim = b.train_data.audio_dim;
  b.arch.video_dim = b.train_data.video_dim;
  b.train.seed = seed;
  b.mixup.seed = seed;
  return b;
}

}  // namespace detail

/// Three well separated blobs; a quick end-to-end smoke configuration.
inline Benchmark demo_benchmark(std::uint64_t seed) {
  Benchmark b;
  b.train_data.num_classes = 3;
  b.train_data.samples_per_class = 60;
  b.train_data.cluster_spread = {0.15};
  b.train_data.separation = 0.6;
  b.train_data.modality_noise = 0.05;
  b.train.epochs = 20;
  b.train.learning_rate = 0.02;
  return detail::finish_benchmark(b, 30, seed);
}

/// Two interleaved crescents with a small training set, so that plain
/// training fits a tight boundary. The mix-up gates sit wide open here: at
/// this scale kappa stays near 1 and rho near 1-2, far from the thresholds
/// that suit large audio-visual corpora.
inline Benchmark two_moons_benchmark(std::uint64_t seed) {
  Benchmark b;
  b.train_data.num_classes = 2;
  b.train_data.samples_per_class = 40;
  b.train_data.shapes = {ClassShape::Crescent};
  b.train_data.cluster_spread = {0.08};
  b.train_data.separation = 0.4;
  b.train_data.shape_radius = 0.4;
  b.train_data.modality_noise = 0.05;
  b.train.epochs = 200;
  b.train.learning_rate = 0.02;
  b.mixup.T = 1.0;
  b.mixup.D = 0.1;
  return detail::finish_benchmark(b, 300, seed);
}

/// Six classes cycling blob, ring, crescent; each ring or crescent wraps
/// the previous class.
inline Benchmark mixed_shape_suite(std::uint64_t seed) {
  Benchmark b;
  b.train_data.num_classes = 6;
  b.train_data.samples_per_class = 100;
  b.train_data.shapes = {ClassShape::Blob, ClassShape::Ring, ClassShape::Crescent,
                         ClassShape::Blob, ClassShape::Ring, ClassShape::Crescent};
  b.train_data.cluster_spread = {0.08};
  b.train_data.separation = 0.6;
  b.train_data.shape_radius = 0.25;
  b.train_data.modality_noise = 0.05;
  b.train.epochs = 60;
  b.train.learning_rate = 0.02;
  b.mixup.T = 1.0;
  b.mixup.D = 0.1;
  return detail::finish_benchmark(b, 50, seed);
}

inline Benchmark benchmark_preset(std::string_view name, std::uint64_t seed) {
  if (name == "demo") return demo_benchmark(seed);
  if (name == "two_moons") return two_moons_benchmark(seed);
  if (name == "mixed_shapes") return mixed_shape_suite(seed);
  throw DomainError("unknown benchmark preset '" + std::string(name) + "'");
}

}  // namespace mmr
