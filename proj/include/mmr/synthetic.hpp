#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "mmr/data.hpp"
#include "mmr/dataset_io.hpp"
#include "mmr/errors.hpp"
#include "mmr/random.hpp"

namespace mmr {

/// Shape of a class's support in the latent plane. Crescents and rings
/// wrap around the previous class's centre, which makes them non-convex
/// with another class inside their hull.
enum class ClassShape { Blob, Crescent, Ring };

inline std::string_view to_string(ClassShape s) {
  switch (s) {
    case ClassShape::Blob: return "blob";
    case ClassShape::Crescent: return "crescent";
    case ClassShape::Ring: return "ring";
  }
  return "?";
}

inline ClassShape parse_shape(std::string_view s) {
  if (s == "blob") return ClassShape::Blob;
  if (s == "crescent") return ClassShape::Crescent;
  if (s == "ring") return ClassShape::Ring;
  throw DomainError("unknown class shape '" + std::string(s) + "'");
}

struct SyntheticConfig {
  std::size_t num_classes = 3;
  std::size_t samples_per_class = 100;
  std::size_t audio_dim = 8;
  std::size_t video_dim = 8;
  std::size_t latent_dim = 2;
  /// Per-class noise scale; a single entry applies to every class.
  std::vector<double> cluster_spread{0.5};
  /// Per-class shape; a single entry applies to every class.
  std::vector<ClassShape> shapes{ClassShape::Blob};
  /// Video latent = c * z + (1 - c) * z', z' an independent draw of the class.
  double cross_modal_correlation = 0.8;
  double separation = 4.0;   // radius of the circle carrying class centres
  double shape_radius = 2.0; // radius of ring and crescent supports
  double modality_noise = 0.1;
  /// Relative weight of each modality's latent signal.
  double audio_gain = 1.0;
  double video_gain = 1.0;
  bool multi_label = false;
  /// Seeds the class geometry and modality maps.
  std::uint64_t seed = 0;
  /// Selects the sample stream; splits of one seed share the same maps.
  std::uint64_t split = 0;

  double spread(std::size_t c) const { return cluster_spread.size() == 1 ? cluster_spread[0] : cluster_spread.at(c); }
  ClassShape shape(std::size_t c) const { return shapes.size() == 1 ? shapes[0] : shapes.at(c); }

  void validate() const {
    if (num_classes == 0 || samples_per_class == 0) throw DomainError("class and sample counts must be >= 1");
    if (audio_dim == 0 || video_dim == 0 || latent_dim < 2) throw DomainError("dimensions must be positive (latent >= 2)");
    if (cluster_spread.size() != 1 && cluster_spread.size() != num_classes)
      throw DomainError("cluster_spread needs 1 or K entries");
    if (shapes.size() != 1 && shapes.size() != num_classes) throw DomainError("shapes needs 1 or K entries");
    for (double s : cluster_spread)
      if (!(s > 0.0)) throw DomainError("cluster spreads must be positive");
    if (!(cross_modal_correlation >= 0.0 && cross_modal_correlation <= 1.0))
      throw DomainError("cross_modal_correlation must lie in [0, 1]");
    if (!(modality_noise >= 0.0)) throw DomainError("modality_noise must be >= 0");
  }
};

namespace detail {

inline Vector class_centre(const SyntheticConfig& cfg, std::size_t c) {
  Vector z(cfg.latent_dim, 0.0);
  if (cfg.num_classes == 1) return z;
  const double angle = 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(cfg.num_classes);
  z[0] = cfg.separation * std::cos(angle);
  z[1] = cfg.separation * std::sin(angle);
  return z;
}

inline Vector draw_latent(const SyntheticConfig& cfg, std::size_t c, Rng& rng) {
  const double spread = cfg.spread(c);
  const ClassShape shape = cfg.shape(c);
  Vector z;
  if (shape == ClassShape::Blob || cfg.num_classes == 1) {
    z = class_centre(cfg, c);
    for (double& x : z) x += spread * rng.normal();
    return z;
  }
  const std::size_t host = (c + cfg.num_classes - 1) % cfg.num_classes;
  z = class_centre(cfg, host);
  const Vector own = class_centre(cfg, c);
  double phi;
  if (shape == ClassShape::Ring) {
    phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
  } else {
    // arc of 1.2 pi opening away from the class's own centre
    const double facing = std::atan2(own[1] - z[1], own[0] - z[0]);
    phi = facing + rng.uniform(-0.6, 0.6) * std::numbers::pi;
  }
  const double r = cfg.shape_radius + spread * rng.normal();
  z[0] += r * std::cos(phi);
  z[1] += r * std::sin(phi);
  for (std::size_t k = 2; k < z.size(); ++k) z[k] += spread * rng.normal();
  return z;
}

inline Matrix random_map(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
  for (double& x : m.data) x = scale * rng.normal();
  return m;
}

inline Vector apply_map(const Matrix& m, ConstSpan z, double gain, double noise, Rng& rng) {
  Vector x(m.rows);
  for (std::size_t r = 0; r < m.rows; ++r) x[r] = gain * dot(m.row(r), z) + noise * rng.normal();
  return x;
}

}  // namespace detail

/// Class-major synthetic two-modality dataset. Each sample draws a latent
/// point from its class's region; both modalities are seeded linear maps of
/// correlated latents plus isotropic noise. Values are rounded to float
/// precision so the binary format round-trips exactly.
inline Dataset generate_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  Rng map_rng(derive_seed(cfg.seed, 0x3a9));
  const Matrix to_audio = detail::random_map(cfg.audio_dim, cfg.latent_dim, map_rng);
  const Matrix to_video = detail::random_map(cfg.video_dim, cfg.latent_dim, map_rng);
  Rng rng(derive_seed(derive_seed(cfg.seed, 0x5a3), cfg.split));

  Dataset d;
  d.audio_dim = cfg.audio_dim;
  d.video_dim = cfg.video_dim;
  d.num_classes = cfg.num_classes;
  d.multi_label = cfg.multi_label;
  const double c = cfg.cross_modal_correlation;
  for (std::size_t cls = 0; cls < cfg.num_classes; ++cls) {
    for (std::size_t n = 0; n < cfg.samples_per_class; ++n) {
      std::vector<std::size_t> labels{cls};
      if (cfg.multi_label && cfg.num_classes > 1) {
        const std::size_t extra = std::min<std::size_t>(rng.index(3), cfg.num_classes - 1);
        while (labels.size() < 1 + extra) {
          const std::size_t k = rng.index(cfg.num_classes);
          if (std::find(labels.begin(), labels.end(), k) == labels.end()) labels.push_back(k);
        }
      }
      Vector za(cfg.latent_dim, 0.0), zv(cfg.latent_dim, 0.0);
      for (std::size_t k : labels) {
        const Vector a = detail::draw_latent(cfg, k, rng);
        const Vector b = detail::draw_latent(cfg, k, rng);
        for (std::size_t i = 0; i < cfg.latent_dim; ++i) {
          za[i] += a[i];
          zv[i] += c * a[i] + (1.0 - c) * b[i];
        }
      }
      const double inv = 1.0 / static_cast<double>(labels.size());
      for (std::size_t i = 0; i < cfg.latent_dim; ++i) {
        za[i] *= inv;
        zv[i] *= inv;
      }
      MultiModalSample s;
      s.audio = detail::apply_map(to_audio, za, cfg.audio_gain, cfg.modality_noise, rng);
      s.video = detail::apply_map(to_video, zv, cfg.video_gain, cfg.modality_noise, rng);
      s.label.assign(cfg.num_classes, 0.0);
      for (std::size_t k : labels) s.label[k] = 1.0;
      d.samples.push_back(std::move(s));
    }
  }
  quantize_to_float(d);
  return d;
}

}  // namespace mmr
