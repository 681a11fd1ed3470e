#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mmr/errors.hpp"
#include "mmr/numerics.hpp"

namespace mmr {

/// Paired audio-like and video-like feature vectors with a label vector of
/// length K (one-hot for single-label data, {0,1} entries for multi-label).
struct MultiModalSample {
  Vector audio;
  Vector video;
  Vector label;
};

struct Dataset {
  std::vector<MultiModalSample> samples;
  std::size_t audio_dim = 0;
  std::size_t video_dim = 0;
  std::size_t num_classes = 0;
  bool multi_label = false;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }

  void validate() const {
    if (audio_dim == 0 || video_dim == 0 || num_classes == 0)
      throw ShapeError("dataset dimensions must be positive");
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const auto& s = samples[i];
      const std::string at = " in sample " + std::to_string(i);
      if (s.audio.size() != audio_dim || s.video.size() != video_dim || s.label.size() != num_classes)
        throw ShapeError("dimension mismatch" + at);
      require_finite(s.audio, ("audio" + at).c_str());
      require_finite(s.video, ("video" + at).c_str());
      std::size_t ones = 0;
      for (double y : s.label) {
        if (!(y >= 0.0 && y <= 1.0)) throw DomainError("label entry outside [0, 1]" + at);
        if (y == 1.0) ++ones;
      }
      if (!multi_label && ones != 1) throw DomainError("single-label sample needs exactly one 1" + at);
    }
  }
};

/// Class a sample is filed under: argmax of the label vector (first
/// positive entry for multi-label rows).
inline std::size_t primary_class(const MultiModalSample& s) { return argmax(s.label); }

/// Whether the sample belongs to class c (label entry >= 0.5).
inline bool has_class(const MultiModalSample& s, std::size_t c) { return s.label[c] >= 0.5; }

}  // namespace mmr
