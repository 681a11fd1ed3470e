#pragma once

// Constructive witness that a unimodal perturbation inside the unimodal
// robustness threshold can flip a linear mid-fusion classifier.
//
// Convention: the fused score is f = a^T g(x_A) + b^T h(x_V); the correct
// label is -1, so a negative fused score is a correct prediction and a
// positive one is a misclassification.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "mmr/attacks.hpp"
#include "mmr/errors.hpp"
#include "mmr/models.hpp"
#include "mmr/numerics.hpp"

namespace mmr {

enum class Modality { Audio, Video };

inline std::string_view to_string(Modality m) { return m == Modality::Audio ? "audio" : "video"; }

/// Coordinate-wise encoder map used by the witness model.
enum class EncoderShape {
  Identity,
  /// g(x) = x + tanh(x) / 2 : smooth, strictly increasing, slope in [1, 1.5].
  SmoothMonotone,
};

inline double encode_coordinate(EncoderShape e, double x) {
  return e == EncoderShape::Identity ? x : x + 0.5 * std::tanh(x);
}

struct CounterexampleSpec {
  Vector a;  // audio head coefficients
  Vector b;  // video head coefficients
  double s = 1.0;  // attacked-modality score is -s
  double t = 1.0;  // other-modality score is +t
  double eps_A = 1.0;  // unimodal robustness threshold of the attacked modality
  double tol = 1e-6;
  /// Modality that carries the -s score and receives the perturbation.
  Modality attacked = Modality::Audio;
  EncoderShape encoder = EncoderShape::Identity;

  const Vector& attacked_coefficients() const { return attacked == Modality::Audio ? a : b; }
  const Vector& other_coefficients() const { return attacked == Modality::Audio ? b : a; }

  void validate() const {
    if (!(s > 0.0) || !(t > 0.0)) throw DomainError("s and t must be positive");
    if (!(tol > 0.0)) throw DomainError("tol must be positive");
    if (!(eps_A > 0.0)) throw DomainError("eps_A must be positive");
    if (a.empty() || b.empty()) throw ShapeError("coefficient vectors must be non-empty");
    if (lp_norm(a, NormKind::L2) == 0.0 || lp_norm(b, NormKind::L2) == 0.0)
      throw DomainError("coefficient vectors must be non-zero");
  }
};

/// Binary linear fusion model f(x) = a^T g(x_A) + b^T h(x_V).
struct FusionWitness {
  Vector a;
  Vector b;
  EncoderShape encoder = EncoderShape::Identity;

  double audio_score(ConstSpan xa) const {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * encode_coordinate(encoder, xa[i]);
    return s;
  }
  double video_score(ConstSpan xv) const {
    double s = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) s += b[i] * encode_coordinate(encoder, xv[i]);
    return s;
  }
  double fused_score(ConstSpan xa, ConstSpan xv) const { return audio_score(xa) + video_score(xv); }

  /// Same model as a two-class FusionModel: identity encoders and a head
  /// whose logit difference (class 1 minus class 0) is the fused score.
  /// Class 0 is the correct label -1. Only defined for identity encoders.
  FusionModel as_fusion_model() const {
    if (encoder != EncoderShape::Identity) throw DomainError("only identity witnesses map onto FusionModel");
    auto identity_layer = [](std::size_t n) {
      Layer l{n, n, Vector(n * n, 0.0), Vector(n, 0.0), Activation::Identity};
      for (std::size_t i = 0; i < n; ++i) l.weight[i * n + i] = 1.0;
      return l;
    };
    FusionModel m;
    m.audio_encoder = {identity_layer(a.size())};
    m.video_encoder = {identity_layer(b.size())};
    const std::size_t d = a.size() + b.size();
    Layer head{d, 2, Vector(2 * d, 0.0), Vector(2, 0.0), Activation::Identity};
    for (std::size_t i = 0; i < a.size(); ++i) head.weight[d + i] = a[i];
    for (std::size_t i = 0; i < b.size(); ++i) head.weight[d + a.size() + i] = b[i];
    m.head = {head};
    m.loss_kind = LossKind::SoftmaxCrossEntropy;
    return m;
  }
};

struct Counterexample {
  FusionWitness model;
  MultiModalSample sample;  // label (1, 0): the correct class is -1
};

namespace detail {

inline Vector unit(ConstSpan v) { return scaled(v, 1.0 / lp_norm(v, NormKind::L2)); }

/// c^T g(x + lambda * u) with u = c / ||c||; increasing in lambda.
inline double ray_score(ConstSpan c, ConstSpan x, ConstSpan u, double lambda, EncoderShape e) {
  double s = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) s += c[i] * encode_coordinate(e, x[i] + lambda * u[i]);
  return s;
}

/// Point lambda * c/||c|| whose score c^T g(.) equals target.
inline Vector point_with_score(ConstSpan c, double target, EncoderShape e) {
  const Vector u = unit(c);
  const double norm_c = lp_norm(c, NormKind::L2);
  if (e == EncoderShape::Identity) return scaled(u, target / norm_c);
  const Vector origin(c.size(), 0.0);
  // slope along u lies in [||c||, 1.5 ||c||]
  double lo = std::min(0.0, target / norm_c), hi = std::max(0.0, target / norm_c);
  for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (ray_score(c, origin, u, mid, e) < target ? lo : hi) = mid;
  }
  const double lambda =
      std::abs(ray_score(c, origin, u, lo, e) - target) <= std::abs(ray_score(c, origin, u, hi, e) - target) ? lo : hi;
  return scaled(u, lambda);
}

}  // namespace detail

/// Builds the witness model and a sample scoring -s on the attacked
/// modality and +t on the other. Coefficient lengths set the modality
/// dimensions.
inline Counterexample construct_counterexample(const CounterexampleSpec& spec) {
  spec.validate();
  Counterexample ce;
  ce.model = {spec.a, spec.b, spec.encoder};
  const Vector attacked = detail::point_with_score(spec.attacked_coefficients(), -spec.s, spec.encoder);
  const Vector other = detail::point_with_score(spec.other_coefficients(), spec.t, spec.encoder);
  ce.sample.audio = spec.attacked == Modality::Audio ? attacked : other;
  ce.sample.video = spec.attacked == Modality::Audio ? other : attacked;
  ce.sample.label = {1.0, 0.0};
  return ce;
}

inline Counterexample construct_counterexample(const CounterexampleSpec& spec, std::size_t d_A, std::size_t d_V) {
  if (spec.a.size() != d_A || spec.b.size() != d_V) throw ShapeError("coefficient lengths do not match dims");
  return construct_counterexample(spec);
}

enum class TheoremCase { NoNoiseNeeded, IVTBreak };

inline std::string_view to_string(TheoremCase c) { return c == TheoremCase::NoNoiseNeeded ? "NoNoiseNeeded" : "IVTBreak"; }

struct TheoremReport {
  TheoremCase theorem_case = TheoremCase::NoNoiseNeeded;
  Modality attacked = Modality::Audio;
  Perturbation delta;
  double delta_norm = 0.0;  // l2
  double fused_score_before = 0.0;
  double fused_score_after = 0.0;
  bool label_flipped = false;
  std::size_t iterations = 0;
};

/// Magnitude along the attacked coefficients' direction at which the
/// attacked modality's own score crosses zero: its unimodal robustness
/// threshold for this construction.
inline double unimodal_threshold(const Counterexample& ce, const CounterexampleSpec& spec) {
  const Vector& c = spec.attacked_coefficients();
  const Vector& x = spec.attacked == Modality::Audio ? ce.sample.audio : ce.sample.video;
  const Vector u = detail::unit(c);
  double hi = 1.0;
  while (detail::ray_score(c, x, u, hi, spec.encoder) < 0.0) hi *= 2.0;
  double lo = 0.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (detail::ray_score(c, x, u, mid, spec.encoder) < 0.0 ? lo : hi) = mid;
  }
  return hi;
}

/// Finds the unimodal break. If s < t the sample is already misclassified
/// and delta = 0. Otherwise bisection along the attacked modality's ascent
/// direction over [0, eps_A] finds delta with attacked score -t/2 (within
/// tol), giving fused score t/2 > 0.
inline TheoremReport find_unimodal_break(const Counterexample& ce, const CounterexampleSpec& spec) {
  spec.validate();
  const FusionWitness& m = ce.model;
  const MultiModalSample& x = ce.sample;
  TheoremReport r;
  r.attacked = spec.attacked;
  r.delta = {Vector(x.audio.size(), 0.0), Vector(x.video.size(), 0.0)};
  r.fused_score_before = m.fused_score(x.audio, x.video);
  if (spec.s < spec.t) {
    r.theorem_case = TheoremCase::NoNoiseNeeded;
    r.fused_score_after = r.fused_score_before;
    r.label_flipped = r.fused_score_before > 0.0;
    return r;
  }
  r.theorem_case = TheoremCase::IVTBreak;
  const Vector& c = spec.attacked_coefficients();
  const Vector& xs = spec.attacked == Modality::Audio ? x.audio : x.video;
  const Vector u = detail::unit(c);
  const double target = -spec.t / 2.0;
  auto psi = [&](double lambda) { return detail::ray_score(c, xs, u, lambda, spec.encoder); };
  if (psi(spec.eps_A) < target)
    throw ConstructionError("attacked score cannot reach -t/2 within eps_A; inconsistent construction");
  double lo = 0.0, hi = spec.eps_A, lambda = 0.0;
  bool found = false;
  for (std::size_t it = 1; it <= 200; ++it) {
    lambda = 0.5 * (lo + hi);
    r.iterations = it;
    const double v = psi(lambda);
    if (std::abs(v - target) < spec.tol) {
      found = true;
      break;
    }
    (v < target ? lo : hi) = lambda;
  }
  if (!found) throw ConstructionError("bisection did not reach tolerance");
  Vector& d = spec.attacked == Modality::Audio ? r.delta.delta_audio : r.delta.delta_video;
  d = scaled(u, lambda);
  r.delta_norm = lp_norm(d, NormKind::L2);
  const MultiModalSample adv = perturbed(x, r.delta, ModalityMask::Both);
  r.fused_score_after = m.fused_score(adv.audio, adv.video);
  r.label_flipped = r.fused_score_after > 0.0;
  return r;
}

/// True iff the label flipped, only the attacked modality was perturbed,
/// and, in the IVT case, ||delta|| < eps_A with fused score t/2 within tol.
/// In the no-noise case delta must be zero.
inline bool verify_theorem1(const TheoremReport& r, const CounterexampleSpec& spec) {
  if (!r.label_flipped || r.attacked != spec.attacked) return false;
  const Vector& untouched = spec.attacked == Modality::Audio ? r.delta.delta_video : r.delta.delta_audio;
  if (lp_norm(untouched, NormKind::LInf) != 0.0) return false;
  if (r.theorem_case == TheoremCase::NoNoiseNeeded) return r.delta_norm == 0.0 && r.fused_score_before > 0.0;
  return r.delta_norm < spec.eps_A && std::abs(r.fused_score_after - spec.t / 2.0) < spec.tol;
}

// ---------------------------------------------------------------------------
// empirical search on trained models

struct EmpiricalBreak {
  std::size_t sample_index = 0;
  double joint_threshold = 0.0;    // Both-mask pointwise robustness
  double unimodal_epsilon = 0.0;   // epsilon of the flipping unimodal attack
};

struct EmpiricalSearchOptions {
  NormKind norm = NormKind::L2;
  Modality attacked = Modality::Audio;
  double eps_max = 4.0;
  double tol = 1e-3;
  std::size_t iterations = 20;
  /// Unimodal attacks are tried at these fractions of the joint threshold.
  std::vector<double> fractions{0.25, 0.5, 0.75, 0.9, 0.99};
  /// Stop after this many hits (0 = scan everything).
  std::size_t max_hits = 0;
};

/// Samples where a unimodal PGD attack with epsilon strictly below the
/// sample's joint (Both-mask) robustness threshold flips the fused label.
inline std::vector<EmpiricalBreak> empirical_unimodal_breaks(const FusionModel& model, const Dataset& data,
                                                             const EmpiricalSearchOptions& opt = {}) {
  const ModalityMask uni = opt.attacked == Modality::Audio ? ModalityMask::AudioOnly : ModalityMask::VideoOnly;
  std::vector<std::optional<EmpiricalBreak>> slots(data.size());
  parallel_for(data.size(), [&](std::size_t i) {
    const auto& s = data.samples[i];
    const double joint = pointwise_robustness(model, s, opt.norm, ModalityMask::Both, opt.eps_max, opt.tol,
                                              {opt.iterations, std::nullopt});
    if (joint <= 0.0) return;
    for (double f : opt.fractions) {
      const double eps = f * joint;
      if (!(eps < joint)) continue;
      if (attack_flips(model, s, {eps, opt.norm, opt.iterations, std::nullopt, uni})) {
        slots[i] = EmpiricalBreak{i, joint, eps};
        return;
      }
    }
  });
  std::vector<EmpiricalBreak> out;
  for (auto& s : slots)
    if (s) {
      out.push_back(*s);
      if (opt.max_hits && out.size() >= opt.max_hits) break;
    }
  return out;
}

}  // namespace mmr
