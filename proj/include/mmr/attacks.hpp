#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mmr/errors.hpp"
#include "mmr/geometry.hpp"
#include "mmr/metrics.hpp"
#include "mmr/models.hpp"
#include "mmr/numerics.hpp"
#include "mmr/parallel.hpp"
#include "mmr/random.hpp"

namespace mmr {

enum class ModalityMask { AudioOnly, VideoOnly, Both };

inline std::string_view to_string(ModalityMask m) {
  switch (m) {
    case ModalityMask::AudioOnly: return "audio";
    case ModalityMask::VideoOnly: return "video";
    case ModalityMask::Both: return "both";
  }
  return "?";
}

inline ModalityMask parse_mask(std::string_view s) {
  if (s == "audio" || s == "audio-only" || s == "a") return ModalityMask::AudioOnly;
  if (s == "video" || s == "video-only" || s == "v") return ModalityMask::VideoOnly;
  if (s == "both" || s == "joint" || s == "av") return ModalityMask::Both;
  throw DomainError("unknown modality mask '" + std::string(s) + "'");
}

inline bool attacks_audio(ModalityMask m) { return m != ModalityMask::VideoOnly; }
inline bool attacks_video(ModalityMask m) { return m != ModalityMask::AudioOnly; }

/// The constraint set of an attack. Each attacked modality gets its own
/// l_p ball of radius epsilon.
struct PerturbationBudget {
  double epsilon = 0.1;
  NormKind norm = NormKind::L2;
  std::size_t iterations = 20;
  /// PGD step; defaults to 2.5 * epsilon / iterations.
  std::optional<double> step_size;
  ModalityMask mask = ModalityMask::Both;

  double step() const { return step_size ? *step_size : 2.5 * epsilon / static_cast<double>(iterations); }

  void validate() const {
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw BudgetError("epsilon must be a finite value >= 0");
    if (iterations == 0) throw BudgetError("iterations must be at least 1");
    if (step_size && !(*step_size > 0.0)) throw BudgetError("step_size must be positive");
  }
};

struct Perturbation {
  Vector delta_audio;
  Vector delta_video;
};

/// Sample with the perturbation added to the attacked modalities only;
/// the other modality is copied untouched.
inline MultiModalSample perturbed(const MultiModalSample& s, const Perturbation& p, ModalityMask mask) {
  MultiModalSample out = s;
  if (attacks_audio(mask)) out.audio = add(s.audio, p.delta_audio);
  if (attacks_video(mask)) out.video = add(s.video, p.delta_video);
  return out;
}

namespace detail {

/// One normalised ascent step followed by projection, in place.
inline void ascent_step(Vector& delta, ConstSpan grad, const PerturbationBudget& b, double alpha) {
  const double gn = lp_norm(grad, b.norm);
  if (gn == 0.0) return;
  if (b.norm == NormKind::LInf) {
    for (std::size_t i = 0; i < delta.size(); ++i)
      delta[i] += alpha * (grad[i] > 0.0 ? 1.0 : grad[i] < 0.0 ? -1.0 : 0.0);
  } else {
    for (std::size_t i = 0; i < delta.size(); ++i) delta[i] += alpha * grad[i] / gn;
  }
  delta = lp_project(delta, b.norm, b.epsilon);
}

}  // namespace detail

struct PgdResult {
  Perturbation delta;  // best-loss iterate
  double clean_loss = 0.0;
  double best_loss = 0.0;
  std::size_t best_iteration = 0;  // 0 = unperturbed start
};

/// Loss-ascent PGD from delta = 0. Each attacked modality takes its own
/// l_p-normalised step and is projected onto its own epsilon ball. The
/// iterate with the largest loss (starting point included) is returned.
inline PgdResult pgd_attack_detailed(const FusionModel& model, const MultiModalSample& s,
                                     const PerturbationBudget& budget) {
  budget.validate();
  check_input_dims(model, s.audio, s.video);
  const bool do_a = attacks_audio(budget.mask), do_v = attacks_video(budget.mask);
  const double alpha = budget.step();
  Perturbation cur{Vector(s.audio.size(), 0.0), Vector(s.video.size(), 0.0)};
  PgdResult r;
  r.delta = cur;
  for (std::size_t it = 0; it <= budget.iterations; ++it) {
    const MultiModalSample x = perturbed(s, cur, budget.mask);
    const Backprop bp = backprop(model, x.audio, x.video, x.label);
    if (it == 0) {
      r.clean_loss = r.best_loss = bp.loss;
    } else if (bp.loss > r.best_loss) {
      r.best_loss = bp.loss;
      r.delta = cur;
      r.best_iteration = it;
    }
    if (it == budget.iterations) break;
    if (do_a) detail::ascent_step(cur.delta_audio, bp.grad_audio, budget, alpha);
    if (do_v) detail::ascent_step(cur.delta_video, bp.grad_video, budget, alpha);
  }
  return r;
}

inline Perturbation pgd_attack(const FusionModel& model, const MultiModalSample& s, const PerturbationBudget& budget) {
  return pgd_attack_detailed(model, s, budget).delta;
}

inline double mean_loss(const FusionModel& model, std::span<const MultiModalSample> samples, const Perturbation& p,
                        ModalityMask mask) {
  double total = 0.0;
  for (const auto& s : samples) {
    const MultiModalSample x = perturbed(s, p, mask);
    total += loss_value(model.loss_kind, forward(model, x.audio, x.video).logits, x.label);
  }
  return total / static_cast<double>(samples.size());
}

/// A single perturbation raising the mean loss over `samples`: batched PGD
/// on the mean-loss gradient with the same normalised step and projection
/// as pgd_attack. batch_size 0 uses the whole subset per step; otherwise
/// batches follow a shuffled order drawn from `seed`. The iterate with the
/// largest full-subset mean loss is returned.
inline Perturbation universal_perturbation(const FusionModel& model, std::span<const MultiModalSample> samples,
                                           const PerturbationBudget& budget, std::uint64_t seed = 0,
                                           std::size_t batch_size = 0) {
  budget.validate();
  if (samples.empty()) throw EmptyInputError("universal perturbation over an empty subset");
  const std::size_t n = samples.size();
  const std::size_t bs = batch_size == 0 ? n : std::min(batch_size, n);
  const bool do_a = attacks_audio(budget.mask), do_v = attacks_video(budget.mask);
  Perturbation cur{Vector(model.audio_dim(), 0.0), Vector(model.video_dim(), 0.0)};
  Perturbation best = cur;
  double best_loss = mean_loss(model, samples, cur, budget.mask);
  Rng rng(derive_seed(seed, 0x0d1));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Vector> ga(bs), gv(bs);
  for (std::size_t it = 0; it < budget.iterations; ++it) {
    if (bs < n) rng.shuffle(order);
    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t stop = std::min(n, start + bs);
      parallel_for(stop - start, [&](std::size_t k) {
        const MultiModalSample x = perturbed(samples[order[start + k]], cur, budget.mask);
        Backprop bp = backprop(model, x.audio, x.video, x.label);
        ga[k] = std::move(bp.grad_audio);
        gv[k] = std::move(bp.grad_video);
      });
      Vector mean_a(model.audio_dim(), 0.0), mean_v(model.video_dim(), 0.0);
      const double w = 1.0 / static_cast<double>(stop - start);
      for (std::size_t k = 0; k < stop - start; ++k) {
        axpy(w, ga[k], mean_a);
        axpy(w, gv[k], mean_v);
      }
      if (do_a) detail::ascent_step(cur.delta_audio, mean_a, budget, budget.step());
      if (do_v) detail::ascent_step(cur.delta_video, mean_v, budget, budget.step());
    }
    const double l = mean_loss(model, samples, cur, budget.mask);
    if (l > best_loss) {
      best_loss = l;
      best = cur;
    }
  }
  return best;
}

/// Whether a PGD attack of the given budget changes the model's decision.
inline bool attack_flips(const FusionModel& model, const MultiModalSample& s, const PerturbationBudget& budget) {
  const Vector clean = forward(model, s.audio, s.video).logits;
  const MultiModalSample adv = perturbed(s, pgd_attack(model, s, budget), budget.mask);
  return !same_decision(model.loss_kind, clean, forward(model, adv.audio, adv.video).logits);
}

struct PointwiseOptions {
  std::size_t iterations = 20;
  std::optional<double> step_size;  // default scales with the probed epsilon
};

/// Empirical maximum allowable perturbation: bisection over [0, eps_max]
/// with pgd_attack as the oracle, returning the largest probed epsilon (to
/// within tol) at which the decision survived. Samples misclassified
/// without any attack get 0. An empirical upper bound, not a certificate.
inline double pointwise_robustness(const FusionModel& model, const MultiModalSample& s, NormKind norm,
                                   ModalityMask mask, double eps_max, double tol,
                                   const PointwiseOptions& opt = {}) {
  if (!(eps_max > 0.0)) throw BudgetError("eps_max must be positive");
  if (!(tol > 0.0)) throw BudgetError("tol must be positive");
  if (!is_correct(model.loss_kind, forward(model, s.audio, s.video).logits, s.label)) return 0.0;
  auto broken = [&](double eps) {
    PerturbationBudget b{eps, norm, opt.iterations, opt.step_size, mask};
    return attack_flips(model, s, b);
  };
  if (!broken(eps_max)) return eps_max;
  double lo = 0.0, hi = eps_max;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    (broken(mid) ? hi : lo) = mid;
  }
  return lo;
}

/// Clean vs attacked evaluation of a dataset.
struct AttackReport {
  MetricBundle clean;
  MetricBundle attacked;
  std::vector<std::optional<double>> clean_per_class;
  std::vector<std::optional<double>> attacked_per_class;
  /// Per-class drop rate; empty where clean performance is zero or undefined.
  std::vector<std::optional<double>> per_class_drop;
  PerturbationBudget budget;
  std::vector<ClassGeometry> per_class_geometry;
  std::vector<Perturbation> perturbations;
};

inline Matrix score_matrix(const FusionModel& model, std::span<const MultiModalSample> samples) {
  Matrix out(samples.size(), model.num_classes());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Vector s = scores(model.loss_kind, forward(model, samples[i].audio, samples[i].video).logits);
    std::copy(s.begin(), s.end(), out.row(i).begin());
  }
  return out;
}

inline Matrix label_matrix(const Dataset& data) {
  Matrix out(data.size(), data.num_classes);
  for (std::size_t i = 0; i < data.size(); ++i)
    std::copy(data.samples[i].label.begin(), data.samples[i].label.end(), out.row(i).begin());
  return out;
}

inline std::vector<std::optional<double>> drop_rates(const std::vector<std::optional<double>>& clean,
                                                     const std::vector<std::optional<double>>& attacked) {
  std::vector<std::optional<double>> out(clean.size());
  for (std::size_t c = 0; c < clean.size(); ++c)
    if (clean[c] && attacked[c] && *clean[c] > 0.0) out[c] = drop_rate(*clean[c], *attacked[c]);
  return out;
}

/// Attacks every sample with pgd_attack and evaluates clean and perturbed
/// inputs.
inline AttackReport evaluate_under_attack(const FusionModel& model, const Dataset& data,
                                          const PerturbationBudget& budget) {
  budget.validate();
  if (data.empty()) throw EmptyInputError("cannot evaluate an empty dataset");
  AttackReport rep;
  rep.budget = budget;
  rep.perturbations.resize(data.size());
  parallel_for(data.size(), [&](std::size_t i) { rep.perturbations[i] = pgd_attack(model, data.samples[i], budget); });
  std::vector<MultiModalSample> adv(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) adv[i] = perturbed(data.samples[i], rep.perturbations[i], budget.mask);
  const Matrix labels = label_matrix(data);
  const Matrix clean_scores = score_matrix(model, data.samples);
  const Matrix adv_scores = score_matrix(model, adv);
  rep.clean = eval_metrics(clean_scores, labels, data.multi_label);
  rep.attacked = eval_metrics(adv_scores, labels, data.multi_label);
  rep.clean_per_class = per_class_performance(clean_scores, labels, data.multi_label);
  rep.attacked_per_class = per_class_performance(adv_scores, labels, data.multi_label);
  rep.per_class_drop = drop_rates(rep.clean_per_class, rep.attacked_per_class);
  return rep;
}

/// Dataset of the perturbed inputs, for replay through the dataset format.
inline Dataset apply_perturbations(const Dataset& data, std::span<const Perturbation> deltas, ModalityMask mask) {
  if (deltas.size() != data.size()) throw ShapeError("one perturbation per sample required");
  Dataset out = data;
  for (std::size_t i = 0; i < data.size(); ++i) out.samples[i] = perturbed(data.samples[i], deltas[i], mask);
  return out;
}

}  // namespace mmr
