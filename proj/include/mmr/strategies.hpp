#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "mmr/attacks.hpp"
#include "mmr/errors.hpp"
#include "mmr/geometry.hpp"
#include "mmr/models.hpp"
#include "mmr/random.hpp"

namespace mmr {

// ---------------------------------------------------------------------------
// density-convexity gated mix-up

enum class AlphaLaw { Uniform, Beta };

struct MixupConfig {
  double T = 0.5;  // convexity threshold: a class qualifies when kappa < T
  double D = 8.0;  // density threshold: a class qualifies when rho > D
  double tau = 0.8;
  AlphaLaw alpha_law = AlphaLaw::Uniform;
  double beta_parameter = 0.4;  // Beta(a, a) when alpha_law == Beta
  double mixup_fraction = 0.5;
  std::uint64_t seed = 0;
  NormKind norm = NormKind::L2;
  std::size_t n_convexity = 2000;

  void validate() const {
    if (!(T >= 0.0 && T <= 1.0)) throw DomainError("mixup T must lie in [0, 1]");
    if (!(D > 0.0)) throw DomainError("mixup D must be positive");
    if (!(mixup_fraction >= 0.0 && mixup_fraction <= 1.0)) throw DomainError("mixup_fraction must lie in [0, 1]");
    if (!(tau > 0.0 && tau < 1.0)) throw DomainError("mixup tau must lie in (0, 1)");
    if (alpha_law == AlphaLaw::Beta && !(beta_parameter > 0.0)) throw DomainError("beta parameter must be positive");
  }
};

struct Gates {
  std::set<std::size_t> eligible;
  /// Per eligible class: dataset rows inside the class's tau-quantile ball.
  std::map<std::size_t, std::vector<std::size_t>> donors;

  bool admits(std::size_t c) const { return eligible.count(c) != 0; }
};

/// A class is eligible when kappa < T and rho > D. Classes with a
/// degenerate shell (no density) or no inner members never qualify.
inline Gates compute_gates(std::span<const ClassGeometry> geometry, const MixupConfig& cfg) {
  Gates g;
  for (const ClassGeometry& cg : geometry) {
    if (!cg.rho || cg.inner_members.empty()) continue;
    if (cg.kappa < cfg.T && *cg.rho > cfg.D) {
      g.eligible.insert(cg.class_id);
      g.donors[cg.class_id] = cg.inner_members;
    }
  }
  return g;
}

struct MixPair {
  const MultiModalSample* first = nullptr;
  std::size_t first_class = 0;
  const MultiModalSample* second = nullptr;
  std::size_t second_class = 0;
  double alpha = 0.5;
};

/// alpha * first + (1 - alpha) * second for audio, video and label alike.
inline MultiModalSample mix_pair(const MixPair& p, const Gates& gates) {
  if (p.first_class == p.second_class) throw SameClassError("mix-up pair drawn from one class");
  if (!gates.admits(p.first_class) || !gates.admits(p.second_class))
    throw GateError("mix-up pair includes a class that fails the density-convexity gate");
  if (!(p.alpha >= 0.0 && p.alpha <= 1.0)) throw DomainError("mix-up alpha must lie in [0, 1]");
  const double a = p.alpha, b = 1.0 - p.alpha;
  auto mix = [&](const Vector& x, const Vector& y) {
    if (x.size() != y.size()) throw ShapeError("mix-up pair dimensions differ");
    Vector r(x.size());
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = a * x[i] + b * y[i];
    return r;
  };
  return {mix(p.first->audio, p.second->audio), mix(p.first->video, p.second->video),
          mix(p.first->label, p.second->label)};
}

inline std::vector<MultiModalSample> mixup_batch(std::span<const MixPair> pairs, const Gates& gates) {
  std::vector<MultiModalSample> out;
  out.reserve(pairs.size());
  for (const MixPair& p : pairs) out.push_back(mix_pair(p, gates));
  return out;
}

struct MixupEpochLog {
  std::size_t epoch = 0;
  std::vector<std::size_t> eligible;
  std::size_t virtual_samples = 0;
  bool fell_back = false;  // fewer than two eligible classes
};

/// Plain training where, each epoch, class geometry of the training set's
/// bottleneck embeddings is recomputed and a fraction of every batch is
/// replaced by virtual samples mixed between two eligible classes. A
/// replaced slot keeps its original sample as the first endpoint when that
/// sample's class is eligible; otherwise both endpoints come from donor
/// pools.
inline TrainResult train_mixup(FusionModel model, const Dataset& data, const TrainConfig& train_cfg,
                               const MixupConfig& cfg, std::vector<MixupEpochLog>* log = nullptr) {
  cfg.validate();
  struct State {
    Gates gates;
    std::vector<std::size_t> eligible;
    MixupEpochLog current;
  };
  auto st = std::make_shared<State>();
  auto rng = std::make_shared<Rng>(derive_seed(cfg.seed, 0x31c0));
  const bool active = cfg.mixup_fraction > 0.0;

  auto flush = [&, st] {
    if (log && active) log->push_back(st->current);
  };

  TrainHooks hooks;
  hooks.on_epoch_begin = [&, st](std::size_t epoch, const FusionModel& m) {
    if (epoch > 0) flush();
    st->current = MixupEpochLog{epoch, {}, 0, false};
    st->gates = {};
    st->eligible.clear();
    if (!active) return;
    const Embeddings emb = extract_bottleneck(m, data);
    const GeometryConfig gc{cfg.norm, cfg.tau, cfg.n_convexity, derive_seed(cfg.seed, 0x9e0 + epoch)};
    const std::vector<ClassGeometry> geo = all_class_geometry(m, emb, gc);
    st->gates = compute_gates(geo, cfg);
    st->eligible.assign(st->gates.eligible.begin(), st->gates.eligible.end());
    st->current.eligible = st->eligible;
    st->current.fell_back = st->eligible.size() < 2;
  };
  hooks.transform_batch = [&, st, rng](std::size_t, std::size_t, const FusionModel&,
                                       std::vector<MultiModalSample>& batch) {
    if (!active || st->eligible.size() < 2) return;
    const auto replace =
        static_cast<std::size_t>(std::lround(cfg.mixup_fraction * static_cast<double>(batch.size())));
    const auto& elig = st->eligible;
    auto draw_donor = [&](std::size_t c) -> const MultiModalSample& {
      const auto& pool = st->gates.donors.at(c);
      return data.samples[pool[rng->index(pool.size())]];
    };
    auto draw_alpha = [&] {
      return cfg.alpha_law == AlphaLaw::Uniform ? rng->uniform() : rng->beta(cfg.beta_parameter, cfg.beta_parameter);
    };
    for (std::size_t k = batch.size() - replace; k < batch.size(); ++k) {
      const MultiModalSample original = batch[k];
      MixPair p;
      p.first_class = primary_class(original);
      if (st->gates.admits(p.first_class)) {
        p.first = &original;
      } else {
        p.first_class = elig[rng->index(elig.size())];
        p.first = &draw_donor(p.first_class);
      }
      // partner class: uniform over the other eligible classes
      std::size_t pick = rng->index(elig.size() - 1);
      const auto self = std::find(elig.begin(), elig.end(), p.first_class) - elig.begin();
      if (static_cast<std::ptrdiff_t>(pick) >= self) ++pick;
      p.second_class = elig[pick];
      p.second = &draw_donor(p.second_class);
      p.alpha = draw_alpha();
      batch[k] = mix_pair(p, st->gates);
      ++st->current.virtual_samples;
    }
  };
  TrainResult r = train(std::move(model), data, train_cfg, hooks);
  if (train_cfg.epochs > 0) flush();
  return r;
}

// ---------------------------------------------------------------------------
// fast adversarial training

struct FastAtOptions {
  bool random_init = true;
  /// Single-step size as a multiple of epsilon.
  double step_multiplier = 1.25;
};

/// Fast adversarial training: every batch sample is replaced by a
/// single-step loss-ascent perturbation of both modalities, started from a
/// uniform draw inside each modality's epsilon ball.
inline TrainResult adversarial_train(FusionModel model, const Dataset& data, const TrainConfig& train_cfg,
                                     const PerturbationBudget& budget, const FastAtOptions& opt = {}) {
  budget.validate();
  PerturbationBudget b = budget;
  b.mask = ModalityMask::Both;
  const double alpha = opt.step_multiplier * b.epsilon;
  auto rng = std::make_shared<Rng>(derive_seed(train_cfg.seed, 0xa7a7));
  TrainHooks hooks;
  hooks.transform_batch = [b, alpha, opt, rng](std::size_t, std::size_t, const FusionModel& m,
                                               std::vector<MultiModalSample>& batch) {
    for (auto& s : batch) {
      Perturbation d{Vector(s.audio.size(), 0.0), Vector(s.video.size(), 0.0)};
      if (opt.random_init) {
        d.delta_audio = uniform_in_ball(*rng, s.audio.size(), b.norm, b.epsilon);
        d.delta_video = uniform_in_ball(*rng, s.video.size(), b.norm, b.epsilon);
      }
      const MultiModalSample start = perturbed(s, d, b.mask);
      const Backprop bp = backprop(m, start.audio, start.video, start.label);
      detail::ascent_step(d.delta_audio, bp.grad_audio, b, alpha);
      detail::ascent_step(d.delta_video, bp.grad_video, b, alpha);
      s = perturbed(s, d, b.mask);
    }
  };
  return train(std::move(model), data, train_cfg, hooks);
}

}  // namespace mmr
