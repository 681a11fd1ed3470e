#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmr/attacks.hpp"
#include "mmr/benchmarks.hpp"
#include "mmr/byteio.hpp"
#include "mmr/dataset_io.hpp"
#include "mmr/errors.hpp"
#include "mmr/geometry.hpp"
#include "mmr/metrics.hpp"
#include "mmr/models.hpp"
#include "mmr/strategies.hpp"
#include "mmr/synthetic.hpp"
#include "mmr/theory.hpp"

namespace mmr {

enum class Strategy { Plain, Mixup, AdversarialTraining };

inline std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::Plain: return "plain";
    case Strategy::Mixup: return "mixup";
    case Strategy::AdversarialTraining: return "at";
  }
  return "?";
}

inline Strategy parse_strategy(std::string_view s) {
  if (s == "plain") return Strategy::Plain;
  if (s == "mixup") return Strategy::Mixup;
  if (s == "at") return Strategy::AdversarialTraining;
  throw DomainError("unknown strategy '" + std::string(s) + "'");
}

/// Everything one pipeline run needs. Defaults: PGD with epsilon 0.1 in l2 for 20
/// iterations, 2000 convexity samples, density at the 60th and 80th
/// percentile, mix-up gates T = 0.5 and D = 8.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  /// "custom" builds data from the data.* keys; other names pick a preset.
  std::string preset = "custom";
  std::string train_path;  // load instead of generating when set
  std::string test_path;
  SyntheticConfig data;
  std::size_t test_samples_per_class = 50;
  Architecture arch;
  TrainConfig train;
  Strategy strategy = Strategy::Plain;
  PerturbationBudget attack;
  bool universal = true;
  NormKind geometry_norm = NormKind::L2;
  double tau_low = 0.6;
  double tau_high = 0.8;
  std::size_t convexity_samples = 2000;
  MixupConfig mixup;
  PerturbationBudget at_budget;
  FastAtOptions at;
  std::string output_dir = "out";
  bool embeddings = false;

  // theorem1 subcommand
  CounterexampleSpec theorem{{1.0}, {1.0}, 3.0, 2.0, 4.0};
};

// ---------------------------------------------------------------------------
// config text

namespace config_detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline double to_double(const std::string& field, const std::string& v) {
  double x = 0.0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), x);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size() || !std::isfinite(x))
    throw ConfigError(field, "expected a number, got '" + v + "'");
  return x;
}

inline std::uint64_t to_u64(const std::string& field, const std::string& v) {
  std::uint64_t x = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), x);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size() || v.empty())
    throw ConfigError(field, "expected a non-negative integer, got '" + v + "'");
  return x;
}

inline std::size_t to_size(const std::string& field, const std::string& v) {
  return static_cast<std::size_t>(to_u64(field, v));
}

inline bool to_bool(const std::string& field, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(field, "expected true or false, got '" + v + "'");
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline std::vector<std::size_t> to_sizes(const std::string& field, const std::string& v) {
  std::vector<std::size_t> out;
  for (const auto& s : split_list(v)) out.push_back(to_size(field, s));
  return out;
}

inline std::vector<double> to_doubles(const std::string& field, const std::string& v) {
  std::vector<double> out;
  for (const auto& s : split_list(v)) out.push_back(to_double(field, s));
  if (out.empty()) throw ConfigError(field, "expected at least one number");
  return out;
}

/// Runs a parser that may throw a library error and re-raises it as a
/// ConfigError naming the field.
template <class F>
auto named(const std::string& field, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(field, e.what());
  }
}

using Setter = std::function<void(ExperimentConfig&, const std::string& field, const std::string& value)>;

inline const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    t["seed"] = [](auto& c, auto& f, auto& v) { c.seed = to_u64(f, v); };
    t["data.preset"] = [](auto& c, auto&, auto& v) { c.preset = v; };
    t["data.train"] = [](auto& c, auto&, auto& v) { c.train_path = v; };
    t["data.test"] = [](auto& c, auto&, auto& v) { c.test_path = v; };
    t["data.classes"] = [](auto& c, auto& f, auto& v) { c.data.num_classes = to_size(f, v); };
    t["data.samples_per_class"] = [](auto& c, auto& f, auto& v) { c.data.samples_per_class = to_size(f, v); };
    t["data.test_samples_per_class"] = [](auto& c, auto& f, auto& v) { c.test_samples_per_class = to_size(f, v); };
    t["data.audio_dim"] = [](auto& c, auto& f, auto& v) { c.data.audio_dim = to_size(f, v); };
    t["data.video_dim"] = [](auto& c, auto& f, auto& v) { c.data.video_dim = to_size(f, v); };
    t["data.latent_dim"] = [](auto& c, auto& f, auto& v) { c.data.latent_dim = to_size(f, v); };
    t["data.spread"] = [](auto& c, auto& f, auto& v) { c.data.cluster_spread = to_doubles(f, v); };
    t["data.shapes"] = [](auto& c, auto& f, auto& v) {
      c.data.shapes.clear();
      for (const auto& s : split_list(v)) c.data.shapes.push_back(named(f, [&] { return parse_shape(s); }));
      if (c.data.shapes.empty()) throw ConfigError(f, "expected at least one shape");
    };
    t["data.correlation"] = [](auto& c, auto& f, auto& v) { c.data.cross_modal_correlation = to_double(f, v); };
    t["data.separation"] = [](auto& c, auto& f, auto& v) { c.data.separation = to_double(f, v); };
    t["data.shape_radius"] = [](auto& c, auto& f, auto& v) { c.data.shape_radius = to_double(f, v); };
    t["data.noise"] = [](auto& c, auto& f, auto& v) { c.data.modality_noise = to_double(f, v); };
    t["data.audio_gain"] = [](auto& c, auto& f, auto& v) { c.data.audio_gain = to_double(f, v); };
    t["data.video_gain"] = [](auto& c, auto& f, auto& v) { c.data.video_gain = to_double(f, v); };
    t["data.multi_label"] = [](auto& c, auto& f, auto& v) { c.data.multi_label = to_bool(f, v); };
    t["model.audio_hidden"] = [](auto& c, auto& f, auto& v) { c.arch.audio_hidden = to_sizes(f, v); };
    t["model.video_hidden"] = [](auto& c, auto& f, auto& v) { c.arch.video_hidden = to_sizes(f, v); };
    t["model.head_hidden"] = [](auto& c, auto& f, auto& v) { c.arch.head_hidden = to_sizes(f, v); };
    t["model.audio_bottleneck"] = [](auto& c, auto& f, auto& v) { c.arch.audio_bottleneck = to_size(f, v); };
    t["model.video_bottleneck"] = [](auto& c, auto& f, auto& v) { c.arch.video_bottleneck = to_size(f, v); };
    t["model.activation"] = [](auto& c, auto& f, auto& v) {
      c.arch.activation = named(f, [&] { return parse_activation(v); });
    };
    t["train.strategy"] = [](auto& c, auto& f, auto& v) { c.strategy = named(f, [&] { return parse_strategy(v); }); };
    t["train.epochs"] = [](auto& c, auto& f, auto& v) { c.train.epochs = to_size(f, v); };
    t["train.batch_size"] = [](auto& c, auto& f, auto& v) { c.train.batch_size = to_size(f, v); };
    t["train.learning_rate"] = [](auto& c, auto& f, auto& v) { c.train.learning_rate = to_double(f, v); };
    t["train.momentum"] = [](auto& c, auto& f, auto& v) { c.train.momentum = to_double(f, v); };
    t["train.optimizer"] = [](auto& c, auto& f, auto& v) {
      if (v == "sgd") c.train.optimizer = Optimizer::Sgd;
      else if (v == "momentum") c.train.optimizer = Optimizer::SgdMomentum;
      else throw ConfigError(f, "expected sgd or momentum, got '" + v + "'");
    };
    t["attack.epsilon"] = [](auto& c, auto& f, auto& v) { c.attack.epsilon = to_double(f, v); };
    t["attack.norm"] = [](auto& c, auto& f, auto& v) { c.attack.norm = named(f, [&] { return parse_norm(v); }); };
    t["attack.iterations"] = [](auto& c, auto& f, auto& v) { c.attack.iterations = to_size(f, v); };
    t["attack.step_size"] = [](auto& c, auto& f, auto& v) {
      if (v == "auto") c.attack.step_size.reset();
      else c.attack.step_size = to_double(f, v);
    };
    t["attack.mask"] = [](auto& c, auto& f, auto& v) { c.attack.mask = named(f, [&] { return parse_mask(v); }); };
    t["attack.universal"] = [](auto& c, auto& f, auto& v) { c.universal = to_bool(f, v); };
    t["geometry.norm"] = [](auto& c, auto& f, auto& v) { c.geometry_norm = named(f, [&] { return parse_norm(v); }); };
    t["geometry.tau_low"] = [](auto& c, auto& f, auto& v) { c.tau_low = to_double(f, v); };
    t["geometry.tau_high"] = [](auto& c, auto& f, auto& v) { c.tau_high = to_double(f, v); };
    t["geometry.convexity_samples"] = [](auto& c, auto& f, auto& v) { c.convexity_samples = to_size(f, v); };
    t["mixup.T"] = [](auto& c, auto& f, auto& v) { c.mixup.T = to_double(f, v); };
    t["mixup.D"] = [](auto& c, auto& f, auto& v) { c.mixup.D = to_double(f, v); };
    t["mixup.tau"] = [](auto& c, auto& f, auto& v) { c.mixup.tau = to_double(f, v); };
    t["mixup.fraction"] = [](auto& c, auto& f, auto& v) { c.mixup.mixup_fraction = to_double(f, v); };
    t["mixup.alpha"] = [](auto& c, auto& f, auto& v) {
      if (v == "uniform") c.mixup.alpha_law = AlphaLaw::Uniform;
      else if (v == "beta") c.mixup.alpha_law = AlphaLaw::Beta;
      else throw ConfigError(f, "expected uniform or beta, got '" + v + "'");
    };
    t["mixup.beta"] = [](auto& c, auto& f, auto& v) { c.mixup.beta_parameter = to_double(f, v); };
    t["at.epsilon"] = [](auto& c, auto& f, auto& v) { c.at_budget.epsilon = to_double(f, v); };
    t["at.norm"] = [](auto& c, auto& f, auto& v) { c.at_budget.norm = named(f, [&] { return parse_norm(v); }); };
    t["at.step_multiplier"] = [](auto& c, auto& f, auto& v) { c.at.step_multiplier = to_double(f, v); };
    t["at.random_init"] = [](auto& c, auto& f, auto& v) { c.at.random_init = to_bool(f, v); };
    t["output.dir"] = [](auto& c, auto&, auto& v) { c.output_dir = v; };
    t["output.embeddings"] = [](auto& c, auto& f, auto& v) { c.embeddings = to_bool(f, v); };
    t["theorem.a"] = [](auto& c, auto& f, auto& v) { c.theorem.a = to_doubles(f, v); };
    t["theorem.b"] = [](auto& c, auto& f, auto& v) { c.theorem.b = to_doubles(f, v); };
    t["theorem.s"] = [](auto& c, auto& f, auto& v) { c.theorem.s = to_double(f, v); };
    t["theorem.t"] = [](auto& c, auto& f, auto& v) { c.theorem.t = to_double(f, v); };
    t["theorem.eps_A"] = [](auto& c, auto& f, auto& v) { c.theorem.eps_A = to_double(f, v); };
    t["theorem.tol"] = [](auto& c, auto& f, auto& v) { c.theorem.tol = to_double(f, v); };
    t["theorem.attacked"] = [](auto& c, auto& f, auto& v) {
      if (v == "audio") c.theorem.attacked = Modality::Audio;
      else if (v == "video") c.theorem.attacked = Modality::Video;
      else throw ConfigError(f, "expected audio or video, got '" + v + "'");
    };
    t["theorem.encoder"] = [](auto& c, auto& f, auto& v) {
      if (v == "identity") c.theorem.encoder = EncoderShape::Identity;
      else if (v == "smooth") c.theorem.encoder = EncoderShape::SmoothMonotone;
      else throw ConfigError(f, "expected identity or smooth, got '" + v + "'");
    };
    return t;
  }();
  return table;
}

inline void apply_preset(ExperimentConfig& c) {
  if (c.preset == "custom") return;
  const Benchmark b = named("data.preset", [&] { return benchmark_preset(c.preset, c.seed); });
  c.data = b.train_data;
  c.test_samples_per_class = b.test_data.samples_per_class;
  c.arch = b.arch;
  c.train = b.train;
  c.mixup = b.mixup;
}

}  // namespace config_detail

/// Ordered key/value pairs of a config text. Lines are `key = value`;
/// `#` starts a comment.
inline std::vector<std::pair<std::string, std::string>> parse_config_pairs(std::string_view text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const std::string trimmed = config_detail::trim(line);
    if (trimmed.empty()) continue;
    const auto eq = trimmed.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no), "expected 'key = value'");
    std::string key = config_detail::trim(std::string_view(trimmed).substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no), "empty key");
    out.emplace_back(std::move(key), config_detail::trim(std::string_view(trimmed).substr(eq + 1)));
  }
  return out;
}

inline bool is_config_key(const std::string& key) { return config_detail::setters().count(key) != 0; }

inline std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& [k, _] : config_detail::setters()) out.push_back(k);
  return out;
}

/// Builds a config from key/value pairs. The seed and preset are applied
/// first so that explicit keys override preset values regardless of order.
inline ExperimentConfig make_config(const std::vector<std::pair<std::string, std::string>>& pairs) {
  const auto& table = config_detail::setters();
  ExperimentConfig c;
  std::map<std::string, std::string> seen;
  for (const auto& [k, v] : pairs) {
    if (!table.count(k)) throw ConfigError(k, "unknown key");
    seen[k] = v;
  }
  for (const char* first : {"seed", "data.preset"})
    if (auto it = seen.find(first); it != seen.end()) table.at(first)(c, it->first, it->second);
  config_detail::apply_preset(c);
  for (const auto& [k, v] : pairs)
    if (k != "seed" && k != "data.preset") table.at(k)(c, k, v);
  return c;
}

inline ExperimentConfig parse_config(std::string_view text) { return make_config(parse_config_pairs(text)); }

inline ExperimentConfig load_config(const std::string& path) {
  return parse_config(byteio::read_file(path));
}

/// Rejects values that are well-formed but outside their domain, naming
/// the offending key.
inline void validate_config(const ExperimentConfig& c) {
  using config_detail::named;
  if (c.train_path.empty()) named("data", [&] { c.data.validate(); });
  if (c.test_samples_per_class == 0) throw ConfigError("data.test_samples_per_class", "must be >= 1");
  named("train", [&] { c.train.validate(); });
  named("attack", [&] { c.attack.validate(); });
  named("at", [&] { c.at_budget.validate(); });
  named("mixup", [&] { c.mixup.validate(); });
  if (!(c.tau_low > 0.0 && c.tau_low < 1.0)) throw ConfigError("geometry.tau_low", "must lie in (0, 1)");
  if (!(c.tau_high > 0.0 && c.tau_high < 1.0)) throw ConfigError("geometry.tau_high", "must lie in (0, 1)");
  if (c.convexity_samples == 0) throw ConfigError("geometry.convexity_samples", "must be >= 1");
  if (c.arch.audio_bottleneck == 0 || c.arch.video_bottleneck == 0)
    throw ConfigError("model", "bottleneck widths must be >= 1");
}

// ---------------------------------------------------------------------------
// pipeline

struct DataSplit {
  Dataset train;
  Dataset test;
};

/// Training and evaluation data: loaded when paths are set, otherwise
/// generated from one seed (the test split shares the latent maps).
inline DataSplit experiment_data(const ExperimentConfig& c) {
  DataSplit d;
  SyntheticConfig sc = c.data;
  sc.seed = c.seed;
  if (!c.train_path.empty()) {
    d.train = load_dataset(c.train_path);
  } else {
    d.train = generate_synthetic(sc);
  }
  if (!c.test_path.empty()) {
    d.test = load_dataset(c.test_path);
  } else if (!c.train_path.empty()) {
    d.test = d.train;
  } else {
    sc.samples_per_class = c.test_samples_per_class;
    sc.split = 1;
    d.test = generate_synthetic(sc);
  }
  d.train.validate();
  d.test.validate();
  if (d.train.audio_dim != d.test.audio_dim || d.train.video_dim != d.test.video_dim ||
      d.train.num_classes != d.test.num_classes)
    throw ShapeError("train and test datasets have different shapes");
  return d;
}

inline Architecture experiment_architecture(const ExperimentConfig& c, const Dataset& d) {
  Architecture a = c.arch;
  a.audio_dim = d.audio_dim;
  a.video_dim = d.video_dim;
  a.num_classes = d.num_classes;
  a.loss_kind = d.multi_label ? LossKind::SigmoidBce : LossKind::SoftmaxCrossEntropy;
  return a;
}

struct TrainedModel {
  FusionModel model;
  std::vector<double> loss_history;
  std::vector<MixupEpochLog> mixup_log;
};

inline TrainedModel train_with_strategy(const ExperimentConfig& c, const Dataset& train_set, Strategy s) {
  TrainConfig tc = c.train;
  tc.seed = c.seed;
  const FusionModel init = make_model(experiment_architecture(c, train_set), c.seed);
  TrainedModel out;
  TrainResult r;
  switch (s) {
    case Strategy::Plain:
      r = train(init, train_set, tc);
      break;
    case Strategy::Mixup: {
      MixupConfig mc = c.mixup;
      mc.seed = c.seed;
      r = train_mixup(init, train_set, tc, mc, &out.mixup_log);
      break;
    }
    case Strategy::AdversarialTraining:
      r = adversarial_train(init, train_set, tc, c.at_budget, c.at);
      break;
  }
  out.model = std::move(r.model);
  out.loss_history = std::move(r.loss_history);
  return out;
}

struct PerClassRow {
  std::size_t class_id = 0;
  std::size_t n_c = 0;
  double kappa = 0.0;
  std::optional<double> rho_tau60;  // density at geometry.tau_low
  std::optional<double> rho_tau80;  // density at geometry.tau_high
  std::optional<double> clean_acc;
  std::optional<double> attacked_acc;
  std::optional<double> drop_rate;
};

/// Per-class geometry of the evaluation set joined with the per-class
/// performance of one attack report.
inline std::vector<PerClassRow> per_class_rows(const FusionModel& model, const Dataset& eval,
                                               const AttackReport& rep, const ExperimentConfig& c) {
  const Embeddings emb = extract_bottleneck(model, eval);
  const GeometryConfig low{c.geometry_norm, c.tau_low, c.convexity_samples, c.seed};
  const GeometryConfig high{c.geometry_norm, c.tau_high, c.convexity_samples, c.seed};
  const std::vector<ClassGeometry> gl = all_class_geometry(model, emb, low);
  const std::vector<ClassGeometry> gh = all_class_geometry(model, emb, high);
  std::vector<PerClassRow> rows;
  for (std::size_t k = 0; k < gh.size(); ++k) {
    PerClassRow r;
    r.class_id = gh[k].class_id;
    r.n_c = gh[k].n_c;
    r.kappa = gh[k].kappa;
    r.rho_tau60 = gl[k].rho;
    r.rho_tau80 = gh[k].rho;
    r.clean_acc = rep.clean_per_class[r.class_id];
    r.attacked_acc = rep.attacked_per_class[r.class_id];
    r.drop_rate = rep.per_class_drop[r.class_id];
    rows.push_back(r);
  }
  return rows;
}

struct ExperimentResult {
  nlohmann::ordered_json summary;
  std::vector<PerClassRow> per_class;
  Embeddings embeddings;
  bool has_embeddings = false;
  FusionModel model;
};

inline nlohmann::ordered_json to_json(const MetricBundle& m) {
  nlohmann::ordered_json j;
  j["accuracy"] = m.accuracy;
  j["mAP"] = m.mAP;
  j["AUC"] = m.AUC;
  j["d_prime"] = m.d_prime;
  return j;
}

inline nlohmann::ordered_json to_json(const PerturbationBudget& b) {
  nlohmann::ordered_json j;
  j["epsilon"] = b.epsilon;
  j["norm"] = to_string(b.norm);
  j["iterations"] = b.iterations;
  j["step_size"] = b.step();
  j["mask"] = to_string(b.mask);
  return j;
}

inline nlohmann::ordered_json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

inline nlohmann::ordered_json attack_json(const AttackReport& rep) {
  nlohmann::ordered_json j;
  j["budget"] = to_json(rep.budget);
  j["attacked"] = to_json(rep.attacked);
  j["accuracy_drop_rate"] =
      rep.clean.accuracy > 0.0 ? nlohmann::ordered_json(drop_rate(rep.clean.accuracy, rep.attacked.accuracy))
                               : nlohmann::ordered_json(nullptr);
  nlohmann::ordered_json per = nlohmann::ordered_json::array();
  for (const auto& d : rep.per_class_drop) per.push_back(optional_json(d));
  j["per_class_drop_rate"] = per;
  return j;
}

/// Evaluation of an already trained model: clean metrics, the three
/// masked PGD attacks, the universal perturbation and per-class geometry.
inline ExperimentResult evaluate_model(const FusionModel& model, const Dataset& eval, const ExperimentConfig& c) {
  ExperimentResult res;
  res.model = model;
  nlohmann::ordered_json& s = res.summary;
  s["clean"] = to_json(eval_metrics(score_matrix(model, eval.samples), label_matrix(eval), eval.multi_label));
  nlohmann::ordered_json attacks;
  std::optional<AttackReport> chosen;
  for (ModalityMask m : {ModalityMask::AudioOnly, ModalityMask::VideoOnly, ModalityMask::Both}) {
    PerturbationBudget b = c.attack;
    b.mask = m;
    AttackReport rep = evaluate_under_attack(model, eval, b);
    attacks[std::string(to_string(m))] = attack_json(rep);
    if (m == c.attack.mask) chosen = std::move(rep);
  }
  s["attacks"] = attacks;
  if (c.universal) {
    const Perturbation u = universal_perturbation(model, eval.samples, c.attack, c.seed);
    const Dataset adv = apply_perturbations(eval, std::vector<Perturbation>(eval.size(), u), c.attack.mask);
    nlohmann::ordered_json uj;
    uj["budget"] = to_json(c.attack);
    uj["attacked"] = to_json(eval_metrics(score_matrix(model, adv.samples), label_matrix(adv), adv.multi_label));
    uj["audio_norm"] = lp_norm(u.delta_audio, c.attack.norm);
    uj["video_norm"] = lp_norm(u.delta_video, c.attack.norm);
    s["universal"] = uj;
  }
  res.per_class = per_class_rows(model, eval, *chosen, c);
  nlohmann::ordered_json classes = nlohmann::ordered_json::array();
  for (const auto& r : res.per_class) {
    nlohmann::ordered_json j;
    j["class_id"] = r.class_id;
    j["n_c"] = r.n_c;
    j["kappa"] = r.kappa;
    j["rho_tau_low"] = optional_json(r.rho_tau60);
    j["rho_tau_high"] = optional_json(r.rho_tau80);
    j["clean"] = optional_json(r.clean_acc);
    j["attacked"] = optional_json(r.attacked_acc);
    j["drop_rate"] = optional_json(r.drop_rate);
    classes.push_back(j);
  }
  s["classes"] = classes;
  if (c.embeddings) {
    res.embeddings = extract_bottleneck(model, eval);
    res.has_embeddings = true;
  }
  return res;
}

/// Full pipeline: data, training with the configured strategy, attacks,
/// geometry. Deterministic in the config.
inline ExperimentResult run_experiment(const ExperimentConfig& c) {
  validate_config(c);
  const DataSplit d = experiment_data(c);
  const TrainedModel tm = train_with_strategy(c, d.train, c.strategy);
  nlohmann::ordered_json head;
  head["seed"] = c.seed;
  head["strategy"] = to_string(c.strategy);
  nlohmann::ordered_json dj;
  dj["source"] = c.train_path.empty() ? "synthetic:" + c.preset : c.train_path;
  dj["train_samples"] = d.train.size();
  dj["test_samples"] = d.test.size();
  dj["classes"] = d.train.num_classes;
  dj["audio_dim"] = d.train.audio_dim;
  dj["video_dim"] = d.train.video_dim;
  dj["multi_label"] = d.train.multi_label;
  head["data"] = dj;
  nlohmann::ordered_json tj;
  tj["epochs"] = c.train.epochs;
  tj["final_loss"] = tm.loss_history.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(tm.loss_history.back());
  if (c.strategy == Strategy::Mixup) {
    std::size_t virt = 0, fallback = 0;
    for (const auto& l : tm.mixup_log) {
      virt += l.virtual_samples;
      fallback += l.fell_back ? 1 : 0;
    }
    tj["mixup_virtual_samples"] = virt;
    tj["mixup_fallback_epochs"] = fallback;
  }
  head["train"] = tj;
  ExperimentResult res = evaluate_model(tm.model, d.test, c);
  for (auto it = res.summary.begin(); it != res.summary.end(); ++it) head[it.key()] = it.value();
  res.summary = std::move(head);
  return res;
}

// ---------------------------------------------------------------------------
// report files

/// Shortest round-trip decimal form; identical across runs and platforms.
inline std::string format_number(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

inline std::string format_optional(const std::optional<double>& x) { return x ? format_number(*x) : std::string(); }

inline std::string per_class_csv(const std::vector<PerClassRow>& rows) {
  std::string out = "class_id,n_c,kappa,rho_tau60,rho_tau80,clean_acc,attacked_acc,drop_rate\n";
  for (const auto& r : rows) {
    out += std::to_string(r.class_id) + ',' + std::to_string(r.n_c) + ',' + format_number(r.kappa) + ',' +
           format_optional(r.rho_tau60) + ',' + format_optional(r.rho_tau80) + ',' + format_optional(r.clean_acc) +
           ',' + format_optional(r.attacked_acc) + ',' + format_optional(r.drop_rate) + '\n';
  }
  return out;
}

inline std::string embeddings_csv(const Embeddings& e) {
  std::string out = "index";
  for (std::size_t k = 0; k < e.labels.cols; ++k) out += ",y" + std::to_string(k);
  for (std::size_t k = 0; k < e.points.cols; ++k) out += ",l" + std::to_string(k);
  out += '\n';
  for (std::size_t i = 0; i < e.points.rows; ++i) {
    out += std::to_string(i);
    for (std::size_t k = 0; k < e.labels.cols; ++k) out += ',' + format_number(e.labels(i, k));
    for (std::size_t k = 0; k < e.points.cols; ++k) out += ',' + format_number(e.points(i, k));
    out += '\n';
  }
  return out;
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  byteio::write_file(p.string(), std::string_view(text));
}

/// Writes summary.json, per_class.csv and (if requested) embeddings.csv.
inline void write_reports(const ExperimentResult& r, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);
  write_text(base / "summary.json", r.summary.dump(2) + "\n");
  write_text(base / "per_class.csv", per_class_csv(r.per_class));
  if (r.has_embeddings) write_text(base / "embeddings.csv", embeddings_csv(r.embeddings));
}

}  // namespace mmr
