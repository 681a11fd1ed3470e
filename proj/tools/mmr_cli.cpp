// mmr: command line front end for the robustness workbench.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mmr/mmr.hpp"

namespace fs = std::filesystem;
using namespace mmr;

namespace {

struct CommonArgs {
  std::string config;
  std::optional<double> epsilon;
  std::optional<std::string> norm;
  std::optional<std::size_t> iterations;
  std::optional<std::string> mask;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::vector<std::string> set;
  std::string data;
  std::string test;
  std::string model;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--config", a.config, "key = value config file");
  cmd->add_option("--epsilon", a.epsilon, "attack radius per modality");
  cmd->add_option("--norm", a.norm, "attack norm: l1, l2 or linf");
  cmd->add_option("--iterations", a.iterations, "PGD iterations");
  cmd->add_option("--mask", a.mask, "attacked modalities: audio, video or both");
  cmd->add_option("--seed", a.seed, "top-level seed");
  cmd->add_option("--out", a.out, "output directory");
  cmd->add_option("--set", a.set, "extra key=value override (repeatable)");
}

ExperimentConfig build_config(const CommonArgs& a) {
  std::vector<std::pair<std::string, std::string>> pairs;
  if (!a.config.empty()) pairs = parse_config_pairs(byteio::read_file(a.config));
  for (const auto& s : a.set) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError(s, "--set expects key=value");
    pairs.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  if (a.epsilon) pairs.emplace_back("attack.epsilon", format_number(*a.epsilon));
  if (a.norm) pairs.emplace_back("attack.norm", *a.norm);
  if (a.iterations) pairs.emplace_back("attack.iterations", std::to_string(*a.iterations));
  if (a.mask) pairs.emplace_back("attack.mask", *a.mask);
  if (a.seed) pairs.emplace_back("seed", std::to_string(*a.seed));
  if (a.out) pairs.emplace_back("output.dir", *a.out);
  if (!a.data.empty()) pairs.emplace_back("data.train", a.data);
  if (!a.test.empty()) pairs.emplace_back("data.test", a.test);
  ExperimentConfig c = make_config(pairs);
  validate_config(c);
  return c;
}

fs::path out_file(const ExperimentConfig& c, const std::string& name) {
  fs::create_directories(c.output_dir);
  return fs::path(c.output_dir) / name;
}

void write_json(const fs::path& p, const nlohmann::ordered_json& j) {
  write_text(p, j.dump(2) + "\n");
  std::cout << "wrote " << p.string() << "\n";
}

int cmd_gen(const CommonArgs& a) {
  const ExperimentConfig c = build_config(a);
  const DataSplit d = experiment_data(c);
  const fs::path tr = out_file(c, "train.mmr"), te = out_file(c, "test.mmr");
  save_dataset(d.train, tr.string());
  save_dataset(d.test, te.string());
  std::cout << "wrote " << tr.string() << " (" << d.train.size() << " samples)\n";
  std::cout << "wrote " << te.string() << " (" << d.test.size() << " samples)\n";
  return 0;
}

int cmd_train(const CommonArgs& a, std::optional<Strategy> forced) {
  ExperimentConfig c = build_config(a);
  if (forced) c.strategy = *forced;
  const DataSplit d = experiment_data(c);
  const TrainedModel tm = train_with_strategy(c, d.train, c.strategy);
  const fs::path mp = out_file(c, "model.mmrm");
  save_checkpoint(tm.model, mp.string());
  std::cout << "wrote " << mp.string() << "\n";
  nlohmann::ordered_json j;
  j["seed"] = c.seed;
  j["strategy"] = to_string(c.strategy);
  j["epochs"] = c.train.epochs;
  j["loss_history"] = tm.loss_history;
  j["train_accuracy"] = accuracy(tm.model, d.train);
  j["test_accuracy"] = accuracy(tm.model, d.test);
  if (c.strategy == Strategy::Mixup) {
    nlohmann::ordered_json log = nlohmann::ordered_json::array();
    for (const auto& l : tm.mixup_log) {
      nlohmann::ordered_json e;
      e["epoch"] = l.epoch;
      e["eligible"] = l.eligible;
      e["virtual_samples"] = l.virtual_samples;
      e["fell_back"] = l.fell_back;
      log.push_back(e);
    }
    j["mixup_log"] = log;
  }
  write_json(out_file(c, "train.json"), j);
  return 0;
}

FusionModel require_model(const CommonArgs& a) {
  if (a.model.empty()) throw ConfigError("--model", "a model checkpoint is required");
  return load_checkpoint(a.model);
}

/// Evaluation set: --test, else --data, else the generated test split.
Dataset eval_set(const ExperimentConfig& c) {
  if (!c.test_path.empty()) return load_dataset(c.test_path);
  if (!c.train_path.empty()) return load_dataset(c.train_path);
  return experiment_data(c).test;
}

int cmd_attack(const CommonArgs& a) {
  const ExperimentConfig c = build_config(a);
  const FusionModel m = require_model(a);
  const Dataset d = eval_set(c);
  const AttackReport rep = evaluate_under_attack(m, d, c.attack);
  nlohmann::ordered_json j = attack_json(rep);
  j["clean"] = to_json(rep.clean);
  write_json(out_file(c, "attack.json"), j);
  const fs::path pp = out_file(c, "perturbed.mmr");
  save_dataset(apply_perturbations(d, rep.perturbations, c.attack.mask), pp.string());
  std::cout << "wrote " << pp.string() << "\n";
  std::printf("clean accuracy %.4f, attacked accuracy %.4f (%s)\n", rep.clean.accuracy, rep.attacked.accuracy,
              std::string(to_string(c.attack.mask)).c_str());
  return 0;
}

int cmd_metrics(const CommonArgs& a) {
  ExperimentConfig c = build_config(a);
  const FusionModel m = require_model(a);
  const ExperimentResult r = evaluate_model(m, eval_set(c), c);
  write_reports(r, c.output_dir);
  std::cout << "wrote " << (fs::path(c.output_dir) / "summary.json").string() << "\n";
  std::cout << "wrote " << (fs::path(c.output_dir) / "per_class.csv").string() << "\n";
  return 0;
}

int cmd_report(const CommonArgs& a) {
  const ExperimentConfig c = build_config(a);
  const ExperimentResult r = run_experiment(c);
  write_reports(r, c.output_dir);
  for (const char* f : {"summary.json", "per_class.csv", "embeddings.csv"})
    if (std::string(f) != "embeddings.csv" || r.has_embeddings)
      std::cout << "wrote " << (fs::path(c.output_dir) / f).string() << "\n";
  return 0;
}

int cmd_theorem1(const CommonArgs& a) {
  const ExperimentConfig c = build_config(a);
  const CounterexampleSpec& spec = c.theorem;
  const Counterexample ce = construct_counterexample(spec);
  const TheoremReport r = find_unimodal_break(ce, spec);
  const bool ok = verify_theorem1(r, spec);
  nlohmann::ordered_json j;
  j["case"] = to_string(r.theorem_case);
  j["attacked"] = to_string(r.attacked);
  j["s"] = spec.s;
  j["t"] = spec.t;
  j["eps_A"] = spec.eps_A;
  j["unimodal_threshold"] = unimodal_threshold(ce, spec);
  j["delta_audio"] = r.delta.delta_audio;
  j["delta_video"] = r.delta.delta_video;
  j["delta_norm"] = r.delta_norm;
  j["fused_score_before"] = r.fused_score_before;
  j["fused_score_after"] = r.fused_score_after;
  j["label_flipped"] = r.label_flipped;
  j["iterations"] = r.iterations;
  j["verified"] = ok;
  write_json(out_file(c, "theorem1.json"), j);
  std::cout << (ok ? "verified" : "NOT verified") << ": " << j["case"].get<std::string>() << "\n";
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mmr: adversarial robustness workbench for multimodal fusion classifiers"};
  app.require_subcommand(1);
  CommonArgs args;
  struct Sub {
    const char* name;
    const char* help;
    bool data, model;
  };
  const Sub subs[] = {
      {"gen", "generate synthetic train and test datasets", false, false},
      {"train", "train a fusion model with the configured strategy", true, false},
      {"mixup-train", "train with density-convexity gated mix-up", true, false},
      {"at-train", "train with fast adversarial training", true, false},
      {"attack", "PGD-attack a dataset and export the perturbed copy", true, true},
      {"metrics", "evaluate a trained model: metrics, attacks, per-class geometry", true, true},
      {"report", "run the whole pipeline and write the reports", true, false},
      {"theorem1", "construct and verify a unimodal-break counterexample", false, false},
  };
  std::vector<CLI::App*> cmds;
  for (const Sub& s : subs) {
    CLI::App* cmd = app.add_subcommand(s.name, s.help);
    add_common(cmd, args);
    if (s.data) {
      cmd->add_option("--data", args.data, "dataset file (.mmr or .csv)");
      cmd->add_option("--test", args.test, "evaluation dataset file");
    }
    if (s.model) cmd->add_option("--model", args.model, "model checkpoint");
    cmds.push_back(cmd);
  }
  CLI11_PARSE(app, argc, argv);
  try {
    if (cmds[0]->parsed()) return cmd_gen(args);
    if (cmds[1]->parsed()) return cmd_train(args, std::nullopt);
    if (cmds[2]->parsed()) return cmd_train(args, Strategy::Mixup);
    if (cmds[3]->parsed()) return cmd_train(args, Strategy::AdversarialTraining);
    if (cmds[4]->parsed()) return cmd_attack(args);
    if (cmds[5]->parsed()) return cmd_metrics(args);
    if (cmds[6]->parsed()) return cmd_report(args);
    if (cmds[7]->parsed()) return cmd_theorem1(args);
  } catch (const Error& e) {
    std::cerr << "error: " << e.category() << ": " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: InternalError: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
