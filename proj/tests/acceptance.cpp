// Acceptance run: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <numbers>
#include <string>

#include "helpers.hpp"

using namespace mmr;
using namespace testing_helpers;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

int failures = 0;

void criterion(int id, const char* name, double limit_seconds, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (secs > limit_seconds) {
    o.pass = false;
    o.detail += fmt(" (over the %.0f s limit)", limit_seconds);
  }
  failures += !o.pass;
  std::printf("criterion %2d %s  %s: %s [%.2f s]\n", id, o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), secs);
  std::fflush(stdout);
}

// ---------------------------------------------------------------------------
// shared pipelines

struct Trained {
  FusionModel model;
  Dataset train_set;
  Dataset test;
};

Trained train_plain(const Benchmark& b, std::uint64_t seed) {
  Trained t;
  t.train_set = generate_synthetic(b.train_data);
  t.test = generate_synthetic(b.test_data);
  t.model = train(make_model(b.arch, seed), t.train_set, b.train).model;
  return t;
}

double robust_accuracy(const FusionModel& m, const Dataset& d, ModalityMask mask) {
  PerturbationBudget b;  // epsilon 0.1, l2, 20 iterations
  b.mask = mask;
  return evaluate_under_attack(m, d, b).attacked.accuracy;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

double sample_loss(const FusionModel& m, const MultiModalSample& s) {
  return loss_value(m.loss_kind, forward(m, s.audio, s.video).logits, s.label);
}

int run(const std::string& cmd) { return std::system((cmd + " > /dev/null 2>&1").c_str()); }

}  // namespace

int main() {
  criterion(1, "d-prime from AUC", 1, [] {
    const double a = d_prime_from_auc(0.963), b = d_prime_from_auc(0.971);
    return Outcome{std::abs(a - 2.521) <= 0.02 && std::abs(b - 2.686) <= 0.02,
                   fmt("0.963 -> %.4f, 0.971 -> %.4f (tol 0.02)", a, b)};
  });

  criterion(2, "drop rate", 1, [] {
    const double r = drop_rate(0.865, 0.050);
    return Outcome{std::abs(r - 0.9422) <= 1e-4, fmt("(0.865, 0.050) -> %.6f (tol 1e-4)", r)};
  });

  criterion(3, "ball volumes", 10, [] {
    const double e1 = std::abs(ball_log_volume(2, NormKind::L2, 1.0) - std::log(std::numbers::pi));
    const double e2 = std::abs(ball_log_volume(3, NormKind::LInf, 1.0) - std::log(8.0));
    const double e3 = std::abs(ball_log_volume(1, NormKind::L1, 2.0) - std::log(4.0));
    const double closed = std::max({e1, e2, e3});
    Rng rng(3);
    double worst = 0.0;
    const int n = 1000000;
    for (std::size_t d = 1; d <= 3; ++d)
      for (NormKind p : {NormKind::L1, NormKind::L2, NormKind::LInf}) {
        Vector x(d);
        int hits = 0;
        for (int k = 0; k < n; ++k) {
          for (double& v : x) v = rng.uniform(-1.0, 1.0);
          hits += lp_norm(x, p) <= 1.0;
        }
        const double mc = std::pow(2.0, static_cast<double>(d)) * hits / n;
        worst = std::max(worst, std::abs(std::exp(ball_log_volume(d, p, 1.0)) / mc - 1.0));
      }
    return Outcome{closed <= 1e-9 && worst <= 0.02,
                   fmt("closed-form error %.2e (tol 1e-9), Monte-Carlo worst relative error %.4f (tol 0.02)", closed, worst)};
  });

  criterion(4, "projection invariants", 5, [] {
    Rng rng(4);
    int bad = 0;
    const int cases = 10000;
    for (int k = 0; k < cases; ++k) {
      const NormKind p = static_cast<NormKind>(rng.index(3));
      const Vector v = random_vector(rng, 1 + rng.index(12), rng.uniform(0.1, 3.0));
      const double eps = rng.uniform(0.0, 2.0);
      const Vector r = lp_project(v, p, eps);
      bool ok = lp_norm(r, p) <= eps + 1e-12;
      const Vector rr = lp_project(r, p, eps);
      for (std::size_t i = 0; i < r.size(); ++i) ok = ok && std::abs(rr[i] - r[i]) <= 1e-12;
      if (lp_norm(v, p) <= eps) ok = ok && r == v;
      bad += !ok;
    }
    return Outcome{bad == 0, fmt("%d of %d random cases violate feasibility, idempotence or identity", bad, cases)};
  });

  criterion(5, "gradient correctness", 10, [] {
    double worst = 0.0;
    std::size_t coords = 0;
    for (LossKind kind : {LossKind::SoftmaxCrossEntropy, LossKind::SigmoidBce}) {
      FusionModel m = small_model(5, Activation::Tanh);
      m.loss_kind = kind;
      Rng rng(55);
      MultiModalSample s = random_sample(rng, 3, 3, 3, 1);
      if (kind == LossKind::SigmoidBce) s.label = {1, 0, 1};
      const Vector analytic = flatten(grad_params(m, std::span<const MultiModalSample>(&s, 1)));
      const std::vector<double*> params = parameter_pointers(m);
      const double h = 1e-5;
      for (std::size_t i = 0; i < params.size(); ++i) {
        const double keep = *params[i];
        *params[i] = keep + h;
        const double up = sample_loss(m, s);
        *params[i] = keep - h;
        const double down = sample_loss(m, s);
        *params[i] = keep;
        worst = std::max(worst, rel_err(analytic[i], (up - down) / (2 * h)));
      }
      const auto [ga, gv] = grad_input(m, s);
      for (int mod = 0; mod < 2; ++mod)
        for (std::size_t i = 0; i < 3; ++i) {
          MultiModalSample p = s, q = s;
          (mod == 0 ? p.audio : p.video)[i] += h;
          (mod == 0 ? q.audio : q.video)[i] -= h;
          worst = std::max(worst, rel_err((mod == 0 ? ga : gv)[i], (sample_loss(m, p) - sample_loss(m, q)) / (2 * h)));
        }
      coords += params.size() + 6;
    }
    return Outcome{worst < 1e-4, fmt("worst relative error %.2e over %zu coordinates (tol 1e-4)", worst, coords)};
  });

  criterion(6, "unimodal break construction", 5, [] {
    Rng rng(6);
    int verified = 0, ivt = 0, ivt_ok = 0;
    for (int k = 0; k < 100; ++k) {
      CounterexampleSpec spec;
      spec.a = random_vector(rng, 1 + rng.index(4));
      spec.b = random_vector(rng, 1 + rng.index(4));
      spec.s = rng.uniform(0.1, 4.0);
      spec.t = rng.uniform(0.1, 4.0);
      spec.encoder = k % 2 ? EncoderShape::SmoothMonotone : EncoderShape::Identity;
      spec.attacked = k % 4 < 2 ? Modality::Audio : Modality::Video;
      const Counterexample ce = construct_counterexample(spec);
      spec.eps_A = unimodal_threshold(ce, spec);
      const TheoremReport r = find_unimodal_break(ce, spec);
      verified += verify_theorem1(r, spec);
      if (r.theorem_case == TheoremCase::IVTBreak) {
        ++ivt;
        ivt_ok += std::abs(r.fused_score_after - spec.t / 2) < 1e-6 && r.delta_norm < spec.eps_A;
      }
    }
    return Outcome{verified == 100 && ivt_ok == ivt && ivt > 0 && ivt < 100,
                   fmt("%d/100 verified; %d/%d IVT cases at t/2 within 1e-6 with |delta| < eps_A", verified, ivt_ok, ivt)};
  });

  criterion(7, "convexity exactness", 30, [] {
    // affine head, every class member on the correct side
    const FusionModel lin = linear_model(1, 1, 2, {1, 1, -1, -1}, {0, 0});
    Rng rng(7);
    Matrix pts(200, 2);
    for (std::size_t i = 0; i < pts.rows; ++i) {
      pts(i, 0) = rng.uniform(0.6, 3.0);
      pts(i, 1) = rng.uniform(-0.5, 3.0);
    }
    std::vector<std::size_t> rows(pts.rows);
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    const double k_lin = convexity_metric(lin, pts, rows, 0, 2000, 7);
    // class 1 is a ring around the class 0 blob
    SyntheticConfig sc;
    sc.num_classes = 2;
    sc.samples_per_class = 150;
    sc.shapes = {ClassShape::Blob, ClassShape::Ring};
    sc.cluster_spread = {0.2};
    sc.seed = 7;
    const Dataset ring = generate_synthetic(sc);
    Architecture a;
    a.audio_dim = sc.audio_dim;
    a.video_dim = sc.video_dim;
    a.num_classes = 2;
    TrainConfig tc;
    tc.epochs = 60;
    tc.seed = 7;
    const FusionModel m = train(make_model(a, 7), ring, tc).model;
    const Embeddings emb = extract_bottleneck(m, ring);
    const auto members = class_members(emb.labels, 1);
    const double k_ring = convexity_metric(m, emb.points, members, 1, 2000, 7);
    return Outcome{k_lin == 1.0 && k_ring < 1.0,
                   fmt("linear head kappa = %.17g; ring under trained head kappa = %.4f (train accuracy %.3f)", k_lin,
                       k_ring, accuracy(m, ring))};
  });

  criterion(8, "density invariants", 5, [] {
    const double reduced = 4.0 / (2.0 * std::log(10.0 / 6.0));
    const double full = 4.0 / (ball_log_volume(2, NormKind::L2, 10.0) - ball_log_volume(2, NormKind::L2, 6.0));
    Matrix line(10, 2);
    for (std::size_t i = 0; i < 10; ++i) line(i, 0) = static_cast<double>(i + 1);
    std::vector<std::size_t> rows(10);
    for (std::size_t i = 0; i < 10; ++i) rows[i] = i;
    const ClassRadii r = class_radii(line, rows, Vector{0, 0}, NormKind::L2, 0.6);
    const double rho = density_metric({10, r.n_tau, 2, NormKind::L2, r.full, r.tau});
    const bool line_ok = std::abs(reduced - 3.9152) < 1e-4 && std::abs(rho - reduced) < 1e-12 &&
                         std::abs(rho - full) < 1e-12;
    Rng rng(8);
    double worst = 0.0;
    const FusionModel head = linear_model(1, 2, 1, Vector(3, 0.0), Vector(1, 0.0));
    for (int t = 0; t < 30; ++t) {
      Matrix pts(50, 3);
      for (double& x : pts.data) x = rng.normal();
      const Matrix labels(50, 1, 1.0);
      GeometryConfig cfg;
      cfg.norm = static_cast<NormKind>(t % 3);
      cfg.n_convexity = 1;
      const double base = *class_geometry(head, pts, labels, 0, cfg).rho;
      Matrix scaled_pts = pts, perm = pts;
      const double c = rng.uniform(0.01, 100.0);
      for (double& x : scaled_pts.data) x *= c;
      for (std::size_t i = 0; i < 50; ++i)
        for (std::size_t j = 0; j < 3; ++j) perm(i, j) = pts((i * 13 + 7) % 50, j);
      worst = std::max(worst, std::abs(*class_geometry(head, scaled_pts, labels, 0, cfg).rho / base - 1.0));
      worst = std::max(worst, std::abs(*class_geometry(head, perm, labels, 0, cfg).rho / base - 1.0));
    }
    return Outcome{line_ok && worst <= 1e-9,
                   fmt("line example rho = %.6f (reduced %.6f, full %.6f); worst scale/permutation change %.2e (tol 1e-9)",
                       rho, reduced, full, worst)};
  });

  criterion(9, "unimodal attack breaks fused model", 300, [] {
    int seeds_with_break = 0;
    std::string per_seed;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const Trained t = train_plain(mixed_shape_suite(seed), seed);
      EmpiricalSearchOptions opt;  // AudioOnly, l2, eps_max 4, tol 1e-3
      const auto hits = empirical_unimodal_breaks(t.model, t.test, opt);
      seeds_with_break += !hits.empty();
      per_seed += fmt(" %zu", hits.size());
    }
    return Outcome{seeds_with_break >= 8,
                   fmt("%d/10 seeds have an audio-only flip below the joint threshold (need 8); hits per seed:%s",
                       seeds_with_break, per_seed.c_str())};
  });

  criterion(10, "directional robustness on two moons", 900, [] {
    int both_worst = 0, mix_wins = 0, at_wins = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const Benchmark b = two_moons_benchmark(seed);
      const Trained t = train_plain(b, seed);
      const FusionModel init = make_model(b.arch, seed);
      const FusionModel mix = train_mixup(init, t.train_set, b.train, b.mixup).model;
      const FusionModel at = adversarial_train(init, t.train_set, b.train, PerturbationBudget{}).model;
      const double pa = robust_accuracy(t.model, t.test, ModalityMask::AudioOnly);
      const double pv = robust_accuracy(t.model, t.test, ModalityMask::VideoOnly);
      const double pb = robust_accuracy(t.model, t.test, ModalityMask::Both);
      both_worst += pb <= std::min(pa, pv);
      mix_wins += robust_accuracy(mix, t.test, ModalityMask::Both) > pb;
      at_wins += robust_accuracy(at, t.test, ModalityMask::Both) > pb;
    }
    return Outcome{both_worst >= 9 && mix_wins >= 8 && at_wins >= 8,
                   fmt("(a) joint <= worse unimodal in %d/10 (need 9); (b) mix-up beats plain in %d/10 (need 8); "
                       "(c) adversarial training beats plain in %d/10 (need 8)",
                       both_worst, mix_wins, at_wins)};
  });

  criterion(11, "convexity vs drop-rate rank correlation", 600, [] {
    int positive = 0;
    std::string per_seed;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const Trained t = train_plain(mixed_shape_suite(seed), seed);
      const AttackReport rep = evaluate_under_attack(t.model, t.test, PerturbationBudget{});
      const auto geometry = all_class_geometry(t.model, extract_bottleneck(t.model, t.test), {NormKind::L2, 0.8, 2000, seed});
      Vector kappa, kept;
      for (const ClassGeometry& g : geometry) {
        kappa.push_back(g.kappa);
        // a class with zero clean accuracy keeps nothing
        kept.push_back(1.0 - rep.per_class_drop[g.class_id].value_or(1.0));
      }
      const double rs = spearman(kappa, kept);
      positive += rs > 0.0;
      per_seed += fmt(" %.2f", rs);
    }
    return Outcome{positive == 10, fmt("Spearman > 0 in %d/10 seeds of the 6-class mixed suite:%s", positive, per_seed.c_str())};
  });

  criterion(12, "CLI determinism", 600, [] {
    const std::string cli = MMR_CLI_PATH;
    const std::string conf = std::string(MMR_SOURCE_DIR) + "/configs/demo.conf";
    const fs::path root = fs::temp_directory_path() / "mmr_acceptance";
    fs::remove_all(root);
    const fs::path data = root / "data";
    if (run(cli + " gen --config " + conf + " --seed 11 --out " + data.string()) != 0)
      return Outcome{false, "gen failed"};
    const std::string io = " --data " + (data / "train.mmr").string() + " --test " + (data / "test.mmr").string();
    for (int pass = 1; pass <= 2; ++pass) {
      const fs::path out = root / ("run" + std::to_string(pass));
      const std::string common = " --config " + conf + " --seed 11";
      const std::string cmds[] = {
          "gen" + common + " --out " + (out / "gen").string(),
          "train" + common + io + " --out " + (out / "train").string(),
          "mixup-train" + common + io + " --out " + (out / "mixup").string(),
          "at-train" + common + io + " --out " + (out / "at").string(),
          "attack" + common + io + " --model " + (root / "run1/train/model.mmrm").string() + " --out " +
              (out / "attack").string(),
          "metrics" + common + io + " --model " + (root / "run1/train/model.mmrm").string() + " --out " +
              (out / "metrics").string(),
          "report" + common + " --out " + (out / "report").string(),
          "theorem1" + common + " --out " + (out / "theorem1").string(),
      };
      for (const std::string& c : cmds)
        if (run(cli + " " + c) != 0) return Outcome{false, "command failed: mmr " + c};
    }
    std::size_t files = 0, differ = 0;
    for (const auto& e : fs::recursive_directory_iterator(root / "run1")) {
      if (!e.is_regular_file()) continue;
      const fs::path other = root / "run2" / fs::relative(e.path(), root / "run1");
      ++files;
      if (!fs::exists(other) || byteio::read_file(e.path().string()) != byteio::read_file(other.string())) ++differ;
    }
    fs::remove_all(root);
    return Outcome{files >= 15 && differ == 0,
                   fmt("8 subcommands run twice: %zu output files, %zu differ", files, differ)};
  });

  std::printf("%d criteria failed\n", failures);
  return failures;
}
