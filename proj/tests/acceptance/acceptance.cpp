// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit if any
// fails. `--expect-fail NAME` (repeatable) tolerates a known failure; its
// FAIL line is still printed.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "calm/cli/commands.hpp"
#include "calm/cli/format.hpp"
#include "calm/cli/run_config.hpp"
#include "calm/error.hpp"
#include "calm/losses.hpp"
#include "calm/metrics.hpp"
#include "calm/synth.hpp"
#include "calm/trainer.hpp"
#include "calm/vmf.hpp"
#include "fixtures.hpp"

using namespace calm;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string name;
  double time_limit_s;  // 0: none
  std::function<Outcome()> run;
};

std::string num(double v) { return cli::format_number(v); }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

constexpr int kSeeds = 5;

cli::RunConfig fixture_config(const char* name, std::uint64_t seed) {
  cli::RunConfig cfg = cli::load_run_config(fs::path(CALM_SOURCE_DIR) / "configs" / name);
  cfg.set_seed(seed);
  return cfg;
}

struct RunScore {
  double recall1 = 0.0;
  double opis = 0.0;
};

RunScore score(const cli::RunConfig& cfg) {
  const EmbeddingSet data = cli::load_training_data(cfg);
  const cli::TrainingOutcome out = cli::run_training(cfg, data);
  return {out.report.recall_at(1), out.report.opis.opis};
}

cli::RunConfig without_cam(cli::RunConfig cfg) {
  cfg.train.cam.reset();
  cfg.train.adacam.enabled = false;
  return cfg;
}

// Baseline (no CAM) scores per seed on the shipped fixture, shared by the
// CAM and sweep criteria.
const std::vector<RunScore>& baselines() {
  static const std::vector<RunScore> runs = [] {
    std::vector<RunScore> out;
    for (int s = 0; s < kSeeds; ++s) out.push_back(score(without_cam(fixture_config("demo.json", s))));
    return out;
  }();
  return runs;
}

const std::vector<RunScore>& cam_runs() {
  static const std::vector<RunScore> runs = [] {
    std::vector<RunScore> out;
    for (int s = 0; s < kSeeds; ++s) out.push_back(score(fixture_config("demo.json", s)));
    return out;
  }();
  return runs;
}

Outcome oracle_equivalence() {
  const double worst = fixture::worst_oracle_error(20240601, 100);
  return {worst <= 1e-9, "worst relative error " + num(worst)};
}

Outcome edge_identities() {
  bool ok = true;
  for (double p : {0.0, 0.25, 0.5, 1.0}) ok = ok && utility(p, p, 1.0) == p;

  SynthConfig sc;
  sc.classes = 6;
  sc.samples_per_class = 10;
  sc.dim = 5;
  const EmbeddingSet set = make_dataset(sc).set;
  EvalConfig cfg;
  cfg.epsilons = {100.0};
  cfg.recall_ks = {1};
  const double full = evaluate(set, cfg).opis.epsilon_opis.at(0).second;
  ok = ok && full == 0.0;
  return {ok, "eps-OPIS(100%) = " + num(full)};
}

Outcome gradients() {
  const CamConfig cam{0.6, 0.2, 1.0, 0.7};
  const ContrastiveConfig con{0.1, 0.3};
  const double margin = 0.2;
  const double e_cam = fixture::worst_gradient_error(
      [&](const ScoredPairSet& s) { return cam_loss(s, cam); },
      [&](const ScoredPairSet& s) { return fixture::nearest_kink(s, {cam.m_plus, cam.m_minus}); }, 11);
  const double e_con = fixture::worst_gradient_error(
      [&](const ScoredPairSet& s) { return contrastive_loss(s, con); },
      [&](const ScoredPairSet& s) { return fixture::nearest_kink(s, {1.0 - con.pos_margin, con.neg_margin}); }, 12);
  const double e_tri = fixture::worst_gradient_error(
      [&](const ScoredPairSet& s) { return triplet_loss(s, margin); },
      [&](const ScoredPairSet& s) { return fixture::triplet_kink(s, margin); }, 13);
  const double worst = std::max({e_cam, e_con, e_tri});
  return {worst <= 1e-5, "worst relative error cam " + num(e_cam) + " contrastive " + num(e_con) + " triplet " +
                             num(e_tri)};
}

ScoredPair at_similarity(std::uint32_t a, std::uint32_t b, bool positive, double s) {
  return {{a, b, 0, positive}, s, cos_to_l2(s)};
}

Outcome cam_boundary() {
  const CamConfig cfg{0.7, 0.3, 1.0, 1.0};
  ScoredPairSet on_margin;
  on_margin.entries = {at_similarity(0, 1, true, 0.7)};
  const PairLoss a = cam_loss(on_margin, cfg);
  ScoredPairSet none;
  none.entries = {at_similarity(0, 1, true, 0.9), at_similarity(0, 2, false, 0.1)};
  const PairLoss b = cam_loss(none, cfg);
  const PairLoss c = cam_loss(ScoredPairSet{}, cfg);
  const bool ok = a.selected_positive == 1 && a.value == 0.0 && b.selected_positive == 0 &&
                  b.selected_negative == 0 && b.value == 0.0 && c.value == 0.0;
  return {ok, "boundary selected " + std::to_string(a.selected_positive) + " value " + num(a.value) +
                  ", empty value " + num(b.value)};
}

Outcome vmf_round_trip() {
  double worst = 0.0;
  std::string where;
  for (std::size_t dim : {4u, 8u, 16u}) {
    for (double kappa : {5.0, 20.0, 100.0}) {
      std::vector<double> mu(dim, 0.0);
      mu[0] = 1.0;
      ClassMeanTable table(dim);
      const Matrix s = sample_vmf(mu, kappa, 10000, Rng::derive(77, dim * 1000 + static_cast<std::size_t>(kappa)));
      for (std::size_t i = 0; i < s.rows(); ++i) table.update(s.row(i), 0);
      const double err = std::abs(estimate_kappa(table.resultant_length(0), dim) - kappa) / kappa;
      if (err > worst) {
        worst = err;
        where = " at kappa " + num(kappa) + ", M " + std::to_string(dim);
      }
    }
  }
  return {worst <= 0.05, "worst relative error " + num(worst) + where};
}

Outcome adaptive_margin_identities() {
  Rng rng(31);
  double worst_mean = 0.0;
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> w(2 + rng.below(40));
    for (double& x : w) x = vmf_weight(2.0 * rng.uniform() - 1.0);
    const auto m = adaptive_margins(w, 0.7);
    double mean = 0.0;
    for (double x : m) mean += x;
    mean /= static_cast<double>(m.size());
    worst_mean = std::max(worst_mean, std::abs(mean - 0.7));
  }

  ClassMeanTable same(3);
  for (ClassId c = 0; c < 4; ++c) {
    std::vector<double> a(3, 0.0), b(3, 0.0);
    a[c % 3] = 1.0;
    b[(c + 1) % 3] = 1.0;
    same.update(a, c);
    same.update(b, c);
  }
  bool homogeneous_exact = true;
  for (const auto& [cls, v] : epoch_refresh(same, 0.7).classes) homogeneous_exact = homogeneous_exact && v.m_plus == 0.7;

  ClassMeanTable two(8);
  const std::vector<double> kappas{10.0, 80.0};
  for (ClassId c = 0; c < 2; ++c) {
    std::vector<double> mu(8, 0.0);
    mu[c] = 1.0;
    const Matrix s = sample_vmf(mu, kappas[c], 200, 40 + c);
    for (std::size_t i = 0; i < s.rows(); ++i) two.update(s.row(i), c);
  }
  const VmfState st = epoch_refresh(two, 0.7);
  const bool ordered = st.classes.at(1).m_plus < st.classes.at(0).m_plus;
  const bool ok = worst_mean <= 1e-9 && homogeneous_exact && ordered;
  return {ok, "mean error " + num(worst_mean) + ", homogeneous exact " + (homogeneous_exact ? "yes" : "no") +
                  ", margins " + num(st.classes.at(0).m_plus) + " (kappa 10) vs " + num(st.classes.at(1).m_plus) +
                  " (kappa 80)"};
}

Outcome cam_claim() {
  std::vector<double> reduction, recall_delta;
  for (int s = 0; s < kSeeds; ++s) {
    const RunScore& base = baselines()[s];
    const RunScore& cam = cam_runs()[s];
    reduction.push_back((base.opis - cam.opis) / base.opis);
    recall_delta.push_back(cam.recall1 - base.recall1);
  }
  const double r = median(reduction), d = median(recall_delta);
  return {r >= 0.30 && d >= -0.010,
          "median OPIS reduction " + num(100.0 * r) + "%, median recall@1 change " + num(100.0 * d) + " pp"};
}

Outcome sweep_robustness() {
  const std::vector<double> m_plus{0.6, 0.7, 0.8}, m_minus{0.2, 0.3, 0.4};
  int below = 0, total = 0;
  double worst_ratio = 0.0;
  for (int s = 0; s < kSeeds; ++s) {
    for (double mp : m_plus) {
      for (double mm : m_minus) {
        cli::RunConfig cfg = fixture_config("demo.json", s);
        cfg.train.cam->m_plus = mp;
        cfg.train.cam->m_minus = mm;
        const double opis = score(cfg).opis;
        const double ratio = opis / baselines()[s].opis;
        worst_ratio = std::max(worst_ratio, ratio);
        below += ratio < 1.0 ? 1 : 0;
        ++total;
      }
    }
  }
  return {below == total, std::to_string(below) + "/" + std::to_string(total) +
                              " cells below baseline over " + std::to_string(kSeeds) +
                              " seeds, worst OPIS ratio " + num(worst_ratio)};
}

Outcome adacam_direction() {
  int recall_ok = 0;
  std::vector<double> degradation;
  for (int s = 0; s < kSeeds; ++s) {
    const cli::RunConfig ada_cfg = fixture_config("demo_adacam.json", s);
    cli::RunConfig cam_cfg = ada_cfg;
    cam_cfg.train.adacam.enabled = false;
    const RunScore cam = score(cam_cfg);
    const RunScore ada = score(ada_cfg);
    recall_ok += ada.recall1 >= cam.recall1 ? 1 : 0;
    degradation.push_back((ada.opis - cam.opis) / cam.opis);
  }
  const double d = median(degradation);
  return {recall_ok >= 3 && d <= 0.50, "recall@1 >= CAM on " + std::to_string(recall_ok) + "/" +
                                           std::to_string(kSeeds) + " seeds, median OPIS change " +
                                           num(100.0 * d) + "%"};
}

int run_binary(const std::string& args) {
  const std::string cmd = std::string(CALM_BINARY) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / ("calm_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string config = (fs::path(CALM_SOURCE_DIR) / "configs" / "demo.json").string();
  bool ok = true;
  for (const char* run : {"a", "b"}) {
    ok = ok && run_binary("train '" + config + "' --seed 2 --out-dir '" + (dir / run).string() + "'") == 0;
    ok = ok && run_binary("eval '" + (dir / "a" / "checkpoint.calm").string() + "' --seed 9 --out '" +
                          (dir / (std::string(run) + ".json")).string() + "'") == 0;
  }
  int differing = 0;
  if (ok) {
    for (const char* f : {"report.json", "history.csv", "curves.csv", "checkpoint.calm"}) {
      differing += cli::read_text_file(dir / "a" / f) != cli::read_text_file(dir / "b" / f) ? 1 : 0;
    }
    differing += cli::read_text_file(dir / "a.json") != cli::read_text_file(dir / "b.json") ? 1 : 0;
    differing += cli::read_text_file(dir / "a.curves.csv") != cli::read_text_file(dir / "b.curves.csv") ? 1 : 0;
  }
  fs::remove_all(dir);
  return {ok && differing == 0, ok ? std::to_string(differing) + " of 6 outputs differ" : "a command failed"};
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> expected_failures;
  for (int i = 1; i + 1 < argc; i += 2) {
    if (std::string(argv[i]) != "--expect-fail") {
      std::fprintf(stderr, "usage: %s [--expect-fail NAME]...\n", argv[0]);
      return 2;
    }
    expected_failures.emplace_back(argv[i + 1]);
  }

  const std::vector<Criterion> criteria{
      {"oracle-equivalence", 10.0, oracle_equivalence},
      {"utility-epsilon-identities", 0.0, edge_identities},
      {"gradient-correctness", 30.0, gradients},
      {"cam-boundary", 0.0, cam_boundary},
      {"vmf-round-trip", 20.0, vmf_round_trip},
      {"adaptive-margin-identities", 0.0, adaptive_margin_identities},
      {"cam-claim", 300.0, cam_claim},
      {"margin-sweep", 900.0, sweep_robustness},
      {"adacam-direction", 300.0, adacam_direction},
      {"determinism", 0.0, determinism},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = c.time_limit_s == 0.0 || secs <= c.time_limit_s;
    if (!in_time) o.detail += ", over the " + num(c.time_limit_s) + " s budget";
    const bool pass = o.pass && in_time;
    const bool tolerated =
        std::find(expected_failures.begin(), expected_failures.end(), c.name) != expected_failures.end();
    failed += pass || tolerated ? 0 : 1;
    std::printf("%s %s: %s (%.1f s)%s\n", pass ? "PASS" : "FAIL", c.name.c_str(), o.detail.c_str(), secs,
                tolerated ? (pass ? " [expected to fail]" : " [known failure]") : "");
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
