#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "calm/cli/report.hpp"
#include "calm/cli/run_config.hpp"
#include "calm/metrics.hpp"
#include "calm/trainer.hpp"

namespace calm::cli {

struct CommandContext {
  std::ostream* out = nullptr;  // one-line JSON summaries
  std::size_t threads = 1;
  std::string command_line;     // recorded in metadata files only
};

struct GenOptions {
  std::filesystem::path config;
  std::filesystem::path output;
  std::optional<std::uint64_t> seed;
};

/// Writes the dataset, `<stem>.kappa.json` (ground-truth concentrations and
/// centroids) and `<stem>.meta.json`.
void cmd_gen(const GenOptions& opt, const CommandContext& ctx);

struct EvalOptions {
  std::filesystem::path input;
  EvalConfig eval;
  std::filesystem::path out = "report.json";
  std::optional<std::filesystem::path> curves;  // default: <out stem>.curves.csv
};

void cmd_eval(const EvalOptions& opt, const CommandContext& ctx);

struct TrainOptions {
  std::filesystem::path config;
  std::filesystem::path out_dir = "run";
  std::optional<std::uint64_t> seed;
  bool disable_cam = false;
  std::optional<std::filesystem::path> resume;  // checkpoint written by an earlier run
  bool verbose = false;                         // also dump per-epoch vMF states
};

/// Writes checkpoint.calm (+ checkpoint.json), history.csv, report.json,
/// curves.csv and metadata.json into out_dir and prints a one-line summary.
void cmd_train(const TrainOptions& opt, const CommandContext& ctx);

struct SweepOptions {
  std::filesystem::path config;
  std::vector<double> m_plus;
  std::vector<double> m_minus;
  std::filesystem::path out = "sweep.csv";
  std::optional<std::uint64_t> seed;
};

/// Baseline (CAM disabled) row first, then m_plus-major grid order.
void cmd_sweep(const SweepOptions& opt, const CommandContext& ctx);

/// Everything cmd_train computes, without touching the filesystem.
struct TrainingOutcome {
  TrainResult result;  // history spans the CAM phase and any AdaCAM phase
  EvalReport report;
  std::size_t adacam_first_epoch = 0;
};

EmbeddingSet load_training_data(const RunConfig& cfg);
TrainingOutcome run_training(const RunConfig& cfg, const EmbeddingSet& data,
                             const std::optional<TrainState>& resume = std::nullopt);

/// Runs `fn`; on failure writes one JSON line to `err` and returns the exit code.
int guarded(const std::function<void()>& fn, std::ostream& err);

}  // namespace calm::cli
