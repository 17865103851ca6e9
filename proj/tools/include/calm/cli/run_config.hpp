#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>

#include <nlohmann/json.hpp>

#include "calm/metrics.hpp"
#include "calm/synth.hpp"
#include "calm/trainer.hpp"

namespace calm::cli {

/// One JSON document per run. The top-level `seed` drives every random
/// stream of the run.
///
///   {
///     "seed": 0,
///     "synth": { classes, kappas, kappa_lo, kappa_hi, samples_per_class, dim,
///                placement, clusters, cluster_kappa, antipodal_kappa },
///     "data": "path/to/embeddings.calm",           (instead of synth)
///     "train": { mode, epochs, lr, classes_per_batch, samples_per_class,
///                eval_every, encoder_dim,
///                base: { kind, pos_margin, neg_margin, triplet_margin },
///                cam: { m_plus, m_minus, lambda_plus, lambda_minus } | null,
///                adacam: { finetune_epochs, lr, lr_scale, percentile_lo,
///                          percentile_hi } | null },
///     "eval": { far_lo, far_hi, grid, c, epsilons, ratio, recall_ks }
///   }
///
/// Unknown keys are rejected; omitted keys take the library defaults.
struct RunConfig {
  std::uint64_t seed = 0;
  std::optional<SynthConfig> synth;
  std::optional<std::filesystem::path> data;  // resolved against the config's directory
  TrainConfig train;
  EvalConfig eval;

  /// Sets the seed everywhere it is consumed.
  void set_seed(std::uint64_t value);
};

/// Throws ConfigError with a "line L, column C" prefix on JSON syntax errors
/// and a key path on schema errors.
RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

nlohmann::json to_json(const RunConfig& cfg);

/// Throws ConfigError on an invalid FAR band, grid, c, epsilon or k.
void validate_eval(const EvalConfig& e);

}  // namespace calm::cli
