#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "calm/core.hpp"
#include "calm/losses.hpp"
#include "calm/metrics.hpp"
#include "calm/vmf.hpp"

namespace calm {

enum class TrainMode { FreeEmbedding, LinearEncoder };
enum class BaseLossKind { None, Contrastive, Triplet };

TrainMode parse_train_mode(std::string_view name);
std::string_view to_string(TrainMode mode);
BaseLossKind parse_base_loss(std::string_view name);
std::string_view to_string(BaseLossKind kind);

struct BaseLossConfig {
  BaseLossKind kind = BaseLossKind::Contrastive;
  ContrastiveConfig contrastive;
  double triplet_margin = 0.2;
};

struct AdaCamConfig {
  bool enabled = false;
  std::size_t finetune_epochs = 30;
  double lr = 1e-6;
  /// Multiplies lr. Free embeddings at desk scale barely move at 1e-6.
  double lr_scale = 1.0;
  double percentile_lo = 5.0;
  double percentile_hi = 95.0;
};

struct TrainConfig {
  TrainMode mode = TrainMode::FreeEmbedding;
  BaseLossConfig base;
  std::optional<CamConfig> cam;
  AdaCamConfig adacam;
  std::size_t epochs = 10;
  double lr = 1.0;
  std::size_t classes_per_batch = 8;
  std::size_t samples_per_class = 4;
  std::uint64_t seed = 0;
  /// Evaluate every k epochs (0: never during training). The last epoch of a
  /// run is always evaluated when eval_every > 0.
  std::size_t eval_every = 1;
  EvalConfig eval;
  /// Output dimension of the linear encoder (0: same as the input).
  std::size_t encoder_dim = 0;

  /// Throws InvalidConfig.
  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  double recall1 = 0.0;  // NaN when not evaluated
  double opis = 0.0;     // NaN when not evaluated
  std::size_t selected_positive = 0;
  std::size_t selected_negative = 0;
  bool adacam = false;
  double margin_min = 0.0;
  double margin_mean = 0.0;
  double margin_max = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> records;
  double lr_scale = 1.0;
};

/// Model parameters plus the embeddings they currently produce.
struct TrainState {
  EmbeddingSet inputs;      // encoder mode: features; free mode: initial embeddings
  Matrix encoder;           // encoder mode: M x M_in; empty in free mode
  EmbeddingSet embeddings;  // current unit-norm outputs
  std::size_t epoch = 0;    // completed epochs

  static TrainState initial(const EmbeddingSet& data, const TrainConfig& cfg);
};

struct TrainResult {
  TrainState state;
  TrainHistory history;
  /// AdaCAM only: the vMF state whose margins were used in each epoch.
  std::vector<VmfState> vmf_states;
};

/// Per epoch, every class's samples are shuffled and cut into groups of
/// `samples_per_class` (a short final group is padded by drawing with
/// replacement from the same class). Groups are dealt round by round into
/// batches of `classes_per_batch` distinct classes; a single-class remainder
/// is merged into the batch before it, so no batch lacks negatives.
std::vector<std::vector<std::size_t>> build_batches(std::span<const ClassId> labels, std::size_t classes_per_batch,
                                                    std::size_t samples_per_class, std::uint64_t seed,
                                                    std::uint64_t epoch);

/// Embeddings normalize(W x) for every input row.
EmbeddingSet apply_encoder(const Matrix& encoder, const EmbeddingSet& inputs);

/// Base loss plus (optional) CAM on one scored batch, as per-pair derivatives.
PairLoss batch_objective(const ScoredPairSet& scored, const TrainConfig& cfg,
                         const std::map<ClassId, double>* class_margins = nullptr);

/// Gradient descent from `data` (or from `start`, resuming its epoch count).
/// Throws NonFiniteLoss when a batch value or gradient is not finite.
TrainResult train(const EmbeddingSet& data, const TrainConfig& cfg);
TrainResult train(const TrainState& start, const TrainConfig& cfg);

/// Continues from a CAM-trained state with per-class positive margins
/// refreshed from vMF concentrations every epoch; the negative margin stays
/// fixed. Runs cfg.adacam.finetune_epochs at lr = adacam.lr * adacam.lr_scale.
TrainResult finetune_adacam(const TrainState& cam_state, const TrainConfig& cfg);

}  // namespace calm
