#include "calm/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <unordered_map>

#include "calm/error.hpp"
#include "calm/random.hpp"

namespace calm {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::uint64_t kBatchStream = 0x62617463;

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[rng.below(i)]);
  }
}

bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [](double x) { return std::isfinite(x); });
}

struct MarginSummary {
  double min = 0.0;
  double mean = 0.0;
  double max = 0.0;
};

MarginSummary summarize(const std::map<ClassId, double>& margins) {
  MarginSummary s{std::numeric_limits<double>::infinity(), 0.0, -std::numeric_limits<double>::infinity()};
  for (const auto& [cls, m] : margins) {
    s.min = std::min(s.min, m);
    s.max = std::max(s.max, m);
    s.mean += m;
  }
  if (!margins.empty()) s.mean /= static_cast<double>(margins.size());
  return s;
}

// Forward pass for the rows of one batch.
struct BatchForward {
  EmbeddingSet batch;
  std::vector<double> pre_norm;  // encoder mode: ||W x|| per batch row
};

BatchForward forward(const TrainState& state, std::span<const std::size_t> rows) {
  if (state.encoder.rows() == 0) return {state.embeddings.subset(rows), {}};
  const std::size_t out_dim = state.encoder.rows();
  Matrix m(rows.size(), out_dim);
  std::vector<ClassId> labels;
  std::vector<double> pre_norm;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto x = state.inputs.row(rows[k]);
    auto y = m.row(k);
    for (std::size_t r = 0; r < out_dim; ++r) y[r] = dot(state.encoder.row(r), x);
    const double n = norm(y);
    if (!(n > 1e-12) || !std::isfinite(n)) {
      throw Error(Errc::NonFiniteLoss, "encoder maps row " + std::to_string(rows[k]) + " to norm " + std::to_string(n));
    }
    for (double& v : y) v /= n;
    pre_norm.push_back(n);
    labels.push_back(state.inputs.label(rows[k]));
  }
  return {EmbeddingSet(std::move(m), std::move(labels)), std::move(pre_norm)};
}

struct RunOptions {
  std::size_t epochs = 0;
  double lr = 0.0;
  bool adacam = false;
};

TrainResult run(TrainState state, const TrainConfig& cfg, const RunOptions& opt) {
  TrainResult result;
  result.history.lr_scale = opt.adacam ? cfg.adacam.lr_scale : 1.0;
  if (opt.epochs == 0) {
    result.state = std::move(state);
    return result;
  }
  if (state.inputs.classes().size() < 2) throw Error(Errc::SingleClass, "training needs at least two classes");

  const std::size_t dim = state.embeddings.dim();
  const bool encoder_mode = state.encoder.rows() != 0;

  std::map<ClassId, double> margins;
  VmfState vmf;
  ClassMeanTable table(dim);
  if (opt.adacam) {
    table.update(state.embeddings);
    vmf = epoch_refresh(table, cfg.cam->m_plus, nullptr, cfg.adacam.percentile_lo, cfg.adacam.percentile_hi);
    margins = vmf.margins();
  }

  for (std::size_t e = 1; e <= opt.epochs; ++e) {
    const std::size_t epoch = state.epoch + 1;
    const auto batches = build_batches(state.inputs.labels(), cfg.classes_per_batch, cfg.samples_per_class,
                                       cfg.seed, epoch);
    EpochRecord record;
    record.epoch = epoch;
    record.adacam = opt.adacam;
    double loss_sum = 0.0;

    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto& rows = batches[b];
      BatchForward fwd = forward(state, rows);
      const ScoredPairSet scored = score_pairs(fwd.batch, exhaustive_pairs(fwd.batch));
      const PairLoss loss = batch_objective(scored, cfg, opt.adacam ? &margins : nullptr);
      const Matrix grad = grad_wrt_embeddings(fwd.batch, scored, loss.dsim);
      if (!std::isfinite(loss.value) || !all_finite(grad.data())) {
        throw Error(Errc::NonFiniteLoss, "epoch " + std::to_string(epoch) + " batch " + std::to_string(b) +
                                             " value " + std::to_string(loss.value));
      }
      loss_sum += loss.value;
      record.selected_positive += loss.selected_positive;
      record.selected_negative += loss.selected_negative;

      // Collapse duplicate rows (padding) in first-occurrence order.
      std::vector<std::size_t> unique;
      std::unordered_map<std::size_t, std::size_t> slot;
      Matrix row_grad(rows.size(), dim);
      for (std::size_t k = 0; k < rows.size(); ++k) {
        auto [it, inserted] = slot.try_emplace(rows[k], unique.size());
        if (inserted) unique.push_back(rows[k]);
        auto dst = row_grad.row(it->second);
        const auto src = grad.row(k);
        for (std::size_t j = 0; j < dim; ++j) dst[j] += src[j];
      }

      if (opt.adacam) {
        std::vector<bool> seen(unique.size(), false);
        for (std::size_t k = 0; k < rows.size(); ++k) {
          const std::size_t u = slot.at(rows[k]);
          if (seen[u]) continue;
          seen[u] = true;
          table.update(fwd.batch.row(k), fwd.batch.label(k));
        }
      }

      if (!encoder_mode) {
        Matrix updated = state.embeddings.vectors();
        for (std::size_t u = 0; u < unique.size(); ++u) {
          auto row = updated.row(unique[u]);
          const auto g = row_grad.row(u);
          for (std::size_t j = 0; j < dim; ++j) row[j] -= opt.lr * g[j];
          normalize_in_place(row);
        }
        state.embeddings = EmbeddingSet(std::move(updated), state.embeddings.labels());
      } else {
        // dL/dW = sum_k (g_k / ||W x_k||) x_k^T with g_k already tangent.
        Matrix dw(state.encoder.rows(), state.encoder.cols());
        for (std::size_t k = 0; k < rows.size(); ++k) {
          const auto g = grad.row(k);
          const auto x = state.inputs.row(rows[k]);
          for (std::size_t r = 0; r < dw.rows(); ++r) {
            const double coef = g[r] / fwd.pre_norm[k];
            if (coef == 0.0) continue;
            auto dst = dw.row(r);
            for (std::size_t c = 0; c < dw.cols(); ++c) dst[c] += coef * x[c];
          }
        }
        auto w = state.encoder.data();
        const auto d = dw.data();
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= opt.lr * d[i];
        if (!all_finite(w)) {
          throw Error(Errc::NonFiniteLoss, "encoder weights overflowed at epoch " + std::to_string(epoch) +
                                               " batch " + std::to_string(b));
        }
      }
    }

    if (encoder_mode) state.embeddings = apply_encoder(state.encoder, state.inputs);
    state.epoch = epoch;
    record.loss = loss_sum / static_cast<double>(batches.size());

    const std::map<ClassId, double>* used = opt.adacam ? &margins : nullptr;
    if (used != nullptr) {
      const MarginSummary s = summarize(*used);
      record.margin_min = s.min;
      record.margin_mean = s.mean;
      record.margin_max = s.max;
      result.vmf_states.push_back(vmf);
    } else if (cfg.cam) {
      record.margin_min = record.margin_mean = record.margin_max = cfg.cam->m_plus;
    }

    if (cfg.eval_every > 0 && (e % cfg.eval_every == 0 || e == opt.epochs)) {
      try {
        const EvalReport report = evaluate(state.embeddings, cfg.eval);
        record.recall1 = report.recall.empty() ? kNaN : report.recall_at(1);
        record.opis = report.opis.opis;
      } catch (const Error&) {
        record.recall1 = kNaN;
        record.opis = kNaN;
      }
    } else {
      record.recall1 = kNaN;
      record.opis = kNaN;
    }
    result.history.records.push_back(record);

    if (opt.adacam) {
      vmf = epoch_refresh(table, cfg.cam->m_plus, &vmf, cfg.adacam.percentile_lo, cfg.adacam.percentile_hi);
      margins = vmf.margins();
    }
  }
  result.state = std::move(state);
  return result;
}

}  // namespace

TrainMode parse_train_mode(std::string_view name) {
  if (name == "free_embedding") return TrainMode::FreeEmbedding;
  if (name == "linear_encoder") return TrainMode::LinearEncoder;
  throw Error(Errc::InvalidConfig, "unknown training mode '" + std::string(name) + "'");
}

std::string_view to_string(TrainMode mode) {
  return mode == TrainMode::FreeEmbedding ? "free_embedding" : "linear_encoder";
}

BaseLossKind parse_base_loss(std::string_view name) {
  if (name == "none") return BaseLossKind::None;
  if (name == "contrastive") return BaseLossKind::Contrastive;
  if (name == "triplet") return BaseLossKind::Triplet;
  throw Error(Errc::InvalidConfig, "unknown base loss '" + std::string(name) + "'");
}

std::string_view to_string(BaseLossKind kind) {
  switch (kind) {
    case BaseLossKind::None: return "none";
    case BaseLossKind::Contrastive: return "contrastive";
    case BaseLossKind::Triplet: return "triplet";
  }
  return "none";
}

void TrainConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw Error(Errc::InvalidConfig, "lr must be finite and >= 0");
  if (classes_per_batch < 2) throw Error(Errc::InvalidConfig, "classes_per_batch must be >= 2");
  if (samples_per_class < 2) throw Error(Errc::InvalidConfig, "samples_per_class must be >= 2");
  if (cam) cam->validate();
  if (adacam.enabled) {
    if (!cam) throw Error(Errc::InvalidConfig, "AdaCAM requires a CAM configuration");
    if (!(adacam.lr >= 0.0) || !(adacam.lr_scale > 0.0)) {
      throw Error(Errc::InvalidConfig, "AdaCAM lr must be >= 0 and lr_scale > 0");
    }
    if (!(adacam.percentile_lo >= 0.0 && adacam.percentile_lo < adacam.percentile_hi &&
          adacam.percentile_hi <= 100.0)) {
      throw Error(Errc::InvalidConfig, "AdaCAM percentiles must satisfy 0 <= lo < hi <= 100");
    }
  }
  if (base.kind == BaseLossKind::None && !cam) {
    throw Error(Errc::InvalidConfig, "no base loss and no CAM: nothing to optimize");
  }
}

TrainState TrainState::initial(const EmbeddingSet& data, const TrainConfig& cfg) {
  TrainState state;
  state.inputs = data;
  if (cfg.mode == TrainMode::FreeEmbedding) {
    state.embeddings = data;
    return state;
  }
  const std::size_t in_dim = data.dim();
  const std::size_t out_dim = cfg.encoder_dim == 0 ? in_dim : cfg.encoder_dim;
  if (out_dim < 2) throw Error(Errc::InvalidConfig, "encoder output dimension must be >= 2");
  state.encoder = Matrix(out_dim, in_dim);
  if (out_dim == in_dim) {
    for (std::size_t i = 0; i < in_dim; ++i) state.encoder(i, i) = 1.0;
  } else {
    Rng rng(Rng::derive(cfg.seed, 0x656e63));
    const double scale = 1.0 / std::sqrt(static_cast<double>(in_dim));
    for (double& w : state.encoder.data()) w = scale * rng.normal();
  }
  state.embeddings = apply_encoder(state.encoder, data);
  return state;
}

std::vector<std::vector<std::size_t>> build_batches(std::span<const ClassId> labels, std::size_t classes_per_batch,
                                                    std::size_t samples_per_class, std::uint64_t seed,
                                                    std::uint64_t epoch) {
  if (classes_per_batch < 1 || samples_per_class < 1) {
    throw Error(Errc::InvalidConfig, "batch shape must be positive");
  }
  std::map<ClassId, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < labels.size(); ++i) members[labels[i]].push_back(i);

  const std::uint64_t epoch_seed = Rng::derive(Rng::derive(seed, kBatchStream), epoch);
  std::map<ClassId, std::vector<std::vector<std::size_t>>> groups;
  std::size_t rounds = 0;
  for (auto& [cls, idx] : members) {
    Rng rng(Rng::derive(epoch_seed, cls));
    shuffle(idx, rng);
    auto& g = groups[cls];
    for (std::size_t start = 0; start < idx.size(); start += samples_per_class) {
      std::vector<std::size_t> group(idx.begin() + static_cast<std::ptrdiff_t>(start),
                                     idx.begin() + static_cast<std::ptrdiff_t>(std::min(idx.size(), start + samples_per_class)));
      while (group.size() < samples_per_class) group.push_back(idx[rng.below(idx.size())]);
      g.push_back(std::move(group));
    }
    rounds = std::max(rounds, g.size());
  }

  Rng order_rng(Rng::derive(epoch_seed, 0xffffffffULL + 1));
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t r = 0; r < rounds; ++r) {
    std::vector<ClassId> present;
    for (const auto& [cls, g] : groups) {
      if (r < g.size()) present.push_back(cls);
    }
    shuffle(present, order_rng);
    for (std::size_t start = 0; start < present.size(); start += classes_per_batch) {
      const std::size_t end = std::min(present.size(), start + classes_per_batch);
      std::vector<std::size_t> batch;
      for (std::size_t c = start; c < end; ++c) {
        const auto& group = groups[present[c]][r];
        batch.insert(batch.end(), group.begin(), group.end());
      }
      if (end - start == 1 && !batches.empty()) {
        batches.back().insert(batches.back().end(), batch.begin(), batch.end());
      } else {
        batches.push_back(std::move(batch));
      }
    }
  }
  return batches;
}

EmbeddingSet apply_encoder(const Matrix& encoder, const EmbeddingSet& inputs) {
  if (encoder.cols() != inputs.dim()) throw Error(Errc::DimensionMismatch, "encoder input dimension");
  Matrix out(inputs.size(), encoder.rows());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    auto y = out.row(i);
    for (std::size_t r = 0; r < encoder.rows(); ++r) y[r] = dot(encoder.row(r), inputs.row(i));
    normalize_in_place(y);
  }
  return EmbeddingSet(std::move(out), inputs.labels());
}

PairLoss batch_objective(const ScoredPairSet& scored, const TrainConfig& cfg,
                         const std::map<ClassId, double>* class_margins) {
  PairLoss total;
  total.dsim.assign(scored.size(), 0.0);
  auto add = [&](const PairLoss& part) {
    total.value += part.value;
    for (std::size_t i = 0; i < total.dsim.size(); ++i) total.dsim[i] += part.dsim[i];
  };
  switch (cfg.base.kind) {
    case BaseLossKind::None:
      break;
    case BaseLossKind::Contrastive:
      add(contrastive_loss(scored, cfg.base.contrastive));
      break;
    case BaseLossKind::Triplet:
      add(triplet_loss(scored, cfg.base.triplet_margin));
      break;
  }
  if (cfg.cam) {
    const PairLoss cam = class_margins ? cam_loss(scored, *cfg.cam, *class_margins) : cam_loss(scored, *cfg.cam);
    add(cam);
    total.selected_positive = cam.selected_positive;
    total.selected_negative = cam.selected_negative;
  }
  return total;
}

TrainResult train(const EmbeddingSet& data, const TrainConfig& cfg) {
  cfg.validate();
  return run(TrainState::initial(data, cfg), cfg, {cfg.epochs, cfg.lr, false});
}

TrainResult train(const TrainState& start, const TrainConfig& cfg) {
  cfg.validate();
  return run(start, cfg, {cfg.epochs, cfg.lr, false});
}

TrainResult finetune_adacam(const TrainState& cam_state, const TrainConfig& cfg) {
  cfg.validate();
  if (!cfg.cam) throw Error(Errc::InvalidConfig, "AdaCAM fine-tuning requires a CAM configuration");
  return run(cam_state, cfg, {cfg.adacam.finetune_epochs, cfg.adacam.lr * cfg.adacam.lr_scale, true});
}

}  // namespace calm
