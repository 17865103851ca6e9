#include "calm/losses.hpp"

#include <algorithm>
#include <numeric>
#include <string>
#include <tuple>
#include <unordered_map>

#include "calm/error.hpp"

namespace calm {

void CamConfig::validate() const {
  auto in_open_unit = [](double m) { return m > -1.0 && m < 1.0; };
  if (!in_open_unit(m_plus) || !in_open_unit(m_minus)) {
    throw Error(Errc::InvalidConfig, "CAM margins must lie in (-1, 1)");
  }
  if (!(m_minus < m_plus)) throw Error(Errc::InvalidConfig, "CAM requires m_minus < m_plus");
  if (!(lambda_plus >= 0.0) || !(lambda_minus >= 0.0)) {
    throw Error(Errc::InvalidConfig, "CAM weights must be non-negative");
  }
}

namespace {

// Reductions run in (anchor, a, b) order so results do not depend on the
// order in which pairs were supplied.
std::vector<std::size_t> canonical_order(const ScoredPairSet& scored) {
  std::vector<std::size_t> order(scored.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto key = [&](std::size_t i) {
    const PairEntry& p = scored.entries[i].pair;
    return std::tie(p.anchor, p.a, p.b);
  };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return key(x) < key(y); });
  return order;
}

template <typename MarginOf>
PairLoss cam_impl(const ScoredPairSet& scored, const CamConfig& cfg, MarginOf margin_of) {
  PairLoss out;
  out.dsim.assign(scored.size(), 0.0);
  double pos_sum = 0.0;
  double neg_sum = 0.0;
  std::vector<std::size_t> pos_sel;
  std::vector<std::size_t> neg_sel;
  for (std::size_t i : canonical_order(scored)) {
    const ScoredPair& p = scored.entries[i];
    if (p.pair.positive) {
      const double m = margin_of(p.pair.anchor);
      if (p.similarity <= m) {
        pos_sum += m - p.similarity;
        pos_sel.push_back(i);
      }
    } else if (p.similarity >= cfg.m_minus) {
      neg_sum += p.similarity - cfg.m_minus;
      neg_sel.push_back(i);
    }
  }
  out.selected_positive = pos_sel.size();
  out.selected_negative = neg_sel.size();
  if (!pos_sel.empty()) {
    const auto count = static_cast<double>(pos_sel.size());
    out.value += cfg.lambda_plus * pos_sum / count;
    for (std::size_t i : pos_sel) out.dsim[i] = -cfg.lambda_plus / count;
  }
  if (!neg_sel.empty()) {
    const auto count = static_cast<double>(neg_sel.size());
    out.value += cfg.lambda_minus * neg_sum / count;
    for (std::size_t i : neg_sel) out.dsim[i] = cfg.lambda_minus / count;
  }
  return out;
}

}  // namespace

PairLoss cam_loss(const ScoredPairSet& scored, const CamConfig& cfg) {
  return cam_impl(scored, cfg, [&](ClassId) { return cfg.m_plus; });
}

PairLoss cam_loss(const ScoredPairSet& scored, const CamConfig& cfg,
                  const std::map<ClassId, double>& class_margins) {
  return cam_impl(scored, cfg, [&](ClassId cls) {
    auto it = class_margins.find(cls);
    return it == class_margins.end() ? cfg.m_plus : it->second;
  });
}

PairLoss contrastive_loss(const ScoredPairSet& scored, const ContrastiveConfig& cfg) {
  PairLoss out;
  out.dsim.assign(scored.size(), 0.0);
  const std::size_t npos = scored.positive_count();
  const std::size_t nneg = scored.size() - npos;
  const double target = 1.0 - cfg.pos_margin;
  double pos_sum = 0.0;
  double neg_sum = 0.0;
  for (std::size_t i : canonical_order(scored)) {
    const ScoredPair& p = scored.entries[i];
    if (p.pair.positive) {
      if (p.similarity < target) {
        pos_sum += target - p.similarity;
        out.dsim[i] = -1.0 / static_cast<double>(npos);
        ++out.selected_positive;
      }
    } else if (p.similarity > cfg.neg_margin) {
      neg_sum += p.similarity - cfg.neg_margin;
      out.dsim[i] = 1.0 / static_cast<double>(nneg);
      ++out.selected_negative;
    }
  }
  if (npos > 0) out.value += pos_sum / static_cast<double>(npos);
  if (nneg > 0) out.value += neg_sum / static_cast<double>(nneg);
  return out;
}

PairLoss triplet_loss(const ScoredPairSet& scored, double margin) {
  const auto order = canonical_order(scored);
  std::unordered_map<std::uint32_t, std::vector<std::size_t>> negatives_of;
  for (std::size_t i : order) {
    const PairEntry& p = scored.entries[i].pair;
    if (p.positive) continue;
    negatives_of[p.a].push_back(i);
    negatives_of[p.b].push_back(i);
  }

  PairLoss out;
  out.dsim.assign(scored.size(), 0.0);
  std::size_t triplets = 0;
  double sum = 0.0;
  struct Active {
    std::size_t pos;
    std::size_t neg;
  };
  std::vector<Active> active;
  for (std::size_t i : order) {
    const ScoredPair& ap = scored.entries[i];
    if (!ap.pair.positive) continue;
    for (std::uint32_t anchor : {ap.pair.a, ap.pair.b}) {
      auto it = negatives_of.find(anchor);
      if (it == negatives_of.end()) continue;
      for (std::size_t j : it->second) {
        ++triplets;
        const double h = scored.entries[j].similarity - ap.similarity + margin;
        if (h > 0.0) {
          sum += h;
          active.push_back({i, j});
        }
      }
    }
  }
  if (triplets == 0) throw Error(Errc::NoValidTriplets, "no (anchor, positive, negative) triplet");
  const double inv = 1.0 / static_cast<double>(triplets);
  out.value = sum * inv;
  for (const Active& t : active) {
    out.dsim[t.pos] -= inv;
    out.dsim[t.neg] += inv;
  }
  out.selected_positive = active.size();
  out.selected_negative = active.size();
  return out;
}

Matrix grad_wrt_embeddings(const Matrix& embeddings, const ScoredPairSet& scored,
                           std::span<const double> dsim) {
  if (dsim.size() != scored.size()) {
    throw Error(Errc::ShapeMismatch, "one derivative per pair required");
  }
  Matrix grad(embeddings.rows(), embeddings.cols());
  for (std::size_t i : canonical_order(scored)) {
    const double g = dsim[i];
    if (g == 0.0) continue;
    const PairEntry& p = scored.entries[i].pair;
    if (p.a >= embeddings.rows() || p.b >= embeddings.rows()) {
      throw Error(Errc::IndexOutOfRange, "pair index outside embedding matrix");
    }
    auto ga = grad.row(p.a);
    auto gb = grad.row(p.b);
    const auto ua = embeddings.row(p.a);
    const auto ub = embeddings.row(p.b);
    for (std::size_t k = 0; k < embeddings.cols(); ++k) {
      ga[k] += g * ub[k];
      gb[k] += g * ua[k];
    }
  }
  for (std::size_t r = 0; r < grad.rows(); ++r) {
    auto g = grad.row(r);
    const auto u = embeddings.row(r);
    const double radial = dot(g, u);
    for (std::size_t k = 0; k < g.size(); ++k) g[k] -= radial * u[k];
  }
  return grad;
}

Matrix grad_wrt_embeddings(const EmbeddingSet& set, const ScoredPairSet& scored,
                           std::span<const double> dsim) {
  return grad_wrt_embeddings(set.vectors(), scored, dsim);
}

LossValueAndGrad to_embedding_loss(const EmbeddingSet& set, const ScoredPairSet& scored,
                                   const PairLoss& loss) {
  return {loss.value, grad_wrt_embeddings(set, scored, loss.dsim), loss.selected_positive,
          loss.selected_negative};
}

LossValueAndGrad final_loss(const LossValueAndGrad& base, const LossValueAndGrad& cam) {
  if (base.grad.rows() != cam.grad.rows() || base.grad.cols() != cam.grad.cols()) {
    throw Error(Errc::ShapeMismatch, std::to_string(base.grad.rows()) + "x" +
                                         std::to_string(base.grad.cols()) + " vs " +
                                         std::to_string(cam.grad.rows()) + "x" +
                                         std::to_string(cam.grad.cols()));
  }
  LossValueAndGrad out{base.value + cam.value, base.grad, cam.selected_positive, cam.selected_negative};
  auto dst = out.grad.data();
  const auto src = cam.grad.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  return out;
}

}  // namespace calm
