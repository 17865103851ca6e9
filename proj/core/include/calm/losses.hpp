#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "calm/core.hpp"
#include "calm/pairs.hpp"

namespace calm {

/// Calibration-aware margin regularizer settings. Margins are cosine
/// similarities; m_minus < m_plus.
struct CamConfig {
  double m_plus = 0.7;
  double m_minus = 0.3;
  double lambda_plus = 1.0;
  double lambda_minus = 1.0;

  /// Throws InvalidConfig when the invariants do not hold.
  void validate() const;
};

/// Loss value with its derivative w.r.t. every pair similarity of a
/// ScoredPairSet (same order as `entries`).
struct PairLoss {
  double value = 0.0;
  std::vector<double> dsim;
  std::size_t selected_positive = 0;
  std::size_t selected_negative = 0;
};

/// Loss value with its gradient w.r.t. the embedding rows.
struct LossValueAndGrad {
  double value = 0.0;
  Matrix grad;
  std::size_t selected_positive = 0;
  std::size_t selected_negative = 0;
};

/// Hinge on positives with s <= m+ and negatives with s >= m-, each averaged
/// over its selected (violating) pairs. A term with nothing selected is 0.
/// The selected counts are treated as constants when differentiating.
PairLoss cam_loss(const ScoredPairSet& scored, const CamConfig& cfg);

/// Same as cam_loss with a per-class positive margin for positive pairs
/// (keyed by anchor class); classes missing from the map use cfg.m_plus.
PairLoss cam_loss(const ScoredPairSet& scored, const CamConfig& cfg,
                  const std::map<ClassId, double>& class_margins);

struct ContrastiveConfig {
  double pos_margin = 0.0;  // positives pulled until s >= 1 - pos_margin
  double neg_margin = 0.3;  // negatives pushed until s <= neg_margin
};

/// mean_pos max(0, 1 - pos_margin - s) + mean_neg max(0, s - neg_margin).
PairLoss contrastive_loss(const ScoredPairSet& scored, const ContrastiveConfig& cfg);

/// Mean of max(0, s_an - s_ap + margin) over every (anchor, positive,
/// negative) triplet expressible with the pairs of `scored`; each positive
/// pair serves as anchor in both orientations. Throws NoValidTriplets.
PairLoss triplet_loss(const ScoredPairSet& scored, double margin);

/// Chains per-pair derivatives through s = u.v and projects each row's
/// gradient on the tangent space of the sphere: g - (g.u) u.
Matrix grad_wrt_embeddings(const Matrix& embeddings, const ScoredPairSet& scored,
                           std::span<const double> dsim);
Matrix grad_wrt_embeddings(const EmbeddingSet& set, const ScoredPairSet& scored,
                           std::span<const double> dsim);

LossValueAndGrad to_embedding_loss(const EmbeddingSet& set, const ScoredPairSet& scored,
                                   const PairLoss& loss);

/// Sum of base and regularizer. Throws ShapeMismatch on differing shapes.
LossValueAndGrad final_loss(const LossValueAndGrad& base, const LossValueAndGrad& cam);

}  // namespace calm
