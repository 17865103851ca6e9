#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "calm/core.hpp"
#include "calm/pairs.hpp"

namespace calm {

/// Harmonic-mean utility (1 + c^2) phi psi / (c^2 phi + psi); 0 when both
/// rates are 0. phi is specificity, psi sensitivity, c the trade-off weight.
double utility(double phi, double psi, double c = 1.0);

struct Rates {
  double specificity = 0.0;  // phi: negatives with distance > d
  double sensitivity = 0.0;  // psi: positives with distance <= d
};

/// Rates of one class at threshold d: positives of the class and negatives
/// anchored at it. Throws InsufficientPairs if either side is empty.
Rates class_rates(const ScoredPairSet& scored, ClassId cls, double d);

struct CalibrationRange {
  double d_min = 0.0;
  double d_max = 2.0;
  double far_lo = 0.0;
  double far_hi = 1.0;
};

/// Distances at which the pooled false-accept rate reaches far_lo and far_hi.
/// The empirical quantile interpolates linearly between order statistics so
/// that FAR(x_(k)) = k / n exactly.
CalibrationRange calibration_range_from_far(const ScoredPairSet& scored, double far_lo, double far_hi);

/// G points, grid[0] = d_min, grid[G-1] = d_max.
std::vector<double> uniform_grid(const CalibrationRange& range, std::size_t points);

struct UtilityCurve {
  std::optional<ClassId> owner;  // nullopt: pooled over the whole set
  std::vector<double> grid;
  std::vector<double> values;
};

/// Sorted pair distances grouped by anchor class, for repeated threshold
/// queries.
class DistanceIndex {
 public:
  struct Sorted {
    std::vector<double> positive;
    std::vector<double> negative;
  };

  explicit DistanceIndex(const ScoredPairSet& scored);

  /// Classes with at least one positive and one negative pair, ascending.
  std::vector<ClassId> eligible_classes() const;
  /// Classes appearing as an anchor but lacking one side.
  std::vector<ClassId> ineligible_classes() const;

  const Sorted& of(ClassId cls) const;
  const Sorted& pooled() const noexcept { return pooled_; }
  Sorted merged(std::span<const ClassId> classes) const;

 private:
  std::map<ClassId, Sorted> by_class_;
  Sorted pooled_;
};

Rates rates_at(const DistanceIndex::Sorted& distances, double d);

/// Throws InsufficientPairs when the owner lacks positives or negatives.
UtilityCurve utility_curve(const ScoredPairSet& scored, std::optional<ClassId> owner,
                           const CalibrationRange& range, std::size_t points, double c = 1.0);
UtilityCurve utility_curve(const DistanceIndex& index, std::optional<ClassId> owner,
                           const CalibrationRange& range, std::size_t points, double c = 1.0);

/// Composite trapezoid rule on a strictly increasing grid.
double trapezoid(std::span<const double> grid, std::span<const double> values);

struct OpisReport {
  double opis = 0.0;
  std::vector<ClassId> classes;
  std::vector<double> per_class_contribution;
  std::vector<double> weights;
  std::vector<std::pair<double, double>> epsilon_opis;  // (epsilon percent, value)
};

/// Weighted mean over classes of the range-normalized integral of
/// (U_i(d) - U_pooled(d))^2. Empty `weights` means w_i = 1.
/// Throws GridMismatch if any curve differs in grid from `pooled`.
OpisReport opis(std::span<const UtilityCurve> curves, const UtilityCurve& pooled,
                std::span<const double> weights = {});

/// Squared utility gap between the pooled best and worst epsilon-percent of
/// classes, ranked by mean utility over the grid. The group size is
/// ceil(epsilon * T / 100). Ties rank by class id.
double epsilon_opis(const ScoredPairSet& scored, std::span<const UtilityCurve> curves, double epsilon,
                    const CalibrationRange& range, double c = 1.0);
double epsilon_opis(const DistanceIndex& index, std::span<const UtilityCurve> curves, double epsilon,
                    const CalibrationRange& range, double c = 1.0);

/// Fraction of samples with a same-class sample among their k nearest
/// neighbours by cosine (self excluded; ties broken by lower index).
double recall_at_k(const EmbeddingSet& set, std::size_t k);

/// Recall at several k from a single neighbour scan.
std::vector<std::pair<std::size_t, double>> recall_at(const EmbeddingSet& set,
                                                      std::span<const std::size_t> ks);

struct EvalConfig {
  double far_lo = 1e-2;
  double far_hi = 1e-1;
  std::size_t grid = 512;
  double c = 1.0;
  std::vector<double> epsilons{10.0, 20.0, 50.0};
  std::uint32_t ratio = 10;  // 0: exhaustive pairs
  std::uint64_t seed = 0;
  std::vector<std::size_t> recall_ks{1, 2, 4, 8};
};

struct EvalReport {
  CalibrationRange range;
  OpisReport opis;
  std::vector<UtilityCurve> curves;
  UtilityCurve pooled;
  std::vector<std::pair<std::size_t, double>> recall;
  std::size_t positive_pairs = 0;
  std::size_t negative_pairs = 0;
  std::vector<ClassId> excluded_classes;

  double recall_at(std::size_t k) const;
};

/// Full evaluation: pairs, calibration range, per-class and pooled curves,
/// OPIS, epsilon-OPIS and recall@k (k >= N skipped).
EvalReport evaluate(const EmbeddingSet& set, const EvalConfig& cfg);

}  // namespace calm
