#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "calm/core.hpp"

namespace calm {

/// Mean resultant lengths at or above this are clamped before estimating
/// kappa (duplicate embeddings would otherwise give an infinite estimate).
inline constexpr double kMaxResultantLength = 1.0 - 1e-9;

/// Sra's closed-form concentration estimate r (M - r^2) / (1 - r^2).
/// Throws Degenerate if r_bar >= kMaxResultantLength, OutOfRange if r_bar < 0
/// or dim < 2.
double estimate_kappa(double r_bar, std::size_t dim);

/// (2 kappa - kappa_min - kappa_max) / (kappa_max - kappa_min) clamped to
/// [-1, 1]. Throws InvalidBounds unless kappa_min < kappa_max.
double compactness_score(double kappa, double kappa_min, double kappa_max);

/// 1 / (1 + e^z).
double vmf_weight(double z);

/// m_plus * w_j / mean(w). Throws EmptyInput on no weights, OutOfRange on a
/// non-positive weight.
std::vector<double> adaptive_margins(std::span<const double> weights, double m_plus);

/// Running per-class sum of embeddings and sample count.
class ClassMeanTable {
 public:
  explicit ClassMeanTable(std::size_t dim) : dim_(dim) {}

  struct Entry {
    std::vector<double> sum;
    std::size_t count = 0;
  };

  /// Accumulates rows in index order.
  void update(const EmbeddingSet& batch);
  void update(std::span<const double> embedding, ClassId cls);
  void reset();

  std::size_t dim() const noexcept { return dim_; }
  const std::map<ClassId, Entry>& entries() const noexcept { return entries_; }

  /// ||sum|| / n; throws InsufficientSamples for an unseen class.
  double resultant_length(ClassId cls) const;

 private:
  std::size_t dim_;
  std::map<ClassId, Entry> entries_;
};

struct ClassVmf {
  std::size_t count = 0;
  double r_bar = 0.0;
  double kappa = 0.0;
  double z = 0.0;
  double weight = 0.5;
  double m_plus = 0.0;
};

struct VmfState {
  std::map<ClassId, ClassVmf> classes;
  double kappa_min = 0.0;
  double kappa_max = 0.0;
  /// True when every refreshed class had the same kappa (within 1e-9
  /// relative); all compactness scores are then 0.
  bool homogeneous = false;
  /// Classes seen with fewer than two samples; they keep their previous margin.
  std::vector<ClassId> stale;

  std::map<ClassId, double> margins() const;
};

/// Linear-interpolation percentile (0..100) of unsorted values.
double percentile(std::vector<double> values, double pct);

/// Estimates kappa for every class with >= 2 samples, normalizes by the
/// percentile window, recomputes weights and margins, then resets the table.
/// Throws InsufficientSamples if no class has two samples.
VmfState epoch_refresh(ClassMeanTable& table, double m_plus, const VmfState* previous = nullptr,
                       double percentile_lo = 5.0, double percentile_hi = 95.0);

}  // namespace calm
