#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "calm/core.hpp"

namespace calm {

/// Unordered sample pair, a < b. `anchor` is the class the pair is
/// attributed to: the shared label for positives, the class whose quota
/// generated it for sampled negatives, label(a) for exhaustive negatives.
struct PairEntry {
  std::uint32_t a = 0;
  std::uint32_t b = 0;
  ClassId anchor = 0;
  bool positive = false;

  friend bool operator==(const PairEntry&, const PairEntry&) = default;
};

/// Canonically ordered by (anchor, a, b).
using PairList = std::vector<PairEntry>;

struct ScoredPair {
  PairEntry pair;
  double similarity = 0.0;
  double distance = 0.0;

  friend bool operator==(const ScoredPair&, const ScoredPair&) = default;
};

struct ScoredPairSet {
  std::vector<ScoredPair> entries;

  std::size_t size() const noexcept { return entries.size(); }
  std::size_t positive_count() const noexcept;
  std::size_t negative_count() const noexcept { return size() - positive_count(); }
};

void sort_canonical(PairList& pairs);

/// n_j (n_j - 1) / 2 positives per class.
PairList enumerate_positive_pairs(const EmbeddingSet& set);

/// For each class j with p_j positive pairs, min(ratio * p_j, n_j (N - n_j))
/// cross-class pairs touching class j, uniformly without replacement.
/// Each class draws from its own sub-stream of `seed`. A pair drawn by two
/// different anchor classes is kept once per anchor.
/// Throws SingleClass with fewer than two classes, OutOfRange if ratio == 0.
PairList sample_negative_pairs(const EmbeddingSet& set, std::uint32_t ratio, std::uint64_t seed);

/// All N (N - 1) / 2 unordered pairs.
PairList exhaustive_pairs(const EmbeddingSet& set);

/// Throws IndexOutOfRange for indices outside the set.
ScoredPairSet score_pairs(const EmbeddingSet& set, const PairList& pairs);

/// Positives followed by negatives, each canonically ordered.
PairList evaluation_pairs(const EmbeddingSet& set, std::uint32_t ratio, std::uint64_t seed);

}  // namespace calm
