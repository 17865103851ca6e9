#include "calm/pairs.hpp"

#include <algorithm>
#include <string>
#include <tuple>
#include <unordered_set>

#include "calm/error.hpp"
#include "calm/random.hpp"

namespace calm {

namespace {

PairEntry make_entry(std::size_t i, std::size_t j, ClassId anchor, bool positive) {
  const auto lo = static_cast<std::uint32_t>(std::min(i, j));
  const auto hi = static_cast<std::uint32_t>(std::max(i, j));
  return {lo, hi, anchor, positive};
}

// Floyd's algorithm: k distinct values from [0, n), returned sorted.
std::vector<std::uint64_t> sample_without_replacement(std::uint64_t n, std::uint64_t k, Rng& rng) {
  std::vector<std::uint64_t> picked;
  picked.reserve(k);
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(k * 2);
  for (std::uint64_t j = n - k; j < n; ++j) {
    const std::uint64_t t = rng.below(j + 1);
    const std::uint64_t v = seen.contains(t) ? j : t;
    seen.insert(v);
    picked.push_back(v);
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

}  // namespace

std::size_t ScoredPairSet::positive_count() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [](const ScoredPair& p) { return p.pair.positive; }));
}

void sort_canonical(PairList& pairs) {
  std::sort(pairs.begin(), pairs.end(), [](const PairEntry& x, const PairEntry& y) {
    return std::tie(x.anchor, x.a, x.b) < std::tie(y.anchor, y.a, y.b);
  });
}

PairList enumerate_positive_pairs(const EmbeddingSet& set) {
  PairList out;
  for (ClassId cls : set.classes()) {
    const auto members = set.members(cls);
    for (std::size_t x = 0; x < members.size(); ++x) {
      for (std::size_t y = x + 1; y < members.size(); ++y) {
        out.push_back(make_entry(members[x], members[y], cls, true));
      }
    }
  }
  return out;
}

PairList sample_negative_pairs(const EmbeddingSet& set, std::uint32_t ratio, std::uint64_t seed) {
  if (ratio == 0) throw Error(Errc::OutOfRange, "negative ratio must be >= 1");
  const auto classes = set.classes();
  if (classes.size() < 2) throw Error(Errc::SingleClass, "need at least two classes");

  PairList out;
  for (ClassId cls : classes) {
    const auto members = set.members(cls);
    std::vector<std::size_t> others;
    others.reserve(set.size() - members.size());
    for (std::size_t i = 0; i < set.size(); ++i) {
      if (set.label(i) != cls) others.push_back(i);
    }
    const std::uint64_t n = members.size();
    const std::uint64_t positives = n * (n - 1) / 2;
    const std::uint64_t available = n * others.size();
    const std::uint64_t want = std::min<std::uint64_t>(positives * ratio, available);
    if (want == 0) continue;

    Rng rng(Rng::derive(seed, cls));
    const auto picks = sample_without_replacement(available, want, rng);
    PairList local;
    local.reserve(picks.size());
    for (std::uint64_t code : picks) {
      local.push_back(make_entry(members[code / others.size()], others[code % others.size()], cls, false));
    }
    sort_canonical(local);
    out.insert(out.end(), local.begin(), local.end());
  }
  return out;
}

PairList exhaustive_pairs(const EmbeddingSet& set) {
  PairList out;
  out.reserve(set.size() * (set.size() - 1) / 2);
  for (std::size_t i = 0; i < set.size(); ++i) {
    for (std::size_t j = i + 1; j < set.size(); ++j) {
      out.push_back(make_entry(i, j, set.label(i), set.label(i) == set.label(j)));
    }
  }
  sort_canonical(out);
  return out;
}

ScoredPairSet score_pairs(const EmbeddingSet& set, const PairList& pairs) {
  ScoredPairSet out;
  out.entries.reserve(pairs.size());
  for (const PairEntry& p : pairs) {
    if (p.a >= set.size() || p.b >= set.size()) {
      throw Error(Errc::IndexOutOfRange,
                  "pair (" + std::to_string(p.a) + ", " + std::to_string(p.b) + ") in set of " +
                      std::to_string(set.size()));
    }
    const double s = cosine(set.row(p.a), set.row(p.b));
    out.entries.push_back({p, s, cos_to_l2(s)});
  }
  return out;
}

PairList evaluation_pairs(const EmbeddingSet& set, std::uint32_t ratio, std::uint64_t seed) {
  PairList out = enumerate_positive_pairs(set);
  const PairList negatives = sample_negative_pairs(set, ratio, seed);
  out.insert(out.end(), negatives.begin(), negatives.end());
  return out;
}

}  // namespace calm
