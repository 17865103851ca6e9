#include "calm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "calm/error.hpp"

namespace calm {

namespace {

std::size_t count_at_most(const std::vector<double>& sorted, double d) {
  return static_cast<std::size_t>(std::upper_bound(sorted.begin(), sorted.end(), d) - sorted.begin());
}

void require_grid(std::span<const double> grid) {
  if (grid.size() < 2) throw Error(Errc::GridMismatch, "grid needs at least two points");
}

bool same_grid(const UtilityCurve& x, const UtilityCurve& y) {
  return x.grid == y.grid && x.values.size() == x.grid.size() && y.values.size() == y.grid.size();
}

std::string owner_name(std::optional<ClassId> owner) {
  return owner ? "class " + std::to_string(*owner) : std::string("pooled");
}

}  // namespace

double utility(double phi, double psi, double c) {
  const double c2 = c * c;
  const double denom = c2 * phi + psi;
  if (denom <= 0.0) return 0.0;
  return (1.0 + c2) * phi * psi / denom;
}

Rates class_rates(const ScoredPairSet& scored, ClassId cls, double d) {
  std::size_t pos = 0, pos_hit = 0, neg = 0, neg_reject = 0;
  for (const ScoredPair& p : scored.entries) {
    if (p.pair.anchor != cls) continue;
    if (p.pair.positive) {
      ++pos;
      if (p.distance <= d) ++pos_hit;
    } else {
      ++neg;
      if (p.distance > d) ++neg_reject;
    }
  }
  if (pos == 0 || neg == 0) {
    throw Error(Errc::InsufficientPairs, "class " + std::to_string(cls) + " has " +
                                             std::to_string(pos) + " positive and " +
                                             std::to_string(neg) + " negative pairs");
  }
  return {static_cast<double>(neg_reject) / static_cast<double>(neg),
          static_cast<double>(pos_hit) / static_cast<double>(pos)};
}

CalibrationRange calibration_range_from_far(const ScoredPairSet& scored, double far_lo, double far_hi) {
  if (!(far_lo > 0.0 && far_lo < far_hi && far_hi <= 1.0)) {
    throw Error(Errc::OutOfRange, "FAR range must satisfy 0 < lo < hi <= 1");
  }
  std::vector<double> neg;
  for (const ScoredPair& p : scored.entries) {
    if (!p.pair.positive) neg.push_back(p.distance);
  }
  if (neg.empty()) throw Error(Errc::InsufficientPairs, "no negative pairs");
  std::sort(neg.begin(), neg.end());

  const auto n = static_cast<double>(neg.size());
  auto quantile = [&](double q) {
    const double h = std::clamp(q * n, 1.0, n);  // 1-based order-statistic position
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const double frac = h - static_cast<double>(lo);
    if (lo >= neg.size()) return neg.back();
    return neg[lo - 1] + frac * (neg[lo] - neg[lo - 1]);
  };

  CalibrationRange range{quantile(far_lo), quantile(far_hi), far_lo, far_hi};
  if (!(range.d_min < range.d_max)) {
    throw Error(Errc::DegenerateRange,
                "d_min " + std::to_string(range.d_min) + " >= d_max " + std::to_string(range.d_max));
  }
  return range;
}

std::vector<double> uniform_grid(const CalibrationRange& range, std::size_t points) {
  if (points < 2) throw Error(Errc::GridMismatch, "grid needs at least two points");
  std::vector<double> grid(points);
  const double span = range.d_max - range.d_min;
  const auto last = static_cast<double>(points - 1);
  for (std::size_t k = 0; k < points; ++k) {
    grid[k] = range.d_min + span * (static_cast<double>(k) / last);
  }
  grid.back() = range.d_max;
  return grid;
}

DistanceIndex::DistanceIndex(const ScoredPairSet& scored) {
  for (const ScoredPair& p : scored.entries) {
    Sorted& bucket = by_class_[p.pair.anchor];
    (p.pair.positive ? bucket.positive : bucket.negative).push_back(p.distance);
    (p.pair.positive ? pooled_.positive : pooled_.negative).push_back(p.distance);
  }
  for (auto& [cls, bucket] : by_class_) {
    std::sort(bucket.positive.begin(), bucket.positive.end());
    std::sort(bucket.negative.begin(), bucket.negative.end());
  }
  std::sort(pooled_.positive.begin(), pooled_.positive.end());
  std::sort(pooled_.negative.begin(), pooled_.negative.end());
}

std::vector<ClassId> DistanceIndex::eligible_classes() const {
  std::vector<ClassId> out;
  for (const auto& [cls, bucket] : by_class_) {
    if (!bucket.positive.empty() && !bucket.negative.empty()) out.push_back(cls);
  }
  return out;
}

std::vector<ClassId> DistanceIndex::ineligible_classes() const {
  std::vector<ClassId> out;
  for (const auto& [cls, bucket] : by_class_) {
    if (bucket.positive.empty() || bucket.negative.empty()) out.push_back(cls);
  }
  return out;
}

const DistanceIndex::Sorted& DistanceIndex::of(ClassId cls) const {
  static const Sorted kEmpty;
  auto it = by_class_.find(cls);
  return it == by_class_.end() ? kEmpty : it->second;
}

DistanceIndex::Sorted DistanceIndex::merged(std::span<const ClassId> classes) const {
  Sorted out;
  for (ClassId cls : classes) {
    const Sorted& s = of(cls);
    out.positive.insert(out.positive.end(), s.positive.begin(), s.positive.end());
    out.negative.insert(out.negative.end(), s.negative.begin(), s.negative.end());
  }
  std::sort(out.positive.begin(), out.positive.end());
  std::sort(out.negative.begin(), out.negative.end());
  return out;
}

Rates rates_at(const DistanceIndex::Sorted& distances, double d) {
  const auto pos = static_cast<double>(distances.positive.size());
  const auto neg = static_cast<double>(distances.negative.size());
  const auto pos_hit = static_cast<double>(count_at_most(distances.positive, d));
  const auto neg_accept = static_cast<double>(count_at_most(distances.negative, d));
  return {(neg - neg_accept) / neg, pos_hit / pos};
}

UtilityCurve utility_curve(const DistanceIndex& index, std::optional<ClassId> owner,
                           const CalibrationRange& range, std::size_t points, double c) {
  const DistanceIndex::Sorted& distances = owner ? index.of(*owner) : index.pooled();
  if (distances.positive.empty() || distances.negative.empty()) {
    throw Error(Errc::InsufficientPairs, owner_name(owner) + " lacks positive or negative pairs");
  }
  UtilityCurve curve{owner, uniform_grid(range, points), {}};
  curve.values.reserve(points);
  for (double d : curve.grid) {
    const Rates r = rates_at(distances, d);
    curve.values.push_back(utility(r.specificity, r.sensitivity, c));
  }
  return curve;
}

UtilityCurve utility_curve(const ScoredPairSet& scored, std::optional<ClassId> owner,
                           const CalibrationRange& range, std::size_t points, double c) {
  return utility_curve(DistanceIndex(scored), owner, range, points, c);
}

double trapezoid(std::span<const double> grid, std::span<const double> values) {
  require_grid(grid);
  double acc = 0.0;
  for (std::size_t k = 1; k < grid.size(); ++k) {
    acc += 0.5 * (grid[k] - grid[k - 1]) * (values[k] + values[k - 1]);
  }
  return acc;
}

OpisReport opis(std::span<const UtilityCurve> curves, const UtilityCurve& pooled,
                std::span<const double> weights) {
  require_grid(pooled.grid);
  if (curves.empty()) throw Error(Errc::InsufficientPairs, "no class curves");
  if (!weights.empty() && weights.size() != curves.size()) {
    throw Error(Errc::ShapeMismatch, "one weight per class curve required");
  }
  const double width = pooled.grid.back() - pooled.grid.front();

  OpisReport report;
  double weighted = 0.0;
  double weight_sum = 0.0;
  std::vector<double> sq(pooled.grid.size());
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const UtilityCurve& curve = curves[i];
    if (!same_grid(curve, pooled)) {
      throw Error(Errc::GridMismatch, owner_name(curve.owner) + " grid differs from pooled grid");
    }
    for (std::size_t k = 0; k < sq.size(); ++k) {
      const double diff = curve.values[k] - pooled.values[k];
      sq[k] = diff * diff;
    }
    const double contribution = trapezoid(pooled.grid, sq) / width;
    const double w = weights.empty() ? 1.0 : weights[i];
    if (!(w >= 0.0)) throw Error(Errc::OutOfRange, "class weights must be non-negative");
    report.classes.push_back(curve.owner.value_or(0));
    report.per_class_contribution.push_back(contribution);
    report.weights.push_back(w);
    weighted += w * contribution;
    weight_sum += w;
  }
  if (!(weight_sum > 0.0)) throw Error(Errc::OutOfRange, "class weights sum to zero");
  report.opis = weighted / weight_sum;
  return report;
}

double epsilon_opis(const DistanceIndex& index, std::span<const UtilityCurve> curves, double epsilon,
                    const CalibrationRange& range, double c) {
  if (!(epsilon > 0.0 && epsilon <= 100.0)) {
    throw Error(Errc::OutOfRange, "epsilon must lie in (0, 100]");
  }
  if (curves.empty()) throw Error(Errc::EmptyGroup, "no ranked classes");
  const std::vector<double>& grid = curves.front().grid;
  require_grid(grid);
  if (grid.front() != range.d_min || grid.back() != range.d_max) {
    throw Error(Errc::GridMismatch, "curve grid does not span the calibration range");
  }

  struct Ranked {
    ClassId cls;
    double mean;
  };
  std::vector<Ranked> ranked;
  ranked.reserve(curves.size());
  for (const UtilityCurve& curve : curves) {
    if (!curve.owner) throw Error(Errc::GridMismatch, "pooled curve passed as a class curve");
    if (!same_grid(curve, curves.front())) throw Error(Errc::GridMismatch, "class grids differ");
    const double mean = std::accumulate(curve.values.begin(), curve.values.end(), 0.0) /
                        static_cast<double>(curve.values.size());
    ranked.push_back({*curve.owner, mean});
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const Ranked& x, const Ranked& y) {
    if (x.mean != y.mean) return x.mean > y.mean;
    return x.cls < y.cls;
  });

  const double t = static_cast<double>(ranked.size());
  const auto group = static_cast<std::size_t>(std::ceil(epsilon * t / 100.0 - 1e-9));
  if (group == 0) throw Error(Errc::EmptyGroup, "epsilon selects no class");

  std::vector<ClassId> best, worst;
  for (std::size_t i = 0; i < group; ++i) {
    best.push_back(ranked[i].cls);
    worst.push_back(ranked[ranked.size() - group + i].cls);
  }
  std::sort(best.begin(), best.end());
  std::sort(worst.begin(), worst.end());
  const DistanceIndex::Sorted best_pairs = index.merged(best);
  const DistanceIndex::Sorted worst_pairs = index.merged(worst);

  std::vector<double> sq(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const Rates rb = rates_at(best_pairs, grid[k]);
    const Rates rw = rates_at(worst_pairs, grid[k]);
    const double diff = utility(rw.specificity, rw.sensitivity, c) -
                        utility(rb.specificity, rb.sensitivity, c);
    sq[k] = diff * diff;
  }
  return trapezoid(grid, sq) / (grid.back() - grid.front());
}

double epsilon_opis(const ScoredPairSet& scored, std::span<const UtilityCurve> curves, double epsilon,
                    const CalibrationRange& range, double c) {
  return epsilon_opis(DistanceIndex(scored), curves, epsilon, range, c);
}

std::vector<std::pair<std::size_t, double>> recall_at(const EmbeddingSet& set,
                                                      std::span<const std::size_t> ks) {
  const std::size_t n = set.size();
  std::size_t kmax = 0;
  for (std::size_t k : ks) {
    if (k == 0 || k >= n) {
      throw Error(Errc::OutOfRange, "recall@k needs 0 < k < N (k=" + std::to_string(k) + ")");
    }
    kmax = std::max(kmax, k);
  }
  std::vector<std::size_t> hits(ks.size(), 0);
  std::vector<std::pair<double, std::size_t>> scored(n - 1);
  for (std::size_t q = 0; q < n; ++q) {
    std::size_t m = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != q) scored[m++] = {cosine(set.row(q), set.row(j)), j};
    }
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(kmax), scored.end(),
                      [](const auto& x, const auto& y) {
                        if (x.first != y.first) return x.first > y.first;
                        return x.second < y.second;
                      });
    // rank of the first same-class neighbour
    std::size_t first = kmax;
    for (std::size_t r = 0; r < kmax; ++r) {
      if (set.label(scored[r].second) == set.label(q)) {
        first = r;
        break;
      }
    }
    for (std::size_t i = 0; i < ks.size(); ++i) {
      if (first < ks[i]) ++hits[i];
    }
  }
  std::vector<std::pair<std::size_t, double>> out;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    out.emplace_back(ks[i], static_cast<double>(hits[i]) / static_cast<double>(n));
  }
  return out;
}

double recall_at_k(const EmbeddingSet& set, std::size_t k) {
  const std::size_t ks[] = {k};
  return recall_at(set, ks).front().second;
}

double EvalReport::recall_at(std::size_t k) const {
  for (const auto& [kk, value] : recall) {
    if (kk == k) return value;
  }
  throw Error(Errc::OutOfRange, "recall@" + std::to_string(k) + " not computed");
}

EvalReport evaluate(const EmbeddingSet& set, const EvalConfig& cfg) {
  const PairList pairs =
      cfg.ratio == 0 ? exhaustive_pairs(set) : evaluation_pairs(set, cfg.ratio, cfg.seed);
  const ScoredPairSet scored = score_pairs(set, pairs);
  const DistanceIndex index(scored);

  EvalReport report;
  report.positive_pairs = scored.positive_count();
  report.negative_pairs = scored.negative_count();
  report.range = calibration_range_from_far(scored, cfg.far_lo, cfg.far_hi);

  const auto eligible = index.eligible_classes();
  if (eligible.empty()) throw Error(Errc::InsufficientPairs, "no class has both positive and negative pairs");
  for (ClassId cls : set.classes()) {
    if (!std::binary_search(eligible.begin(), eligible.end(), cls)) report.excluded_classes.push_back(cls);
  }
  for (ClassId cls : eligible) {
    report.curves.push_back(utility_curve(index, cls, report.range, cfg.grid, cfg.c));
  }
  report.pooled = utility_curve(index, std::nullopt, report.range, cfg.grid, cfg.c);
  report.opis = opis(report.curves, report.pooled);
  for (double eps : cfg.epsilons) {
    report.opis.epsilon_opis.emplace_back(eps, epsilon_opis(index, report.curves, eps, report.range, cfg.c));
  }

  std::vector<std::size_t> ks;
  for (std::size_t k : cfg.recall_ks) {
    if (k > 0 && k < set.size()) ks.push_back(k);
  }
  if (!ks.empty()) report.recall = recall_at(set, ks);
  return report;
}

}  // namespace calm
