#pragma once

// Randomized inputs shared by the unit tests and the acceptance checks.

#include <algorithm>
#include <cmath>
#include <functional>
#include <initializer_list>

#include "calm/core.hpp"
#include "calm/losses.hpp"
#include "calm/metrics.hpp"
#include "calm/pairs.hpp"
#include "calm/random.hpp"
#include "calm/synth.hpp"
#include "oracles.hpp"

namespace calm::fixture {

// Up to 60 samples in 2..6 classes of dimension 2..8, every class with at
// least two samples.
inline EmbeddingSet random_instance(Rng& rng) {
  const std::size_t dim = 2 + rng.below(7);
  const std::size_t classes = 2 + rng.below(5);
  const std::size_t n = std::max<std::size_t>(classes * 2, 12 + rng.below(49));
  std::vector<std::vector<double>> centers;
  for (std::size_t c = 0; c < classes; ++c) centers.push_back(random_unit_vector(dim, rng));
  Matrix m(n, dim);
  std::vector<ClassId> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto cls = static_cast<std::size_t>(i < classes * 2 ? i / 2 : rng.below(classes));
    labels[i] = static_cast<ClassId>(cls);
    const Matrix draw = sample_vmf(centers[cls], 1.0 + 30.0 * rng.uniform(), 1, rng);
    std::copy(draw.row(0).begin(), draw.row(0).end(), m.row(i).begin());
  }
  return EmbeddingSet(std::move(m), std::move(labels));
}

// Worst relative error of OPIS and epsilon-OPIS against the naive oracle.
inline double worst_oracle_error(std::uint64_t seed, int instances) {
  Rng rng(seed);
  double worst = 0.0;
  for (int t = 0; t < instances; ++t) {
    const EmbeddingSet set = random_instance(rng);
    EvalConfig cfg;
    cfg.grid = 2 + rng.below(63);
    cfg.c = t % 3 == 0 ? 2.0 : 1.0;
    cfg.ratio = t % 2 == 0 ? 0 : 3;
    cfg.far_lo = 0.05;
    cfg.far_hi = 0.5;
    cfg.seed = static_cast<std::uint64_t>(t);
    cfg.epsilons = {10.0, 20.0, 50.0, 100.0};
    cfg.recall_ks = {1};
    const EvalReport report = evaluate(set, cfg);

    const ScoredPairSet scored =
        score_pairs(set, cfg.ratio == 0 ? exhaustive_pairs(set) : evaluation_pairs(set, cfg.ratio, cfg.seed));
    const oracle::Naive naive = oracle::opis(scored, cfg.far_lo, cfg.far_hi, cfg.grid, cfg.c);
    if (report.opis.classes != naive.classes) return 1.0;
    worst = std::max(worst, oracle::relative_error(report.opis.opis, naive.opis));
    for (const auto& [eps, value] : report.opis.epsilon_opis) {
      worst = std::max(worst, oracle::relative_error(value, oracle::epsilon_opis(scored, naive, eps, cfg.c)));
    }
  }
  return worst;
}

struct Batch {
  EmbeddingSet set;
  ScoredPairSet scored;
};

inline Batch random_batch(Rng& rng) {
  SynthConfig sc;
  sc.classes = 2 + rng.below(3);
  sc.samples_per_class = 2 + rng.below(3);
  sc.dim = 3 + rng.below(6);
  sc.kappa_lo = 2.0;
  sc.kappa_hi = 20.0;
  sc.seed = rng.next();
  EmbeddingSet set = make_dataset(sc).set;
  ScoredPairSet scored = score_pairs(set, exhaustive_pairs(set));
  return {std::move(set), std::move(scored)};
}

// Pair similarities as raw dot products, so finite differences see the loss
// without any renormalization.
inline ScoredPairSet rescore(const Matrix& e, const ScoredPairSet& pattern) {
  ScoredPairSet out = pattern;
  for (ScoredPair& p : out.entries) {
    p.similarity = dot(e.row(p.pair.a), e.row(p.pair.b));
    p.distance = 0.0;
  }
  return out;
}

inline double nearest_kink(const ScoredPairSet& s, std::initializer_list<double> kinks) {
  double best = 1.0;
  for (const ScoredPair& p : s.entries) {
    for (double k : kinks) best = std::min(best, std::abs(p.similarity - k));
  }
  return best;
}

inline double triplet_kink(const ScoredPairSet& s, double margin) {
  double best = 1.0;
  for (const ScoredPair& ap : s.entries) {
    if (!ap.pair.positive) continue;
    for (const ScoredPair& an : s.entries) {
      if (an.pair.positive) continue;
      const bool shares = an.pair.a == ap.pair.a || an.pair.b == ap.pair.a || an.pair.a == ap.pair.b ||
                          an.pair.b == ap.pair.b;
      if (shares) best = std::min(best, std::abs(an.similarity - ap.similarity + margin));
    }
  }
  return best;
}

// Worst relative disagreement between the analytic tangent gradient and a
// central difference with step 1e-6, over random batches (skipping any with
// a pair within 1e-4 of a hinge) and 20 tangent directions each.
inline double worst_gradient_error(const std::function<PairLoss(const ScoredPairSet&)>& loss,
                                   const std::function<double(const ScoredPairSet&)>& kink_distance,
                                   std::uint64_t seed, int batches = 100) {
  Rng rng(seed);
  double worst = 0.0;
  int done = 0;
  while (done < batches) {
    const Batch b = random_batch(rng);
    if (kink_distance(b.scored) < 1e-4) continue;
    ++done;
    const PairLoss l = loss(b.scored);
    const Matrix grad = grad_wrt_embeddings(b.set, b.scored, l.dsim);
    const auto f = [&](const Matrix& e) { return loss(rescore(e, b.scored)).value; };
    for (int d = 0; d < 20; ++d) {
      const Matrix t = oracle::tangent_direction(b.set.vectors(), rng);
      const double fd = oracle::directional_fd(f, b.set.vectors(), t, 1e-6);
      const double an = oracle::frobenius(grad, t);
      const double scale = std::max({std::abs(fd), std::abs(an), 1e-6});
      worst = std::max(worst, std::abs(fd - an) / scale);
    }
  }
  return worst;
}

}  // namespace calm::fixture
