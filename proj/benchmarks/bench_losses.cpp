#include <benchmark/benchmark.h>

#include "calm/losses.hpp"
#include "calm/synth.hpp"

namespace {

// A training-sized batch: 8 classes of 4 samples, all pairs.
struct Batch {
  calm::EmbeddingSet set;
  calm::ScoredPairSet scored;
};

Batch batch() {
  calm::SynthConfig cfg;
  cfg.classes = 8;
  cfg.samples_per_class = 4;
  cfg.dim = 16;
  cfg.seed = 2;
  calm::EmbeddingSet set = calm::make_dataset(cfg).set;
  calm::ScoredPairSet scored = calm::score_pairs(set, calm::exhaustive_pairs(set));
  return {std::move(set), std::move(scored)};
}

void BM_CamLossAndGrad(benchmark::State& state) {
  const Batch b = batch();
  const calm::CamConfig cfg;
  for (auto _ : state) {
    const calm::PairLoss l = calm::cam_loss(b.scored, cfg);
    benchmark::DoNotOptimize(calm::grad_wrt_embeddings(b.set, b.scored, l.dsim));
  }
}
BENCHMARK(BM_CamLossAndGrad);

void BM_ContrastiveLossAndGrad(benchmark::State& state) {
  const Batch b = batch();
  for (auto _ : state) {
    const calm::PairLoss l = calm::contrastive_loss(b.scored, {});
    benchmark::DoNotOptimize(calm::grad_wrt_embeddings(b.set, b.scored, l.dsim));
  }
}
BENCHMARK(BM_ContrastiveLossAndGrad);

void BM_TripletLoss(benchmark::State& state) {
  const Batch b = batch();
  for (auto _ : state) benchmark::DoNotOptimize(calm::triplet_loss(b.scored, 0.2).value);
}
BENCHMARK(BM_TripletLoss);

}  // namespace
