#include <benchmark/benchmark.h>

#include "calm/pairs.hpp"
#include "calm/synth.hpp"

namespace {

void BM_EvaluationPairs(benchmark::State& state) {
  calm::SynthConfig cfg;
  cfg.classes = static_cast<std::size_t>(state.range(0));
  cfg.samples_per_class = 40;
  cfg.dim = 16;
  const calm::EmbeddingSet set = calm::make_dataset(cfg).set;
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(calm::evaluation_pairs(set, 10, seed++).size());
}
BENCHMARK(BM_EvaluationPairs)->Arg(20)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_ScorePairs(benchmark::State& state) {
  calm::SynthConfig cfg;
  cfg.classes = 20;
  cfg.samples_per_class = 40;
  cfg.dim = 16;
  const calm::EmbeddingSet set = calm::make_dataset(cfg).set;
  const calm::PairList pairs = calm::evaluation_pairs(set, 10, 0);
  for (auto _ : state) benchmark::DoNotOptimize(calm::score_pairs(set, pairs).size());
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(pairs.size()));
}
BENCHMARK(BM_ScorePairs);

}  // namespace
