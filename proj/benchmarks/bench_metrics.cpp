#include <benchmark/benchmark.h>

#include "calm/metrics.hpp"
#include "calm/synth.hpp"

namespace {

calm::EmbeddingSet dataset(std::size_t classes) {
  calm::SynthConfig cfg;
  cfg.classes = classes;
  cfg.samples_per_class = 40;
  cfg.dim = 16;
  cfg.seed = 1;
  return calm::make_dataset(cfg).set;
}

void BM_Evaluate(benchmark::State& state) {
  const calm::EmbeddingSet set = dataset(static_cast<std::size_t>(state.range(0)));
  calm::EvalConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(calm::evaluate(set, cfg).opis.opis);
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(set.size()));
}
BENCHMARK(BM_Evaluate)->Arg(10)->Arg(20)->Arg(50)->Unit(benchmark::kMillisecond);

void BM_RecallAtK(benchmark::State& state) {
  const calm::EmbeddingSet set = dataset(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(calm::recall_at_k(set, 1));
}
BENCHMARK(BM_RecallAtK)->Arg(20)->Arg(50)->Unit(benchmark::kMillisecond);

}  // namespace
