#include <benchmark/benchmark.h>

#include "compre/ablation.hpp"
#include "compre/synth.hpp"
#include "compre/toy_scorer.hpp"

namespace compre {
namespace {

Corpus bench_corpus(int size, int context_len) {
  SynthSpec spec;
  spec.size = size;
  spec.context_len = context_len;
  spec.vocab_size = 4 * size + 100;
  spec.seed = 1;
  return generate(spec);
}

ToyScorerParams bench_params(const Corpus& corpus, int dim) {
  std::vector<PreparedItem> prepared;
  for (const auto& item : corpus.items) prepared.push_back(prepare_item(item, {}));
  return random_params(build_vocabulary(prepared), dim, 2);
}

void BM_Tokenize(benchmark::State& state) {
  const auto corpus = bench_corpus(1, static_cast<int>(state.range(0)));
  const auto& text = corpus.items.front().context;
  for (auto _ : state) benchmark::DoNotOptimize(tokenize(text));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * text.size()));
}
BENCHMARK(BM_Tokenize)->Arg(30)->Arg(300)->Arg(3000);

void BM_RandomWindowExtract(benchmark::State& state) {
  const auto ctx = tokenize(bench_corpus(1, 400).items.front().context);
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(extract_context(ctx, {30, ExtractMode::random_window, seed++}, "id"));
}
BENCHMARK(BM_RandomWindowExtract);

void BM_ToyScoreBatch(benchmark::State& state) {
  const auto corpus = bench_corpus(64, static_cast<int>(state.range(0)));
  const ToyScorer scorer(bench_params(corpus, 32));
  std::vector<PreparedItem> batch;
  for (const auto& item : corpus.items) batch.push_back(prepare_item(item, {}));
  for (auto _ : state) benchmark::DoNotOptimize(scorer.score(batch));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * batch.size()));
}
BENCHMARK(BM_ToyScoreBatch)->Arg(30)->Arg(300);

void BM_ToyGradient(benchmark::State& state) {
  const auto corpus = bench_corpus(1, 100);
  const auto params = bench_params(corpus, static_cast<int>(state.range(0)));
  const auto encoded = encode_item(params.vocab, prepare_item(corpus.items.front(), {}),
                                   corpus.items.front().answer_index);
  for (auto _ : state) benchmark::DoNotOptimize(analytic_gradient(params, encoded));
}
BENCHMARK(BM_ToyGradient)->Arg(16)->Arg(32)->Arg(64);

void BM_SweepWorkers(benchmark::State& state) {
  const auto corpus = bench_corpus(500, 60);
  const ToyScorer scorer(bench_params(corpus, 32));
  SweepOptions options;
  options.eval.workers = static_cast<int>(state.range(0));
  const auto grid = default_tau_grid();
  for (auto _ : state) benchmark::DoNotOptimize(sweep_tau(scorer, corpus, grid, ExtractMode::beginning, 0, options));
}
BENCHMARK(BM_SweepWorkers)->Arg(1)->Arg(4)->UseRealTime()->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace compre

BENCHMARK_MAIN();
