// Overhead of each guardrail at full intensity against the bare prediction.

#include <benchmark/benchmark.h>

#include "raibench/guardrail.hpp"

namespace {

using namespace raibench;

const TrainedModel& shared_model() {
  static const TrainedModel m = [] {
    const Dataset d = generate(1000, 10, DataType::tabular, 2.5, 777);
    return train(Algorithm::knn, d, {}, 777);
  }();
  return m;
}

const Dataset& shared_queries() {
  static const Dataset q = generate(32, 10, DataType::tabular, 2.5, 778);
  return q;
}

void bench_guarded(benchmark::State& state, GuardrailConfig cfg) {
  const TrainedModel& m = shared_model();
  const Dataset& q = shared_queries();
  FairnessWindow window(cfg.fair > 0 ? fairness_window_capacity(cfg.fair) : 1);
  std::size_t i = 0;
  for (auto _ : state) {
    const std::size_t k = i % q.n;
    benchmark::DoNotOptimize(
        guarded_predict(m, q.row(k), q.groups[k], cfg, &window, i).score);
    ++i;
  }
}

}  // namespace

BENCHMARK_CAPTURE(bench_guarded, off, GuardrailConfig{});
BENCHMARK_CAPTURE(bench_guarded, expl, GuardrailConfig{1, 0, 0, 0, 0});
BENCHMARK_CAPTURE(bench_guarded, fair, GuardrailConfig{0, 1, 0, 0, 0});
BENCHMARK_CAPTURE(bench_guarded, interp, GuardrailConfig{0, 0, 1, 0, 0});
BENCHMARK_CAPTURE(bench_guarded, safety, GuardrailConfig{0, 0, 0, 1, 0});
BENCHMARK_CAPTURE(bench_guarded, privacy, GuardrailConfig{0, 0, 0, 0, 1});
BENCHMARK_CAPTURE(bench_guarded, all, GuardrailConfig{1, 1, 1, 1, 1});
