// Per-family single-inference latency across training-set sizes, plus the
// type-dependent preprocessing transforms.

#include <benchmark/benchmark.h>

#include "raibench/classifier.hpp"

namespace {

using namespace raibench;

TrainedModel model_for(Algorithm a, std::size_t n, std::size_t p) {
  const Dataset d = generate(n, p, DataType::tabular, 2.5, 1234);
  return train(a, d, {}, 1234);
}

void bench_predict(benchmark::State& state, Algorithm a) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto p = static_cast<std::size_t>(state.range(1));
  const TrainedModel m = model_for(a, n, p);
  const Dataset q = generate(32, p, DataType::tabular, 2.5, 99);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(predict(m, q.row(i % q.n)).score);
    ++i;
  }
  state.SetItemsProcessed(state.iterations());
}

void args_grid(benchmark::internal::Benchmark* b) {
  for (int n : {100, 1000, 10000}) b->Args({n, 10});
}

}  // namespace

BENCHMARK_CAPTURE(bench_predict, svm, Algorithm::svm)->Apply(args_grid);
BENCHMARK_CAPTURE(bench_predict, knn, Algorithm::knn)->Apply(args_grid);
BENCHMARK_CAPTURE(bench_predict, rf, Algorithm::rf)->Apply(args_grid);
BENCHMARK_CAPTURE(bench_predict, nn, Algorithm::nn)->Apply(args_grid);

namespace {

void bench_preprocess(benchmark::State& state, DataType t) {
  const auto p = static_cast<std::size_t>(state.range(0));
  std::vector<double> raw(p);
  for (std::size_t i = 0; i < p; ++i) raw[i] = 0.01 * double(i);
  for (auto _ : state) {
    benchmark::DoNotOptimize(preprocess(raw, t));
  }
}

}  // namespace

BENCHMARK_CAPTURE(bench_preprocess, tabular, DataType::tabular)->Arg(64)->Arg(1024);
BENCHMARK_CAPTURE(bench_preprocess, text, DataType::text)->Arg(64)->Arg(1024);
BENCHMARK_CAPTURE(bench_preprocess, image, DataType::image)->Arg(64)->Arg(1024);
