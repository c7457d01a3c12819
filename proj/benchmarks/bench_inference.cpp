#include <benchmark/benchmark.h>

#include "streamcrf/datagen.hpp"
#include "streamcrf/fast_paths.hpp"
#include "streamcrf/inference.hpp"
#include "streamcrf/reference.hpp"

using namespace streamcrf;

namespace {

Potentials make(benchmark::State& state) {
  const Dims dims{1, static_cast<int>(state.range(0)), static_cast<int>(state.range(1)),
                  static_cast<int>(state.range(2))};
  RandomInstanceOptions opts;
  opts.variable_lengths = false;
  return random_instance(1, dims, opts).potentials(CenteringMode::Mean);
}

void set_throughput(benchmark::State& state) {
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_StreamingForward(benchmark::State& state) {
  const auto pot = make(state);
  for (auto _ : state) benchmark::DoNotOptimize(streaming_forward(pot).log_z);
  set_throughput(state);
}

void BM_StreamingForwardBackward(benchmark::State& state) {
  const auto pot = make(state);
  for (auto _ : state) {
    const auto fwd = streaming_forward(pot);
    benchmark::DoNotOptimize(streaming_backward(pot, fwd).gradients.cum.data().data());
  }
  set_throughput(state);
}

void BM_DenseForwardBackward(benchmark::State& state) {
  const auto pot = make(state);
  InferenceOptions o;
  o.backend = Backend::Dense;
  for (auto _ : state) benchmark::DoNotOptimize(posterior(pot, {}, o).log_z);
  set_throughput(state);
}

void BM_StreamingViterbi(benchmark::State& state) {
  const auto pot = make(state);
  for (auto _ : state) benchmark::DoNotOptimize(streaming_viterbi(pot));
  set_throughput(state);
}

void BM_K1Forward(benchmark::State& state) {
  const auto pot = make(state);
  for (auto _ : state) benchmark::DoNotOptimize(k1_forward(pot));
  set_throughput(state);
}

void BM_K2Forward(benchmark::State& state) {
  const auto pot = make(state);
  for (auto _ : state) benchmark::DoNotOptimize(k2_forward(pot));
  set_throughput(state);
}

}  // namespace

BENCHMARK(BM_StreamingForward)->Args({1000, 16, 8})->Args({1000, 50, 32})->Args({10000, 50, 8});
BENCHMARK(BM_StreamingForwardBackward)->Args({1000, 16, 8})->Args({1000, 50, 32});
BENCHMARK(BM_DenseForwardBackward)->Args({1000, 16, 8})->Args({1000, 50, 32});
BENCHMARK(BM_StreamingViterbi)->Args({1000, 50, 32});
BENCHMARK(BM_K1Forward)->Args({10000, 1, 32});
BENCHMARK(BM_K2Forward)->Args({10000, 2, 32});
BENCHMARK_MAIN();
