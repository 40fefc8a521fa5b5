// SPDX-License-Identifier: Apache-2.0
#include <random>

#include <benchmark/benchmark.h>

#include "crpl/prompt.hpp"
#include "crpl/synthetic.hpp"
#include "crpl/training.hpp"
#include "crpl/transport.hpp"

namespace {

crpl::Matrix sphere_rows(std::mt19937_64& rng, Eigen::Index n, Eigen::Index d) {
  std::normal_distribution<double> normal(0.0, 1.0);
  crpl::Matrix m(n, d);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < d; ++c) m(r, c) = normal(rng);
    m.row(r) /= m.row(r).norm();
  }
  return m;
}

void BM_ExactOt(benchmark::State& state) {
  const auto k = state.range(0);
  const auto b = state.range(1);
  std::mt19937_64 rng(11);
  const crpl::Matrix cost = crpl::cost_matrix(sphere_rows(rng, k, 64), sphere_rows(rng, b, 64));
  const crpl::Vector a = crpl::uniform_weights(static_cast<std::size_t>(k));
  const crpl::Vector w = crpl::uniform_weights(static_cast<std::size_t>(b));
  for (auto _ : state) benchmark::DoNotOptimize(crpl::exact_ot(cost, a, w));
}
BENCHMARK(BM_ExactOt)->Args({10, 32})->Args({10, 128})->Args({31, 64});

void BM_Sinkhorn(benchmark::State& state) {
  std::mt19937_64 rng(12);
  const crpl::Matrix cost = crpl::cost_matrix(sphere_rows(rng, 10, 64), sphere_rows(rng, 64, 64));
  const crpl::Vector a = crpl::uniform_weights(10);
  const crpl::Vector w = crpl::uniform_weights(64);
  crpl::SinkhornOptions options;
  options.epsilon = 1.0 / static_cast<double>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(crpl::sinkhorn(cost, a, w, options));
}
BENCHMARK(BM_Sinkhorn)->Arg(10)->Arg(50);

void BM_Encode(benchmark::State& state) {
  const crpl::TextEncoder encoder(64, 64, 64, 3);
  std::mt19937_64 rng(13);
  const crpl::Matrix sequence = sphere_rows(rng, state.range(0), 64);
  for (auto _ : state) benchmark::DoNotOptimize(encoder.encode(sequence));
}
BENCHMARK(BM_Encode)->Arg(5)->Arg(9);

void BM_TrainEpoch(benchmark::State& state) {
  const auto bench = crpl::generate_synthetic(crpl::SyntheticSpec{});
  crpl::Trainer trainer(bench.data.training_data(), crpl::TrainConfig{});
  for (auto _ : state) benchmark::DoNotOptimize(trainer.run_epoch());
}
BENCHMARK(BM_TrainEpoch)->Unit(benchmark::kMillisecond)->Iterations(3);

}  // namespace

BENCHMARK_MAIN();
