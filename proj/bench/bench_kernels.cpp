/**
 * Copyright 2026 The edgepart Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "edgepart/kernels.hpp"

using namespace edgepart::kernels;

namespace {

std::vector<float> random_vector(size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> dist(-1.f, 1.f);
  std::vector<float> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

template <auto Kernel>
void BM_Fc(benchmark::State& state) {
  const int64_t in = state.range(0), rows = state.range(1);
  auto w = random_vector(static_cast<size_t>(in * rows), 1);
  auto b = random_vector(static_cast<size_t>(rows), 2);
  auto x = random_vector(static_cast<size_t>(in), 3);
  std::vector<float> y(static_cast<size_t>(rows));
  for (auto _ : state) {
    Kernel(w.data(), b.data(), x.data(), in, rows, y.data());
    benchmark::DoNotOptimize(y.data());
  }
  state.counters["FLOPS"] =
      benchmark::Counter(2.0 * static_cast<double>(in * rows), benchmark::Counter::kIsIterationInvariantRate);
}

template <auto Kernel>
void BM_Conv(benchmark::State& state) {
  const int64_t hw = state.range(0), c = state.range(1);
  ConvGeometry g{hw, hw, c, 3, 3, 1, 1, 1, hw, hw, c};
  auto w = random_vector(static_cast<size_t>(c * 9 * c), 1);
  auto b = random_vector(static_cast<size_t>(c), 2);
  auto x = random_vector(static_cast<size_t>(hw * hw * c), 3);
  std::vector<float> y(static_cast<size_t>(hw * hw * c));
  for (auto _ : state) {
    Kernel(g, w.data(), b.data(), x.data(), y.data());
    benchmark::DoNotOptimize(y.data());
  }
  state.counters["FLOPS"] = benchmark::Counter(2.0 * static_cast<double>(hw * hw * c * 9 * c),
                                               benchmark::Counter::kIsIterationInvariantRate);
}

}  // namespace

BENCHMARK(BM_Fc<fc_serial>)->Name("fc/serial")->Args({1024, 512})->Args({4096, 1024})->Args({8192, 2048});
BENCHMARK(BM_Fc<fc_parallel>)->Name("fc/parallel")->Args({1024, 512})->Args({4096, 1024})->Args({8192, 2048});
BENCHMARK(BM_Conv<conv_serial>)->Name("conv/serial")->Args({28, 32})->Args({56, 64});
BENCHMARK(BM_Conv<conv_parallel>)->Name("conv/parallel")->Args({28, 32})->Args({56, 64});

BENCHMARK_MAIN();
