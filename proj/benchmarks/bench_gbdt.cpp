// Copyright 2026 The popcast Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "popcast/gbdt.hpp"
#include "popcast/rng.hpp"

namespace {

using namespace popcast;

struct Data {
  FeatureMatrix X;
  std::vector<double> y;
};

Data make_data(std::size_t n, std::size_t p) {
  std::vector<std::string> names;
  for (std::size_t f = 0; f < p; ++f) names.push_back("f" + std::to_string(f));
  Data d{FeatureMatrix(names, n), {}};
  Rng rng(1);
  for (std::size_t i = 0; i < n; ++i) {
    d.X.row_ids[i] = "r" + std::to_string(i);
    for (std::size_t f = 0; f < p; ++f) d.X.at(i, f) = rng.uniform(-1.0, 1.0);
    d.y.push_back(3.0 * d.X.at(i, 0) - 2.0 * d.X.at(i, 1) + 0.1 * rng.normal());
  }
  return d;
}

void BM_FitGbdt(benchmark::State& state) {
  const auto d = make_data(static_cast<std::size_t>(state.range(0)), 20);
  GbdtParams params;
  params.n_rounds = 50;
  params.max_depth = 4;
  for (auto _ : state) benchmark::DoNotOptimize(fit_gbdt(d.X, d.y, params));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FitGbdt)->Arg(500)->Arg(2000)->Arg(8000)->Unit(benchmark::kMillisecond);

void BM_PredictGbdt(benchmark::State& state) {
  const auto d = make_data(static_cast<std::size_t>(state.range(0)), 20);
  GbdtParams params;
  params.n_rounds = 100;
  const auto model = fit_gbdt(d.X, d.y, params);
  for (auto _ : state) benchmark::DoNotOptimize(predict_gbdt(model, d.X));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_PredictGbdt)->Arg(2000)->Arg(20000);

}  // namespace

BENCHMARK_MAIN();
