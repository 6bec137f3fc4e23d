// Copyright 2026 The popcast Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "popcast/fusion.hpp"
#include "popcast/rng.hpp"

namespace {

using namespace popcast;

// Six branches at the production embedding widths.
FusionNet full_net() {
  std::vector<BranchSpec> specs;
  for (int id = 1; id <= 6; ++id) specs.push_back(make_branch_spec(id, 768));
  return build_fusion_net(specs, {512, 128, 32, 1}, 1);
}

Batch random_batch(const FusionNet& net, std::size_t rows) {
  Rng rng(2);
  Batch b;
  for (const auto& br : net.branches()) {
    Matrix m(rows, br.spec.input_dim);
    for (auto& v : m.data) v = rng.normal();
    b[br.spec.source_id] = std::move(m);
  }
  return b;
}

void BM_FusionForward(benchmark::State& state) {
  const auto net = full_net();
  const auto batch = random_batch(net, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(batch, Mode::Eval));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FusionForward)->Arg(1)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_FusionTrainStep(benchmark::State& state) {
  auto net = full_net();
  const auto rows = static_cast<std::size_t>(state.range(0));
  const auto batch = random_batch(net, rows);
  const std::vector<double> y(rows, 1.0);
  AdamOptimizer adam(net);
  ForwardCache cache;
  for (auto _ : state) {
    const auto pred = net.forward(batch, Mode::Train, nullptr, &cache);
    auto grads = net.zero_gradients();
    net.backward(cache, mse_loss_grad(pred, y), grads);
    adam.step(net, grads);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FusionTrainStep)->Arg(32)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
