#include <benchmark/benchmark.h>

#include "spectgnn/ops.hpp"
#include "spectgnn/rng.hpp"
#include "spectgnn/spectral.hpp"
#include "spectgnn/synth.hpp"
#include "spectgnn/training.hpp"

using namespace spectgnn;

namespace {

Tensor random(Rng& rng, Shape shape) {
  std::vector<double> v(numel(shape));
  for (double& x : v) x = rng.uniform(-1, 1);
  return Tensor::from_data(std::move(shape), std::move(v));
}

void BM_Eigh(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  Matrix a(n, n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c <= r; ++c) a(r, c) = a(c, r) = rng.uniform(-1, 1);
  for (auto _ : state) benchmark::DoNotOptimize(eigh_sym(a));
}
BENCHMARK(BM_Eigh)->Arg(4)->Arg(8)->Arg(16);

void BM_Conv2d(benchmark::State& state) {
  const auto hw = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  const Tensor x = random(rng, {8, hw, hw}), k = random(rng, {16, 8, 3, 3}), b = random(rng, {16});
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, k, b));
}
BENCHMARK(BM_Conv2d)->Arg(16)->Arg(24)->Arg(48);

PreparedScene scene(const ModelConfig& cfg, std::size_t agents) {
  ScenarioSpec s;
  s.kind = ScenarioKind::crossing;
  s.num_agents = agents;
  s.seed = 3;
  return prepare_scene(synth_generate(s), cfg);
}

void BM_ModelForward(benchmark::State& state) {
  const ModelConfig cfg;
  const SpecTGNN model(cfg, 0);
  const PreparedScene p = scene(cfg, static_cast<std::size_t>(state.range(0)));
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(p).raw);
}
BENCHMARK(BM_ModelForward)->Arg(3)->Arg(6);

void BM_ModelForwardBackward(benchmark::State& state) {
  const ModelConfig cfg;
  SpecTGNN model(cfg, 0);
  const PreparedScene p = scene(cfg, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    model.params().zero_grads();
    loss_total(model.forward(p).track, p.target).backward();
  }
}
BENCHMARK(BM_ModelForwardBackward)->Arg(3)->Arg(6);

}  // namespace

BENCHMARK_MAIN();
