#include "smplgan/body_model.hpp"
#include "smplgan/evaluation.hpp"
#include "smplgan/hungarian.hpp"
#include "smplgan/renderer.hpp"
#include "smplgan/rng.hpp"

#include <benchmark/benchmark.h>

using namespace smplgan;

namespace {

SmplParams random_params(Rng& rng) {
  SmplParams p;
  for (auto& v : p.pose) v = 0.2 * rng.normal();
  for (auto& v : p.shape) v = rng.normal();
  p.camera = {0.5, 0.2 * rng.normal(), 0.1 * rng.normal()};
  return p;
}

void BM_SmplForward(benchmark::State& state) {
  const auto assets = make_toy_body(state.range(0), static_cast<int>(state.range(1)), 0);
  Rng rng(1);
  const SmplParams p = random_params(rng);
  for (auto _ : state) benchmark::DoNotOptimize(smpl_forward(p, assets));
}
BENCHMARK(BM_SmplForward)->Args({120, 10})->Args({6890, 24});

void BM_RenderParams(benchmark::State& state) {
  const auto assets = make_toy_body(state.range(0), 24, 0);
  RenderConfig cfg;
  cfg.resolution = static_cast<int>(state.range(1));
  Rng rng(2);
  const SmplParams p = random_params(rng);
  for (auto _ : state) benchmark::DoNotOptimize(render_params(p, assets, cfg));
}
BENCHMARK(BM_RenderParams)->Args({120, 16})->Args({1000, 64})->Args({6890, 224})->Unit(benchmark::kMillisecond);

void BM_RenderGradient(benchmark::State& state) {
  const auto assets = make_toy_body(120, 10, 0);
  RenderConfig cfg;
  cfg.resolution = static_cast<int>(state.range(0));
  cfg.cutoff = 10.0;
  Rng rng(3);
  Matrix rows(16, kParamDim);
  for (Index i = 0; i < rows.rows(); ++i) rows.row(i) = random_params(rng).as_row();
  for (auto _ : state) {
    ad::Graph g;
    ad::Var x = g.input(rows);
    ad::Var maps = render_param_rows(g, x, assets, cfg);
    g.backward(ad::sum(maps));
    benchmark::DoNotOptimize(g.grad(x));
  }
}
BENCHMARK(BM_RenderGradient)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_Assignment(benchmark::State& state) {
  Rng rng(4);
  const auto n = static_cast<Index>(state.range(0));
  Matrix cost(n, n);
  for (Index i = 0; i < cost.size(); ++i) cost.data()[i] = rng.uniform();
  for (auto _ : state) benchmark::DoNotOptimize(solve_assignment(cost));
}
BENCHMARK(BM_Assignment)->Arg(3)->Arg(16)->Arg(128);

void BM_MatchSetsParam(benchmark::State& state) {
  Rng rng(5);
  ShapeSet a, b;
  for (int i = 0; i < state.range(0); ++i) a.push_back(random_params(rng)), b.push_back(random_params(rng));
  for (auto _ : state) benchmark::DoNotOptimize(match_sets(a, b, Space::Param));
}
BENCHMARK(BM_MatchSetsParam)->Arg(3)->Arg(10);

}  // namespace
BENCHMARK_MAIN();
