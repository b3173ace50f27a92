// Copyright Contributors to the nrr Project
// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "nrr/metrics.h"
#include "nrr/rng.h"

using namespace nrr;

namespace {

std::vector<Eigen::Vector3d> cloud(int n, uint64_t seed) {
  RngStream rng(seed);
  std::vector<Eigen::Vector3d> pts(n);
  for (auto& p : pts) p = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
  return pts;
}

void BM_ChamferKdTree(benchmark::State& state) {
  const auto a = cloud(static_cast<int>(state.range(0)), 1);
  const auto b = cloud(static_cast<int>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(chamfer_distance(a, b, false));
}
BENCHMARK(BM_ChamferKdTree)->Arg(500)->Arg(10000);

void BM_ChamferBruteForce(benchmark::State& state) {
  const auto a = cloud(static_cast<int>(state.range(0)), 1);
  const auto b = cloud(static_cast<int>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(chamfer_distance(a, b, true));
}
BENCHMARK(BM_ChamferBruteForce)->Arg(500);

void BM_MarchingCubesSphere(benchmark::State& state) {
  const int res = static_cast<int>(state.range(0));
  GridBounds bounds{Eigen::Vector3d::Constant(-0.8), Eigen::Vector3d::Constant(0.8)};
  const int n = res + 1;
  std::vector<double> values(static_cast<size_t>(n) * n * n);
  size_t idx = 0;
  const double cell = 1.6 / res;
  for (int iz = 0; iz < n; ++iz)
    for (int iy = 0; iy < n; ++iy)
      for (int ix = 0; ix < n; ++ix)
        values[idx++] =
            (bounds.lo + Eigen::Vector3d(ix * cell, iy * cell, iz * cell)).norm() - 0.5;
  for (auto _ : state) benchmark::DoNotOptimize(marching_cubes_grid(values, res, bounds));
}
BENCHMARK(BM_MarchingCubesSphere)->Arg(64)->Arg(128);

}  // namespace

BENCHMARK_MAIN();
