// Copyright Contributors to the nrr Project
// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "nrr/fields.h"

using namespace nrr;

namespace {

FieldConfig desk_config() {
  FieldConfig c;
  c.pos_bands = 6;
  c.dir_bands = 2;
  c.hidden = 64;
  c.layers = 4;
  c.quad_hidden = 48;
  c.quad_layers = 4;
  c.env_code_dim = 16;
  c.pose_code_dim = 32;
  c.deform_code_dim = 32;
  c.bone_count = 6;
  c.frame_count = 90;
  return c;
}

void BM_SdfForward(benchmark::State& state) {
  FieldBundle bundle(desk_config());
  const Eigen::Matrix3Xd pts = 0.4 * Eigen::Matrix3Xd::Random(3, state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(bundle.sdf_plain(pts, Branch::kCoarse));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SdfForward)->Arg(1024)->Arg(8192);

void BM_SdfForwardBackward(benchmark::State& state) {
  FieldBundle bundle(desk_config());
  const Eigen::Matrix3Xd pts = 0.4 * Eigen::Matrix3Xd::Random(3, state.range(0));
  for (auto _ : state) {
    ad::Tape tape;
    ParamBinder binder(tape, true);
    ad::Var loss = tape.sum(bundle.sdf(tape, binder, tape.constant(pts), Branch::kCoarse));
    tape.backward(loss);
    binder.scatter();
    benchmark::DoNotOptimize(tape.grad(loss));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SdfForwardBackward)->Arg(1024)->Arg(8192);

}  // namespace

BENCHMARK_MAIN();
