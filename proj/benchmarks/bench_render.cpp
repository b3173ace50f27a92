// Copyright Contributors to the nrr Project
// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "nrr/renderer.h"

using namespace nrr;

namespace {

struct Rig {
  FieldBundle bundle;
  CameraModel camera;
  RigidTransform pose;

  Rig() : bundle(make_config()) {
    camera.fx = camera.fy = 64.0;
    camera.cx = camera.cy = 32.0;
    camera.width = camera.height = 64;
    pose.translation = Eigen::Vector3d(0, 0, 2.2);
  }

  static FieldConfig make_config() {
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
    c.frame_count = 4;
    return c;
  }

  std::vector<Eigen::Vector2d> pixels(int rays) const {
    std::vector<Eigen::Vector2d> out;
    for (int i = 0; i < rays; ++i)
      out.emplace_back((i * 7) % 64 + 0.5, (i * 13) % 64 + 0.5);
    return out;
  }
};

void BM_CoarseChunk(benchmark::State& state) {
  Rig rig;
  const auto pixels = rig.pixels(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    ad::Tape tape;
    ParamBinder binder(tape, true);
    RaySetup setup = make_ray_setup(rig.camera, rig.pose, 0, pixels, 0.6);
    FrameTransforms tf = build_frame_transforms(tape, binder, rig.bundle, 0, rig.pose);
    BranchRender coarse = render_coarse(tape, binder, rig.bundle, tf, setup, 32, nullptr);
    ad::Var loss = tape.sum(coarse.color);
    tape.backward(loss);
    binder.scatter();
    benchmark::DoNotOptimize(tape.value(loss));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_CoarseChunk)->Arg(32)->Arg(128);

void BM_CoarseFineChunk(benchmark::State& state) {
  Rig rig;
  const auto pixels = rig.pixels(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    ad::Tape tape;
    ParamBinder binder(tape, true);
    RaySetup setup = make_ray_setup(rig.camera, rig.pose, 0, pixels, 0.6);
    FrameTransforms tf = build_frame_transforms(tape, binder, rig.bundle, 0, rig.pose);
    BranchRender coarse = render_coarse(tape, binder, rig.bundle, tf, setup, 32, nullptr);
    BranchRender fine = render_fine(tape, binder, rig.bundle, tf, setup, coarse, 16, nullptr);
    ad::Var loss = tape.sum(tape.add(coarse.color, fine.color));
    tape.backward(loss);
    binder.scatter();
    benchmark::DoNotOptimize(tape.value(loss));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_CoarseFineChunk)->Arg(32)->Arg(128);

}  // namespace

BENCHMARK_MAIN();
