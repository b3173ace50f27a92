// Copyright Contributors to the nrr Project
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <sstream>

#include "nrr/fields.h"
#include "nrr/geometry.h"
#include "nrr/rng.h"

using namespace nrr;
using ad::Mat;
using ad::Tape;
using ad::Var;

namespace {

FieldConfig tiny_config(int frames = 4) {
  FieldConfig c;
  c.pos_bands = 3;
  c.dir_bands = 2;
  c.hidden = 16;
  c.layers = 3;
  c.quad_hidden = 12;
  c.quad_layers = 3;
  c.embed_dim = 16;
  c.env_code_dim = 8;
  c.pose_code_dim = 12;
  c.deform_code_dim = 10;
  c.bone_count = 3;
  c.frame_count = frames;
  c.seed = 5;
  return c;
}

}  // namespace

TEST_CASE("Mlp tape evaluation matches the plain path") {
  Mlp net("net.test", {7, 4, 16, 3, false, false}, 9);
  RngStream rng(10);
  Mat input(7, 5);
  for (int j = 0; j < 5; ++j)
    for (int i = 0; i < 7; ++i) input(i, j) = rng.normal();

  Tape tape;
  ParamBinder binder(tape, false);
  const Mat tape_out = tape.value(net.eval(tape, binder, tape.constant(input)));
  const Mat plain_out = net.eval_plain(input);
  CHECK((tape_out - plain_out).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("zero-initialized heads emit exactly zero") {
  Mlp net("net.test", {5, 6, 8, 2, false, true}, 3);
  Mat input = Mat::Constant(5, 3, 0.37);
  CHECK(net.eval_plain(input).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("ParamBinder deduplicates and scatters gradients") {
  Mlp net("net.test", {2, 1, 4, 2, false, false}, 4);
  Tape tape;
  ParamBinder binder(tape, true);
  Var x = tape.constant(Mat::Ones(2, 3));
  Var first = net.eval(tape, binder, x);
  Var second = net.eval(tape, binder, x);  // same leaves, no new bindings
  Var loss = tape.sum(tape.add(first, second));
  net.params().zero_grad();
  tape.backward(loss);
  binder.scatter();
  // Evaluating twice doubles the gradient relative to a single pass.
  Tape tape2;
  ParamBinder binder2(tape2, true);
  Var once = tape2.sum(net.eval(tape2, binder2, tape2.constant(Mat::Ones(2, 3))));
  Eigen::VectorXd grad2x = net.params().grad;
  net.params().zero_grad();
  tape2.backward(once);
  binder2.scatter();
  CHECK((grad2x - 2.0 * net.params().grad).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("root_pose with a zero head composes to the init pose exactly") {
  FieldBundle bundle(tiny_config());
  RigidTransform init = RigidTransform::from_axis_angle(Eigen::Vector3d(0.3, -0.2, 0.5),
                                                        Eigen::Vector3d(1, 2, 3));
  const RigidTransform g = bundle.root_pose(1, init);
  CHECK((g.rotation - init.rotation).cwiseAbs().maxCoeff() == 0.0);
  CHECK((g.translation - init.translation).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(bundle.root_pose(99, init), std::invalid_argument);
}

TEST_CASE("root_pose composition matches homogeneous multiplication") {
  FieldConfig cfg = tiny_config();
  FieldBundle bundle(cfg);
  // Give the root head nonzero output.
  ParamBlock* root = bundle.find_block("net.root");
  RngStream rng(21);
  for (Eigen::Index i = 0; i < root->value.size(); ++i) root->value(i) = 0.1 * rng.normal();

  RigidTransform init = RigidTransform::from_axis_angle(Eigen::Vector3d(-0.1, 0.4, 0.2),
                                                        Eigen::Vector3d(0.5, -0.6, 0.7));
  const RigidTransform g = bundle.root_pose(2, init);
  CHECK(g.orthonormality_residual() < 1e-9);

  // Homogeneous 4x4 oracle: rebuild the delta from the raw head output.
  Tape tape;
  ParamBinder binder(tape, false);
  Var code = binder.bind(*bundle.find_block("code.root"), 2 * cfg.pose_code_dim,
                         cfg.pose_code_dim, 1);
  // The same six numbers the bundle decodes, taken straight from the net.
  Mlp probe("net.probe", {cfg.pose_code_dim, 6, cfg.hidden, cfg.layers, false, true}, 0);
  probe.params().value = root->value;
  const Eigen::VectorXd out = probe.eval_plain(tape.value(code)).col(0);
  const RigidTransform delta = RigidTransform::from_axis_angle(out.head<3>(), out.tail<3>());
  const Eigen::Matrix4d expect = delta.homogeneous() * init.homogeneous();
  CHECK((g.homogeneous() - expect).cwiseAbs().maxCoeff() < 1e-12);

  TransformVar tv = bundle.root_transform(tape, binder, 2, init);
  CHECK((g.rotation - tape.value(tv.rotation)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((g.translation - tape.value(tv.translation).col(0)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("bone_pose zero head and range checks") {
  FieldBundle bundle(tiny_config());
  const RigidTransform j = bundle.bone_pose(0, 2);
  CHECK((j.rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(j.translation.cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(bundle.bone_pose(0, 7), std::invalid_argument);
  CHECK_THROWS_AS(bundle.bone_pose(-1, 0), std::invalid_argument);
}

TEST_CASE("pose outputs stay valid rotations for arbitrary parameters") {
  FieldConfig cfg = tiny_config();
  FieldBundle bundle(cfg);
  RngStream rng(31);
  for (ParamBlock* block : {bundle.find_block("net.root"), bundle.find_block("net.bone"),
                            bundle.find_block("code.root"), bundle.find_block("code.bone")})
    for (Eigen::Index i = 0; i < block->value.size(); ++i) block->value(i) = 2.0 * rng.normal();

  for (int t = 0; t < cfg.frame_count; ++t) {
    CHECK(bundle.root_pose(t, RigidTransform::identity()).orthonormality_residual() < 1e-6);
    for (int b = 0; b < cfg.bone_count; ++b)
      CHECK(bundle.bone_pose(t, b).orthonormality_residual() < 1e-6);
  }
}

TEST_CASE("quad_coeffs zero head is the identity deformation") {
  FieldBundle bundle(tiny_config());
  const Eigen::Vector3d x(0.2, -0.3, 0.1);
  const QuadraticCoeffs a = bundle.quad_coeffs(x, 1);
  CHECK((a - quadratic_identity()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((apply_quadratic(a, x) - x).norm() == 0.0);
  const QuadraticCoeffs again = bundle.quad_coeffs(x, 1);
  CHECK((a - again).cwiseAbs().maxCoeff() == 0.0);  // deterministic
}

TEST_CASE("canonical color stays in the unit cube") {
  FieldBundle bundle(tiny_config());
  RngStream rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Vector3d x(rng.normal(), rng.normal(), rng.normal());
    Eigen::Vector3d dir(rng.normal(), rng.normal(), rng.normal());
    dir.normalize();
    Eigen::VectorXd env(8);
    for (int i = 0; i < 8; ++i) env(i) = rng.normal();
    for (Branch which : {Branch::kCoarse, Branch::kFine}) {
      const Eigen::Vector3d c = bundle.canonical_color(x, dir, env, which);
      CHECK(c.minCoeff() >= 0.0);
      CHECK(c.maxCoeff() <= 1.0);
    }
  }
}

TEST_CASE("canonical embedding: dimension, determinism, local smoothness") {
  FieldBundle bundle(tiny_config());
  const Eigen::Vector3d x(0.1, 0.2, -0.3);
  const Eigen::VectorXd e1 = bundle.canonical_embedding(x);
  CHECK(e1.size() == 16);
  CHECK((e1 - bundle.canonical_embedding(x)).cwiseAbs().maxCoeff() == 0.0);
  const Eigen::VectorXd e2 = bundle.canonical_embedding(x + Eigen::Vector3d(1e-6, 0, 0));
  CHECK((e1 - e2).norm() < 1e-3);
}

TEST_CASE("sphere pre-fit brings the SDF close to the analytic sphere") {
  // The workstation-scale canonical network; smaller nets plateau above the
  // bound.
  FieldConfig cfg = tiny_config();
  cfg.hidden = 64;
  cfg.layers = 4;
  cfg.pos_bands = 6;
  FieldBundle bundle(cfg);
  bundle.init_sphere_sdf(0.3, 4000, 7);
  RngStream rng(55);
  double worst = 0.0;
  for (int trial = 0; trial < 300; ++trial) {
    const Eigen::Vector3d x(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5),
                            rng.uniform(-0.5, 0.5));
    const double expect = x.norm() - 0.3;
    for (Branch which : {Branch::kCoarse, Branch::kFine})
      worst = std::max(worst, std::abs(bundle.canonical_sdf(x, which) - expect));
  }
  CHECK(worst < 0.05);
}

TEST_CASE("bundle save/load round trip is bit exact") {
  FieldBundle a(tiny_config());
  RngStream rng(61);
  for (ParamBlock* block : a.blocks()) {
    for (Eigen::Index i = 0; i < block->value.size(); ++i) block->value(i) = rng.normal();
    block->adam_m.setConstant(0.25);
    block->adam_updates = 7;
  }
  std::stringstream buffer;
  a.save(buffer);

  FieldBundle b(tiny_config());
  b.load(buffer);
  for (size_t i = 0; i < a.blocks().size(); ++i) {
    CHECK(a.blocks()[i]->value == b.blocks()[i]->value);
    CHECK(a.blocks()[i]->adam_m == b.blocks()[i]->adam_m);
    CHECK(a.blocks()[i]->adam_updates == b.blocks()[i]->adam_updates);
  }
}

TEST_CASE("bone accessors round trip through set_bones") {
  FieldBundle bundle(tiny_config());
  BoneSet bones = bundle.bones();
  bones.centers.col(0) = Eigen::Vector3d(0.3, 0.1, -0.2);
  bones.orientations[1] = rodrigues(Eigen::Vector3d(0.4, -0.3, 0.8));
  bones.scales.col(2) = Eigen::Vector3d(11.0, 22.0, 33.0);
  bundle.set_bones(bones);
  const BoneSet got = bundle.bones();
  CHECK((got.centers - bones.centers).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((got.orientations[1] - bones.orientations[1]).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((got.scales - bones.scales).cwiseAbs().maxCoeff() < 1e-9);
  // Precision stays symmetric positive definite.
  for (int b = 0; b < got.count(); ++b) {
    const Eigen::Matrix3d q = got.precision(b);
    CHECK((q - q.transpose()).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(Eigen::LLT<Eigen::Matrix3d>(q).info() == Eigen::Success);
  }
}
