// Copyright Contributors to the nrr Project
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "nrr/losses.h"
#include "nrr/renderer.h"
#include "nrr/rng.h"

using namespace nrr;
using ad::Mat;
using ad::Tape;
using ad::Var;

TEST_CASE("photometric fixed point and hand-computed l1") {
  Eigen::Matrix3Xd rendered(3, 2), observed(3, 2);
  rendered << 0.2, 0.6, 0.4, 0.1, 0.9, 0.3;
  observed = rendered;
  CHECK(photometric_loss(rendered, observed) == 0.0);

  Eigen::Matrix3Xd one_red(3, 1), black(3, 1);
  one_red << 1, 0, 0;
  black.setZero();
  CHECK(photometric_loss(one_red, black) == doctest::Approx(1.0));

  Tape tape;
  Var r = tape.constant(one_red);
  CHECK(tape.value(photometric_loss(tape, r, black))(0, 0) == doctest::Approx(1.0));
  CHECK_THROWS_AS(photometric_loss(rendered, one_red), std::invalid_argument);
}

TEST_CASE("silhouette fixed point and unit error") {
  Eigen::VectorXd pred(3), target(3);
  pred << 0.2, 0.8, 0.5;
  target = pred;
  CHECK(silhouette_loss(pred, target) == 0.0);
  Eigen::VectorXd one(1), zero(1);
  one << 1.0;
  zero << 0.0;
  CHECK(silhouette_loss(one, zero) == doctest::Approx(1.0));
}

TEST_CASE("camera smoothness: static, translation, video boundary") {
  std::vector<RigidTransform> extr(3);
  std::vector<int> video = {0, 0, 0};
  CHECK(camera_smoothness(extr, video) == 0.0);

  extr[1].translation = Eigen::Vector3d(1, 0, 0);
  extr[2].translation = Eigen::Vector3d(1, 0, 0);
  CHECK(camera_smoothness(extr, video) == doctest::Approx(1.0));  // only 0->1 differs

  std::vector<int> two_videos = {0, 1, 1};
  CHECK(camera_smoothness(extr, two_videos) == doctest::Approx(0.0));  // break at the boundary
}

TEST_CASE("total loss arithmetic from the documented weights") {
  LossWeights w;  // defaults are the documented values
  LossReport report;
  for (const std::string& term : loss_term_order()) report.parts[term] = 1.0;
  report.parts["q_temporal"] = 0.0;  // combined quadratic part stays at 1
  CHECK(total_loss(report, w) == doctest::Approx(1005.36));

  LossReport zeros;
  for (const std::string& term : loss_term_order()) zeros.parts[term] = 0.0;
  CHECK(total_loss(zeros, w) == 0.0);
}

TEST_CASE("total loss is linear in each part with its stated coefficient") {
  LossWeights w;
  RngStream rng(3);
  LossReport base;
  for (const std::string& term : loss_term_order()) base.parts[term] = rng.uniform();
  const double t0 = total_loss(base, w);
  const std::map<std::string, double> expect = {
      {"pho_c", w.pho_c},   {"pho_f", w.pho_f},     {"sil_c", w.sil_c},
      {"sil_f", w.sil_f},   {"of", w.flow},         {"cse3d", w.reg},
      {"cse2d_c", w.reg},   {"cse2d_f", w.reg},     {"cyc2d", 1.0},
      {"cyc3d", 1.0},       {"cam", 1.0},           {"q_spatial", w.quad},
      {"q_temporal", w.quad * w.quad_temporal}};
  for (const auto& [term, coeff] : expect) {
    LossReport bumped = base;
    bumped.parts[term] += 1.0;
    CHECK(total_loss(bumped, w) - t0 == doctest::Approx(coeff).epsilon(1e-9));
  }
}

TEST_CASE("non-finite parts raise a training fault naming the term") {
  LossWeights w;
  LossReport report;
  report.parts["pho_c"] = std::numeric_limits<double>::quiet_NaN();
  try {
    total_loss(report, w);
    FAIL("expected TrainingFault");
  } catch (const TrainingFault& fault) {
    CHECK(fault.term == "pho_c");
  }
}

TEST_CASE("flow loss pinhole oracle: root translation at unit depth") {
  // A point at depth 1 under a pure root translation parallel to the image
  // plane moves by focal * translation in pixels.
  Tape tape;
  const double focal = 50.0, dx = 0.02;
  RaySetup setup;
  setup.fx = setup.fy = focal;
  setup.cx = setup.cy = 0.0;

  Eigen::Matrix3Xd point(3, 1);
  point.col(0) = Eigen::Vector3d(0, 0, 1);
  Var moved = tape.add_colvec(tape.constant(point),
                              tape.constant(Eigen::Vector3d(dx, 0, 0)));
  Var projected = project_var(tape, setup, moved);
  CHECK(tape.value(projected)(0, 0) == doctest::Approx(focal * dx));
  CHECK(tape.value(projected)(1, 0) == doctest::Approx(0.0));

  // Static scene, zero flow: projecting the unmoved point hits the target.
  Mat target(2, 1);
  target.setZero();
  Var loss = flow_loss(tape, project_var(tape, setup, tape.constant(point)), target);
  CHECK(tape.value(loss)(0, 0) == doctest::Approx(0.0));

  // The measured-flow target for the moved point is exactly focal * dx.
  Mat moved_target(2, 1);
  moved_target << focal * dx, 0.0;
  Var zero_residual = flow_loss(tape, projected, moved_target);
  CHECK(tape.value(zero_residual)(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("cse losses: fixed point and unit-offset projection arithmetic") {
  Tape tape;
  Eigen::Matrix3Xd expected(3, 1), matched(3, 1);
  expected.col(0) = Eigen::Vector3d(0, 0, 1);
  matched.col(0) = Eigen::Vector3d(1, 0, 1);

  CHECK(tape.value(cse3d_loss(tape, tape.constant(expected), expected))(0, 0) == 0.0);
  CHECK(tape.value(cse3d_loss(tape, tape.constant(expected), matched))(0, 0) ==
        doctest::Approx(1.0));

  RaySetup setup;  // focal 1, principal point 0: identity camera
  Var proj_e = project_var(tape, setup, tape.constant(expected));
  Var proj_m = project_var(tape, setup, tape.constant(matched));
  CHECK(tape.value(cse2d_loss(tape, proj_e, proj_e))(0, 0) == 0.0);
  CHECK(tape.value(cse2d_loss(tape, proj_e, proj_m))(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("cycle losses: identity warps and the single-bone exactness") {
  FieldConfig cfg;
  cfg.pos_bands = 3;
  cfg.dir_bands = 2;
  cfg.hidden = 8;
  cfg.layers = 2;
  cfg.quad_hidden = 8;
  cfg.quad_layers = 2;
  cfg.env_code_dim = 4;
  cfg.pose_code_dim = 6;
  cfg.deform_code_dim = 6;
  cfg.bone_count = 1;
  cfg.frame_count = 2;
  FieldBundle bundle(cfg);

  Tape tape;
  ParamBinder binder(tape, false);
  FrameTransforms tf =
      build_frame_transforms(tape, binder, bundle, 0, RigidTransform::identity());

  RngStream rng(7);
  Eigen::Matrix3Xd pts(3, 6);
  for (int i = 0; i < 6; ++i)
    pts.col(i) = 0.3 * Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());

  // Zero-initialized pose heads: both warps are the identity.
  Var canonical = backward_warp_var(tape, tf, tape.constant(pts));
  CHECK((tape.value(canonical) - pts).cwiseAbs().maxCoeff() < 1e-14);
  Var forward = forward_warp_var(tape, tf, canonical);
  Var mu = tape.constant(Mat::Constant(1, 6, 0.1));
  CHECK(tape.value(cycle3d_loss(tape, forward, pts, mu))(0, 0) == doctest::Approx(0.0));

  // Random single-bone transforms still invert exactly.
  ParamBlock* root = bundle.find_block("net.root");
  ParamBlock* bone = bundle.find_block("net.bone");
  for (ParamBlock* block : {root, bone})
    for (Eigen::Index i = 0; i < block->value.size(); ++i) block->value(i) = 0.2 * rng.normal();
  Tape tape2;
  ParamBinder binder2(tape2, false);
  FrameTransforms tf2 =
      build_frame_transforms(tape2, binder2, bundle, 0, RigidTransform::identity());
  Var canonical2 = backward_warp_var(tape2, tf2, tape2.constant(pts));
  Var forward2 = forward_warp_var(tape2, tf2, canonical2);
  Var mu2 = tape2.constant(Mat::Constant(1, 6, 0.15));
  CHECK(tape2.value(cycle3d_loss(tape2, forward2, pts, mu2))(0, 0) ==
        doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("cycle3d equals an independently evaluated weighted round trip") {
  FieldConfig cfg;
  cfg.pos_bands = 2;
  cfg.dir_bands = 2;
  cfg.hidden = 8;
  cfg.layers = 2;
  cfg.quad_hidden = 8;
  cfg.quad_layers = 2;
  cfg.env_code_dim = 4;
  cfg.pose_code_dim = 6;
  cfg.deform_code_dim = 6;
  cfg.bone_count = 3;
  cfg.frame_count = 2;
  cfg.seed = 17;
  FieldBundle bundle(cfg);
  RngStream rng(23);
  for (ParamBlock* block : {bundle.find_block("net.root"), bundle.find_block("net.bone")})
    for (Eigen::Index i = 0; i < block->value.size(); ++i) block->value(i) = 0.3 * rng.normal();

  Eigen::Matrix3Xd pts(3, 5);
  for (int i = 0; i < 5; ++i)
    pts.col(i) = 0.4 * Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
  Mat mu(1, 5);
  for (int i = 0; i < 5; ++i) mu(0, i) = rng.uniform(0.0, 0.3);

  Tape tape;
  ParamBinder binder(tape, false);
  FrameTransforms tf =
      build_frame_transforms(tape, binder, bundle, 1, RigidTransform::identity());
  Var canonical = backward_warp_var(tape, tf, tape.constant(pts));
  Var forward = forward_warp_var(tape, tf, canonical);
  const double got =
      tape.value(cycle3d_loss(tape, forward, pts, tape.constant(mu)))(0, 0);

  // Plain-route oracle through the deformation module.
  const RigidTransform root = bundle.root_pose(1, RigidTransform::identity());
  std::vector<RigidTransform> bones_tf(3);
  for (int b = 0; b < 3; ++b) bones_tf[b] = bundle.bone_pose(1, b);
  const BoneSet bones = bundle.bones();
  const BoneSet posed = pose_bones(bones, root, bones_tf);
  double expect = 0.0;
  for (int i = 0; i < 5; ++i) {
    const Eigen::Vector3d x = pts.col(i);
    const Eigen::Vector3d x_c = warp_backward(x, root, bones_tf, skinning_weights(x, posed));
    const Eigen::Vector3d x_t = warp_forward(x_c, root, bones_tf, skinning_weights(x_c, bones));
    expect += mu(0, i) * (x_t - x).squaredNorm();
  }
  CHECK(got == doctest::Approx(expect).epsilon(1e-10));
}

TEST_CASE("quad smoothness: constant fields vanish, linear fields match the half-normal mean") {
  // Constant coefficient field: exact zero including the sqrt subgradient.
  CoeffField constant_field = [](Tape& t, Var pts, int) {
    return t.matmul(t.constant(Mat::Ones(27, 1)),
                    t.constant(Mat::Ones(1, static_cast<int>(t.value(pts).cols()))));
  };
  Eigen::Matrix3Xd pts = Eigen::Matrix3Xd::Random(3, 40);
  std::vector<uint64_t> ids(40);
  for (int i = 0; i < 40; ++i) ids[i] = i;
  Tape tape;
  QuadSmoothnessResult zero =
      quad_smoothness_loss(tape, constant_field, pts, 0, 1, 6, 0.01, 1, 0, ids);
  CHECK(tape.value(zero.spatial)(0, 0) == 0.0);
  CHECK(tape.value(zero.temporal)(0, 0) == 0.0);

  // Linear field A(x) = x_1 E: the expected spatial term is
  // N*K*||E||_F*sqrt(2*eps/pi); check within 3 Monte Carlo standard errors.
  Mat e_flat(27, 1);
  RngStream rng(5);
  for (int i = 0; i < 27; ++i) e_flat(i, 0) = rng.normal();
  const double e_norm = e_flat.norm();
  CoeffField linear_field = [&](Tape& t, Var p, int) {
    return t.matmul(t.constant(e_flat), t.slice_rows(p, 0, 1));
  };
  const int n = 400, k = 6;
  const double eps = 0.01;
  Eigen::Matrix3Xd many = Eigen::Matrix3Xd::Random(3, n);
  std::vector<uint64_t> many_ids(n);
  for (int i = 0; i < n; ++i) many_ids[i] = 1000 + i;
  Tape tape2;
  QuadSmoothnessResult lin =
      quad_smoothness_loss(tape2, linear_field, many, 0, -1, k, eps, 2, 5, many_ids);
  const double got = tape2.value(lin.spatial)(0, 0);
  const double mean_term = e_norm * std::sqrt(2.0 * eps / M_PI);
  const double expect = n * k * mean_term;
  const double var_term = e_norm * e_norm * eps * (1.0 - 2.0 / M_PI);
  const double se = std::sqrt(n * k * var_term);
  CHECK(std::abs(got - expect) < 3.0 * se);

  CHECK_THROWS_AS(quad_smoothness_loss(tape2, linear_field, many, 0, -1, 0, eps, 2, 5, many_ids),
                  std::invalid_argument);
}

TEST_CASE("quad smoothness is reproducible under a fixed seed") {
  CoeffField field = [](Tape& t, Var p, int) {
    return t.matmul(t.constant(Mat::Ones(27, 1)), t.slice_rows(p, 1, 1));
  };
  Eigen::Matrix3Xd pts = Eigen::Matrix3Xd::Random(3, 10);
  std::vector<uint64_t> ids(10);
  for (int i = 0; i < 10; ++i) ids[i] = 50 + i;
  Tape t1, t2;
  const double a = t1.value(quad_smoothness_loss(t1, field, pts, 0, -1, 4, 0.02, 9, 3, ids).spatial)(0, 0);
  const double b = t2.value(quad_smoothness_loss(t2, field, pts, 0, -1, 4, 0.02, 9, 3, ids).spatial)(0, 0);
  CHECK(a == b);
}
