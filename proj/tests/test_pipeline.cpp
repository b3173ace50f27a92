// Copyright Contributors to the nrr Project
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "nrr/evaluate.h"
#include "nrr/renderer.h"
#include "nrr/rng.h"

using namespace nrr;
using ad::Mat;
using ad::Tape;
using ad::Var;

namespace {

FieldConfig small_config(int frames = 3, int bones = 3) {
  FieldConfig c;
  c.pos_bands = 3;
  c.dir_bands = 2;
  c.hidden = 12;
  c.layers = 3;
  c.quad_hidden = 10;
  c.quad_layers = 3;
  c.embed_dim = 16;
  c.env_code_dim = 6;
  c.pose_code_dim = 8;
  c.deform_code_dim = 8;
  c.bone_count = bones;
  c.frame_count = frames;
  c.seed = 13;
  return c;
}

CameraModel simple_camera(int size, double focal) {
  CameraModel cam;
  cam.fx = cam.fy = focal;
  cam.cx = cam.cy = size / 2.0;
  cam.width = cam.height = size;
  return cam;
}

RigidTransform pose_at_depth(double depth) {
  RigidTransform g;
  g.translation = Eigen::Vector3d(0, 0, depth);
  return g;
}

AnalyticFields sphere_fields(double radius, double alpha) {
  AnalyticFields fields;
  fields.alpha = alpha;
  fields.sdf = [radius](Tape& t, Var pts) {
    Var sq = t.colwise_sum(t.square(pts));
    return t.add_scalar(t.sqrt_safe(sq), -radius);
  };
  fields.color = [](Tape& t, Var pts) {
    const int n = static_cast<int>(t.value(pts).cols());
    return t.constant(Mat::Ones(3, n) * 0.5);
  };
  return fields;
}

}  // namespace

TEST_CASE("analytic sphere: silhouette IoU > 0.99 against the exact disk") {
  FieldBundle bundle(small_config());
  const int size = 128;
  const double depth = 2.0, radius = 0.3;
  const double focal = 0.35 * size * depth / radius;
  CameraModel cam = simple_camera(size, focal);
  const RigidTransform pose = pose_at_depth(depth);
  AnalyticFields fields = sphere_fields(radius, 0.0002);

  ImageGray opacity(size, size);
  std::vector<Eigen::Vector2d> pixels;
  std::vector<std::pair<int, int>> coords;
  auto flush = [&]() {
    if (pixels.empty()) return;
    Tape tape;
    ParamBinder binder(tape, false);
    RaySetup setup = make_ray_setup(cam, pose, 0, pixels, 0.6);
    FrameTransforms tf = build_frame_transforms(tape, binder, bundle, 0, pose);
    BranchRender coarse = render_coarse(tape, binder, bundle, tf, setup, 256, nullptr, &fields);
    for (size_t i = 0; i < pixels.size(); ++i)
      opacity.px(coords[i].first, coords[i].second)[0] = tape.value(coarse.opacity)(0, i);
    pixels.clear();
    coords.clear();
  };
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      pixels.emplace_back(x + 0.5, y + 0.5);
      coords.emplace_back(x, y);
      if (pixels.size() == 2048) flush();
    }
  flush();

  // Exact silhouette: the ray through the pixel hits the sphere iff its
  // distance to the center is below the radius.
  ImageGray exact(size, size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const Eigen::Vector3d d = cam.ray_dir(Eigen::Vector2d(x + 0.5, y + 0.5));
      const Eigen::Vector3d center(0, 0, depth);
      const double miss = (center - center.dot(d) * d).norm();
      exact.px(x, y)[0] = miss <= radius ? 1.0 : 0.0;
    }
  CHECK(mask_iou(opacity, exact) > 0.99);
}

TEST_CASE("rays that miss the object composite to near-zero opacity") {
  FieldBundle bundle(small_config());
  CameraModel cam = simple_camera(32, 40.0);
  const RigidTransform pose = pose_at_depth(2.0);
  AnalyticFields fields = sphere_fields(0.2, 0.02);

  Tape tape;
  ParamBinder binder(tape, false);
  // A corner pixel: the ray passes far from the unit-centered sphere.
  RaySetup setup = make_ray_setup(cam, pose, 0, {Eigen::Vector2d(1.0, 1.0)}, 0.6);
  FrameTransforms tf = build_frame_transforms(tape, binder, bundle, 0, pose);
  BranchRender coarse = render_coarse(tape, binder, bundle, tf, setup, 128, nullptr, &fields);
  CHECK(tape.value(coarse.opacity)(0, 0) < 1e-3);
}

TEST_CASE("opaque first sample pins the expected point to its canonical warp") {
  FieldBundle bundle(small_config());
  CameraModel cam = simple_camera(16, 20.0);
  const RigidTransform pose = pose_at_depth(2.0);
  AnalyticFields fields;
  fields.alpha = 0.001;  // sigma*delta ~ 90: the first segment saturates
  fields.sdf = [](Tape& t, Var pts) {
    return t.constant(Mat::Constant(1, static_cast<int>(t.value(pts).cols()), -10.0));
  };
  fields.color = [](Tape& t, Var pts) {
    return t.constant(Mat::Ones(3, static_cast<int>(t.value(pts).cols())));
  };

  Tape tape;
  ParamBinder binder(tape, false);
  RaySetup setup = make_ray_setup(cam, pose, 0, {Eigen::Vector2d(8.0, 8.0)}, 0.6);
  FrameTransforms tf = build_frame_transforms(tape, binder, bundle, 0, pose);
  BranchRender coarse = render_coarse(tape, binder, bundle, tf, setup, 16, nullptr, &fields);
  // With zero pose heads the backward warp is the inverse init pose, so the
  // canonical point is the root-aligned first sample.
  const Eigen::Vector3d expect = pose.inverse().apply(coarse.points_t.col(0));
  CHECK((tape.value(coarse.expected).col(0) - expect).norm() < 1e-6);
  CHECK(tape.value(coarse.opacity)(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("rendered opacity equals the compositing weight sum") {
  FieldConfig cfg = small_config();
  FieldBundle bundle(cfg);
  bundle.init_sphere_sdf(0.3, 300, 3);
  CameraModel cam = simple_camera(8, 10.0);
  const RigidTransform pose = pose_at_depth(2.0);

  Tape tape;
  ParamBinder binder(tape, false);
  std::vector<Eigen::Vector2d> pixels = {{4.5, 4.5}, {2.5, 3.5}};
  RaySetup setup = make_ray_setup(cam, pose, 0, pixels, 0.6);
  FrameTransforms tf = build_frame_transforms(tape, binder, bundle, 0, pose);
  BranchRender coarse = render_coarse(tape, binder, bundle, tf, setup, 24, nullptr);
  const Mat mu = tape.value(coarse.mu);
  const Mat opacity = tape.value(coarse.opacity);
  for (int r = 0; r < 2; ++r)
    CHECK(opacity(0, r) == doctest::Approx(mu.col(r).sum()).epsilon(1e-12));
}

TEST_CASE("zero-initialized quadratic head keeps fine positions at the coarse warp") {
  FieldConfig cfg = small_config();
  FieldBundle bundle(cfg);
  bundle.init_sphere_sdf(0.3, 200, 5);
  CameraModel cam = simple_camera(8, 10.0);
  const RigidTransform pose = pose_at_depth(2.0);

  Tape tape;
  ParamBinder binder(tape, false);
  RaySetup setup = make_ray_setup(cam, pose, 0, {Eigen::Vector2d(4.5, 4.5)}, 0.6);
  FrameTransforms tf = build_frame_transforms(tape, binder, bundle, 0, pose);
  BranchRender coarse = render_coarse(tape, binder, bundle, tf, setup, 8, nullptr);
  BranchRender fine = render_fine(tape, binder, bundle, tf, setup, coarse, 4, nullptr);
  CHECK(fine.samples_per_ray == 12);

  // Identity residual + zero skinning offsets: the fine canonical points are
  // exactly the backward-warped merged samples.
  Var delta = bundle.skin_delta(tape, binder, tape.constant(fine.points_t), 0);
  CHECK(tape.value(delta).cwiseAbs().maxCoeff() == 0.0);
  Var reference = backward_warp_var(tape, tf, tape.constant(fine.points_t));
  CHECK((tape.value(fine.canonical) - tape.value(reference)).cwiseAbs().maxCoeff() < 1e-13);
  for (int h = 1; h < fine.depths.rows(); ++h)
    CHECK(fine.depths(h, 0) >= fine.depths(h - 1, 0));
}

TEST_CASE("prescribed quadratic bend moves fine points by A D(x)") {
  FieldConfig cfg = small_config();
  FieldBundle bundle(cfg);
  // Plant a pure y^2 bend into the quadratic head: final-layer bias rows pick
  // A(0,4) += 0.3, leaving the rest of the identity residual intact.
  ParamBlock* quad = bundle.find_block("net.quad");
  quad->value(quad->value.size() - 27 + 4) = 0.3;  // row r=0, monomial y^2

  const Eigen::Vector3d x_c(0.2, -0.4, 0.1);
  const QuadraticCoeffs coeffs = bundle.quad_coeffs(x_c, 0);
  Eigen::Vector3d expect = x_c;
  expect.x() += 0.3 * x_c.y() * x_c.y();
  CHECK((apply_quadratic(coeffs, x_c) - expect).norm() < 1e-12);
}

TEST_CASE("pixel color gradients match finite differences through the full pipeline") {
  FieldConfig cfg = small_config(2, 2);
  FieldBundle bundle(cfg);
  bundle.init_sphere_sdf(0.3, 250, 9);
  CameraModel cam = simple_camera(8, 9.0);
  const RigidTransform pose = pose_at_depth(1.8);

  // Sample placement is detached by design, so the finite-difference oracle
  // evaluates the map at the frozen merged depths.
  Eigen::MatrixXd frozen_depths;
  auto render_color = [&](bool with_grad, int channel) {
    Tape tape;
    ParamBinder binder(tape, with_grad);
    RaySetup setup = make_ray_setup(cam, pose, 0, {Eigen::Vector2d(4.2, 4.7)}, 0.6);
    FrameTransforms tf = build_frame_transforms(tape, binder, bundle, 0, pose);
    BranchRender coarse = render_coarse(tape, binder, bundle, tf, setup, 6, nullptr);
    BranchRender fine =
        render_fine(tape, binder, bundle, tf, setup, coarse, 3, nullptr,
                    frozen_depths.size() ? &frozen_depths : nullptr);
    if (!frozen_depths.size()) frozen_depths = fine.depths;
    Var value = tape.slice_rows(tape.add(coarse.color, fine.color), channel, 1);
    if (with_grad) {
      for (ParamBlock* block : bundle.blocks()) block->zero_grad();
      tape.backward(value);
      binder.scatter();
    }
    return tape.value(value)(0, 0);
  };

  render_color(false, 1);  // freeze the merged depths first
  render_color(true, 1);
  for (const char* name : {"bones.centers", "net.quad", "code.env", "net.bone", "alpha.log"}) {
    ParamBlock* block = bundle.find_block(name);
    RngStream pick(std::hash<std::string>{}(name));
    for (int trial = 0; trial < 3; ++trial) {
      const Eigen::Index i = pick.below(block->value.size());
      const double analytic = block->grad(i);
      const double h = 1e-5;
      const double kept = block->value(i);
      block->value(i) = kept + h;
      const double fp = render_color(false, 1);
      block->value(i) = kept - h;
      const double fm = render_color(false, 1);
      block->value(i) = kept;
      const double fd = (fp - fm) / (2.0 * h);
      CHECK(analytic == doctest::Approx(fd).epsilon(1e-4).scale(1.0));
    }
  }
}

TEST_CASE("identity deformation renders are identical across frames") {
  FieldConfig cfg = small_config(4);
  FieldBundle bundle(cfg);
  bundle.init_sphere_sdf(0.3, 250, 11);
  CameraModel cam = simple_camera(12, 14.0);
  cam.extrinsics.assign(4, pose_at_depth(2.0));
  RenderParams params;
  params.coarse_samples = 12;
  params.fine_samples = 6;
  params.scene_radius = 0.6;

  FrameRender a = render_frame(bundle, cam, pose_at_depth(2.0), 0, params, true);
  FrameRender b = render_frame(bundle, cam, pose_at_depth(2.0), 3, params, true);
  CHECK(a.color_coarse.data == b.color_coarse.data);
  CHECK(a.color_fine.data == b.color_fine.data);
  CHECK(a.opacity_coarse.data == b.opacity_coarse.data);
}

TEST_CASE("embedding matcher: coordinates-as-embedding reduces to 3D nearest point") {
  // Cache over a coarse sphere mesh with embeddings equal to the vertex
  // coordinates (padded to 16 dims).
  GridBounds bounds{Eigen::Vector3d::Constant(-0.8), Eigen::Vector3d::Constant(0.8)};
  TriMesh mesh = marching_cubes(
      [](const Eigen::Vector3d& p) { return p.norm() - 0.5; }, 16, bounds);
  REQUIRE(!mesh.empty());
  SurfaceCache cache;
  cache.points.resize(3, static_cast<Eigen::Index>(mesh.vertices.size()));
  cache.embeddings = Eigen::MatrixXd::Zero(16, static_cast<Eigen::Index>(mesh.vertices.size()));
  for (size_t i = 0; i < mesh.vertices.size(); ++i) {
    cache.points.col(i) = mesh.vertices[i];
    cache.embeddings.block<3, 1>(0, static_cast<Eigen::Index>(i)) = mesh.vertices[i];
  }
  cache.faces = mesh.faces;
  cache.vertex_faces.resize(mesh.vertices.size());
  for (size_t f = 0; f < mesh.faces.size(); ++f)
    for (int c = 0; c < 3; ++c) cache.vertex_faces[mesh.faces[f][c]].push_back(static_cast<int>(f));

  RngStream rng(19);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd query = Eigen::VectorXd::Zero(16);
    const Eigen::Vector3d q =
        0.6 * Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
    query.head<3>() = q;
    const Eigen::Vector3d matched = match_embedding(cache, query);

    // Brute-force closest point over all triangles.
    double best = std::numeric_limits<double>::infinity();
    for (const auto& f : mesh.faces) {
      const Eigen::Vector3d a = mesh.vertices[f[0]], b = mesh.vertices[f[1]],
                            c = mesh.vertices[f[2]];
      // Clamped barycentric projection onto the triangle.
      const Eigen::Vector3d e0 = b - a, e1 = c - a, d = q - a;
      Eigen::Matrix2d m;
      m << e0.dot(e0), e0.dot(e1), e0.dot(e1), e1.dot(e1);
      Eigen::Vector2d rhs(e0.dot(d), e1.dot(d));
      Eigen::Vector2d uv = (m + 1e-12 * Eigen::Matrix2d::Identity()).ldlt().solve(rhs);
      uv = uv.cwiseMax(0.0);
      if (uv.sum() > 1.0) uv /= uv.sum();
      best = std::min(best, (a + uv.x() * e0 + uv.y() * e1 - q).squaredNorm());
    }
    CHECK((matched - q).squaredNorm() == doctest::Approx(best).epsilon(0.05).scale(0.01));
  }
}

TEST_CASE("expected_surface_and_cse returns both projections") {
  FieldConfig cfg = small_config();
  FieldBundle bundle(cfg);
  bundle.init_sphere_sdf(0.3, 300, 21);
  CameraModel cam = simple_camera(16, 18.0);
  const RigidTransform pose = pose_at_depth(2.0);
  SurfaceCache cache = build_surface_cache(bundle, 16, 0.6);
  REQUIRE(!cache.empty());

  RenderParams params;
  params.coarse_samples = 24;
  CsePixel res = expected_surface_and_cse(bundle, cache, cam, pose, 0,
                                          Eigen::Vector2d(8.0, 8.0), params);
  CHECK(res.ok);
  CHECK(std::isfinite(res.proj_expected.x()));
  CHECK(std::isfinite(res.proj_matched.y()));
  // The matched point sits on the cached surface.
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < cache.points.cols(); ++i)
    best = std::min(best, (cache.points.col(i) - res.matched).norm());
  CHECK(best < 0.1);

  SurfaceCache empty;
  CsePixel skipped = expected_surface_and_cse(bundle, empty, cam, pose, 0,
                                              Eigen::Vector2d(8.0, 8.0), params);
  CHECK(!skipped.ok);  // matched point unavailable, CSE terms skip
}

TEST_CASE("posed mesh at an identity-deformation frame equals the canonical mesh") {
  FieldConfig cfg = small_config();
  FieldBundle bundle(cfg);
  bundle.init_sphere_sdf(0.3, 300, 23);
  GridBounds bounds{Eigen::Vector3d::Constant(-0.6), Eigen::Vector3d::Constant(0.6)};
  TriMesh canonical = marching_cubes_grid(sample_sdf_grid(bundle, Branch::kFine, 16, 0.6), 16,
                                          bounds);
  REQUIRE(!canonical.empty());
  TriMesh posed = pose_mesh(bundle, canonical, 0, RigidTransform::identity(), true);
  double worst = 0.0;
  for (size_t i = 0; i < canonical.vertices.size(); ++i)
    worst = std::max(worst, (posed.vertices[i] - canonical.vertices[i]).norm());
  CHECK(worst < 1e-6);
}
