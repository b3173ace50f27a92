// Copyright Contributors to the nrr Project
// SPDX-License-Identifier: Apache-2.0
#include "nrr/renderer.h"

#include <algorithm>
#include <cmath>

namespace nrr {

using ad::Tape;
using ad::Var;

RaySetup make_ray_setup(const CameraModel& camera, const RigidTransform& init_pose, int frame,
                        const std::vector<Eigen::Vector2d>& pixels, double scene_radius) {
  RaySetup s;
  s.frame = frame;
  s.init_pose = init_pose;
  s.pixels = pixels;
  s.fx = camera.fx;
  s.fy = camera.fy;
  s.cx = camera.cx;
  s.cy = camera.cy;
  s.dirs.resize(3, static_cast<Eigen::Index>(pixels.size()));
  for (size_t i = 0; i < pixels.size(); ++i) s.dirs.col(i) = camera.ray_dir(pixels[i]);
  const double depth = init_pose.translation.norm();
  s.near = std::max(0.02, depth - 1.2 * scene_radius);
  s.far = depth + 1.2 * scene_radius;
  return s;
}

FrameTransforms build_frame_transforms(Tape& tape, ParamBinder& binder, FieldBundle& bundle,
                                       int frame, const RigidTransform& init_pose) {
  FrameTransforms tf;
  tf.root = bundle.root_transform(tape, binder, frame, init_pose);
  tf.bones = bundle.bone_transforms(tape, binder, frame);
  tf.geometry = bundle.bone_vars(tape, binder);
  return tf;
}

namespace {

// B x N stack of per-bone Mahalanobis distances against (center, precision)
// pairs already on the tape.
Var mahalanobis_stack(Tape& t, Var points, const std::vector<Var>& centers,
                      const std::vector<Var>& precisions) {
  std::vector<Var> rows;
  rows.reserve(centers.size());
  for (size_t b = 0; b < centers.size(); ++b) {
    Var v = t.add_colvec(points, t.neg(centers[b]));
    rows.push_back(t.colwise_sum(t.mul(v, t.matmul(precisions[b], v))));
  }
  return t.concat_rows(rows);
}

Var skin_softmax(Tape& t, Var distances, Var delta) {
  Var logits = delta.valid() ? t.add(distances, delta) : distances;
  return t.softmax_cols(t.neg(logits));
}

}  // namespace

Var backward_warp_var(Tape& t, const FrameTransforms& tf, Var points_t, Var delta) {
  const int b_count = static_cast<int>(tf.bones.size());
  Var rg_t = t.transpose(tf.root.rotation);
  Var y = t.add_colvec(t.matmul(rg_t, points_t), t.neg(t.matmul(rg_t, tf.root.translation)));

  // Weights at the root-aligned points against bones posed by J_b:
  // center' = R_b e_b + t_b, Q' = R_b Q_b R_b^T.
  std::vector<Var> centers, precisions;
  for (int b = 0; b < b_count; ++b) {
    centers.push_back(
        t.add(t.matmul(tf.bones[b].rotation, tf.geometry.centers[b]), tf.bones[b].translation));
    precisions.push_back(t.matmul(t.matmul(tf.bones[b].rotation, tf.geometry.precisions[b]),
                                  t.transpose(tf.bones[b].rotation)));
  }
  Var weights = skin_softmax(t, mahalanobis_stack(t, y, centers, precisions), delta);

  Var out;
  for (int b = 0; b < b_count; ++b) {
    Var rb_t = t.transpose(tf.bones[b].rotation);
    Var z = t.add_colvec(t.matmul(rb_t, y), t.neg(t.matmul(rb_t, tf.bones[b].translation)));
    Var term = t.mul_rowvec(z, t.slice_rows(weights, b, 1));
    out = out.valid() ? t.add(out, term) : term;
  }
  return out;
}

Var forward_warp_var(Tape& t, const FrameTransforms& tf, Var points_c, Var delta) {
  const int b_count = static_cast<int>(tf.bones.size());
  Var weights = skin_softmax(
      t, mahalanobis_stack(t, points_c, tf.geometry.centers, tf.geometry.precisions), delta);
  Var blended;
  for (int b = 0; b < b_count; ++b) {
    Var moved = t.add_colvec(t.matmul(tf.bones[b].rotation, points_c), tf.bones[b].translation);
    Var term = t.mul_rowvec(moved, t.slice_rows(weights, b, 1));
    blended = blended.valid() ? t.add(blended, term) : term;
  }
  return t.add_colvec(t.matmul(tf.root.rotation, blended), tf.root.translation);
}

Var project_var(Tape& t, const RaySetup& setup, Var points_cam) {
  Var x = t.slice_rows(points_cam, 0, 1);
  Var y = t.slice_rows(points_cam, 1, 1);
  Var z = t.slice_rows(points_cam, 2, 1);
  Var u = t.add_scalar(t.scale(t.div(x, z), setup.fx), setup.cx);
  Var v = t.add_scalar(t.scale(t.div(y, z), setup.fy), setup.cy);
  return t.concat_rows({u, v});
}

Var extend_coords_var(Tape& t, Var points) {
  Var x = t.slice_rows(points, 0, 1);
  Var y = t.slice_rows(points, 1, 1);
  Var z = t.slice_rows(points, 2, 1);
  return t.concat_rows({x, y, z, t.mul(x, x), t.mul(y, y), t.mul(z, z), t.mul(x, y), t.mul(y, z),
                        t.mul(z, x)});
}

namespace {

struct SampledRays {
  Eigen::MatrixXd depths;     // H x R
  Eigen::MatrixXd intervals;  // H x R
  Eigen::Matrix3Xd points;    // 3 x (R*H)
};

SampledRays sample_rays_uniform(const RaySetup& setup, int h_count, RngStream* jitter) {
  const int rays = static_cast<int>(setup.pixels.size());
  SampledRays out;
  out.depths.resize(h_count, rays);
  out.intervals.resize(h_count, rays);
  out.points.resize(3, static_cast<Eigen::Index>(rays) * h_count);
  for (int r = 0; r < rays; ++r) {
    Ray ray{Eigen::Vector3d::Zero(), setup.dirs.col(r), setup.near, setup.far};
    RaySamples s = sample_uniform(ray, h_count, jitter);
    out.depths.col(r) = s.depths;
    out.intervals.col(r) = s.intervals;
    out.points.middleCols(static_cast<Eigen::Index>(r) * h_count, h_count) = s.points;
  }
  return out;
}

// Composite a branch given densities/colors/canonical points on the tape.
void composite_branch(Tape& t, BranchRender* br, Var sigma_row, Var colors, Var canonical,
                      int h_count, int rays) {
  Var sigma = t.reshape(sigma_row, h_count, rays);
  Var seg = t.mul(sigma, t.constant(br->intervals));
  Var transmittance = t.exp(t.neg(t.cumsum_cols_exclusive(seg)));
  Var absorb = t.sub(t.constant(ad::Mat::Ones(h_count, rays)), t.exp(t.neg(seg)));
  br->mu = t.mul(transmittance, absorb);
  Var mu_flat = t.reshape(br->mu, 1, h_count * rays);
  br->color = t.sum_col_blocks(t.mul_rowvec(colors, mu_flat), h_count);
  br->opacity = t.colwise_sum(br->mu);
  br->expected = t.sum_col_blocks(t.mul_rowvec(canonical, mu_flat), h_count);
  br->canonical = canonical;
  br->samples_per_ray = h_count;
}

Eigen::Matrix3Xd repeat_dirs(const Eigen::Matrix3Xd& dirs, int h_count) {
  Eigen::Matrix3Xd out(3, dirs.cols() * h_count);
  for (Eigen::Index r = 0; r < dirs.cols(); ++r)
    out.middleCols(r * h_count, h_count).colwise() = Eigen::Vector3d(dirs.col(r));
  return out;
}

}  // namespace

BranchRender render_coarse(Tape& t, ParamBinder& binder, FieldBundle& bundle,
                           const FrameTransforms& tf, const RaySetup& setup, int h_count,
                           RngStream* jitter, const AnalyticFields* analytic) {
  const int rays = static_cast<int>(setup.pixels.size());
  SampledRays sampled = sample_rays_uniform(setup, h_count, jitter);

  BranchRender br;
  br.points_t = sampled.points;
  br.depths = sampled.depths;
  br.intervals = sampled.intervals;

  Var points = t.constant(sampled.points);
  Var canonical = backward_warp_var(t, tf, points);
  Var sdf = analytic ? analytic->sdf(t, canonical) : bundle.sdf(t, binder, canonical, Branch::kCoarse);
  Var log_alpha =
      analytic ? t.constant(ad::Mat::Constant(1, 1, std::log(analytic->alpha)))
               : bundle.log_alpha(t, binder);
  Var sigma = t.sdf_density(sdf, log_alpha);
  Var colors = analytic ? analytic->color(t, canonical)
                        : bundle.color(t, binder, canonical,
                                       t.constant(repeat_dirs(setup.dirs, h_count)), setup.frame,
                                       Branch::kCoarse);
  composite_branch(t, &br, sigma, colors, canonical, h_count, rays);
  return br;
}

BranchRender render_fine(Tape& t, ParamBinder& binder, FieldBundle& bundle,
                         const FrameTransforms& tf, const RaySetup& setup,
                         const BranchRender& coarse, int extra_count, RngStream* jitter,
                         const Eigen::MatrixXd* fixed_depths) {
  const int rays = static_cast<int>(setup.pixels.size());
  const int h_coarse = coarse.samples_per_ray;
  const int h_merged = h_coarse + extra_count;
  const ad::Mat mu_value = t.value(coarse.mu);

  BranchRender br;
  br.depths.resize(h_merged, rays);
  br.intervals.resize(h_merged, rays);
  br.points_t.resize(3, static_cast<Eigen::Index>(rays) * h_merged);
  for (int r = 0; r < rays; ++r) {
    Ray ray{Eigen::Vector3d::Zero(), setup.dirs.col(r), setup.near, setup.far};
    RaySamples merged;
    if (fixed_depths) {
      Eigen::VectorXd depths = fixed_depths->col(r);
      merged.depths = depths;
      merged.intervals.resize(h_merged);
      for (int h = 0; h + 1 < h_merged; ++h) merged.intervals(h) = depths(h + 1) - depths(h);
      merged.intervals(h_merged - 1) = std::max(1e-12, setup.far - depths(h_merged - 1));
    } else {
      RaySamples coarse_samples;
      coarse_samples.depths = coarse.depths.col(r);
      coarse_samples.intervals = coarse.intervals.col(r);
      merged = sample_importance(ray, coarse_samples, mu_value.col(r), extra_count, jitter);
    }
    br.depths.col(r) = merged.depths;
    br.intervals.col(r) = merged.intervals;
    for (int h = 0; h < h_merged; ++h)
      br.points_t.col(static_cast<Eigen::Index>(r) * h_merged + h) =
          merged.depths(h) * setup.dirs.col(r);
  }

  Var points = t.constant(br.points_t);
  Var delta = bundle.skin_delta(t, binder, points, setup.frame);
  Var canonical_coarse = backward_warp_var(t, tf, points, delta);

  // Local quadratic refinement: x_f = A(x_c) D(x_c).
  Var coeffs = bundle.quad_coeffs_var(t, binder, canonical_coarse, setup.frame);
  Var extended = extend_coords_var(t, canonical_coarse);
  std::vector<Var> rows;
  for (int r = 0; r < 3; ++r)
    rows.push_back(t.colwise_sum(t.mul(t.slice_rows(coeffs, 9 * r, 9), extended)));
  Var fine_points = t.concat_rows(rows);

  Var sdf = bundle.sdf(t, binder, fine_points, Branch::kFine);
  Var sigma = t.sdf_density(sdf, bundle.log_alpha(t, binder));
  Var colors = bundle.color(t, binder, fine_points, t.constant(repeat_dirs(setup.dirs, h_merged)),
                            setup.frame, Branch::kFine);
  composite_branch(t, &br, sigma, colors, fine_points, h_merged, rays);
  return br;
}

FrameRender render_frame(FieldBundle& bundle, const CameraModel& camera,
                         const RigidTransform& init_pose, int frame, const RenderParams& params,
                         bool with_fine, const std::optional<RigidTransform>& pose_override) {
  const int w = camera.width, h = camera.height;
  FrameRender out;
  out.color_coarse = ImageRGB(w, h);
  out.opacity_coarse = ImageGray(w, h);
  out.has_fine = with_fine;
  if (with_fine) {
    out.color_fine = ImageRGB(w, h);
    out.opacity_fine = ImageGray(w, h);
  }

  const RigidTransform pose = pose_override.value_or(init_pose);
  const int chunk = 512;
  std::vector<Eigen::Vector2d> pixels;
  std::vector<std::pair<int, int>> coords;
  auto flush = [&]() {
    if (pixels.empty()) return;
    Tape tape;
    ParamBinder binder(tape, false);
    RaySetup setup = make_ray_setup(camera, pose, frame, pixels, params.scene_radius);
    FrameTransforms tf = build_frame_transforms(tape, binder, bundle, frame, pose);
    BranchRender coarse =
        render_coarse(tape, binder, bundle, tf, setup, params.coarse_samples, nullptr);
    const ad::Mat cc = tape.value(coarse.color);
    const ad::Mat oc = tape.value(coarse.opacity);
    ad::Mat cf, of;
    if (with_fine) {
      BranchRender fine =
          render_fine(tape, binder, bundle, tf, setup, coarse, params.fine_samples, nullptr);
      cf = tape.value(fine.color);
      of = tape.value(fine.opacity);
    }
    for (size_t i = 0; i < pixels.size(); ++i) {
      const auto [x, y] = coords[i];
      out.color_coarse.set(x, y, cc.col(i));
      out.opacity_coarse.px(x, y)[0] = oc(0, i);
      if (with_fine) {
        out.color_fine.set(x, y, cf.col(i));
        out.opacity_fine.px(x, y)[0] = of(0, i);
      }
    }
    pixels.clear();
    coords.clear();
  };

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      pixels.emplace_back(x + 0.5, y + 0.5);
      coords.emplace_back(x, y);
      if (static_cast<int>(pixels.size()) == chunk) flush();
    }
  }
  flush();
  return out;
}

std::vector<double> sample_sdf_grid(FieldBundle& bundle, Branch which, int resolution,
                                    double extent) {
  const int n = resolution + 1;
  std::vector<double> values(static_cast<size_t>(n) * n * n);
  const double cell = 2.0 * extent / resolution;
  const Eigen::Vector3d lo = Eigen::Vector3d::Constant(-extent);
  size_t idx = 0;
  for (int iz = 0; iz < n; ++iz) {
    Eigen::Matrix3Xd slab(3, static_cast<Eigen::Index>(n) * n);
    Eigen::Index k = 0;
    for (int iy = 0; iy < n; ++iy)
      for (int ix = 0; ix < n; ++ix)
        slab.col(k++) = lo + Eigen::Vector3d(ix * cell, iy * cell, iz * cell);
    Eigen::VectorXd sdf = bundle.sdf_plain(slab, which);
    for (Eigen::Index i = 0; i < sdf.size(); ++i) values[idx++] = sdf(i);
  }
  return values;
}

SurfaceCache build_surface_cache(FieldBundle& bundle, int grid_resolution, double extent) {
  GridBounds bounds{Eigen::Vector3d::Constant(-extent), Eigen::Vector3d::Constant(extent)};
  TriMesh mesh = marching_cubes_grid(sample_sdf_grid(bundle, Branch::kFine, grid_resolution, extent),
                                     grid_resolution, bounds);

  SurfaceCache cache;
  cache.points.resize(3, static_cast<Eigen::Index>(mesh.vertices.size()));
  for (size_t i = 0; i < mesh.vertices.size(); ++i) cache.points.col(i) = mesh.vertices[i];
  cache.faces = mesh.faces;
  cache.vertex_faces.resize(mesh.vertices.size());
  for (size_t f = 0; f < mesh.faces.size(); ++f)
    for (int c = 0; c < 3; ++c) cache.vertex_faces[mesh.faces[f][c]].push_back(static_cast<int>(f));
  if (cache.points.cols() > 0) cache.embeddings = bundle.embedding_plain(cache.points);
  return cache;
}

Eigen::Vector3d match_embedding(const SurfaceCache& cache, const Eigen::VectorXd& query) {
  if (cache.empty()) throw std::runtime_error("match_embedding: empty surface cache");
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < cache.embeddings.cols(); ++i) {
    const double d = (cache.embeddings.col(i) - query).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(i);
    }
  }

  // Refine over the incident faces: least-squares barycentric weights of the
  // query in embedding space, clamped to the simplex.
  Eigen::Vector3d matched = cache.points.col(best);
  double matched_d = best_d;
  for (int f : cache.vertex_faces[best]) {
    const auto& face = cache.faces[f];
    const Eigen::VectorXd e0 = cache.embeddings.col(face[0]);
    Eigen::MatrixXd basis(e0.size(), 2);
    basis.col(0) = cache.embeddings.col(face[1]) - e0;
    basis.col(1) = cache.embeddings.col(face[2]) - e0;
    const Eigen::Vector2d ab =
        (basis.transpose() * basis + 1e-12 * Eigen::Matrix2d::Identity())
            .ldlt()
            .solve(basis.transpose() * (query - e0));
    double a = std::max(0.0, ab(0)), b = std::max(0.0, ab(1));
    const double s = a + b;
    if (s > 1.0) {
      a /= s;
      b /= s;
    }
    const Eigen::VectorXd interp = e0 + a * basis.col(0) + b * basis.col(1);
    const double d = (interp - query).squaredNorm();
    if (d < matched_d) {
      matched_d = d;
      matched = (1.0 - a - b) * cache.points.col(face[0]) + a * cache.points.col(face[1]) +
                b * cache.points.col(face[2]);
    }
  }
  return matched;
}

CsePixel expected_surface_and_cse(FieldBundle& bundle, const SurfaceCache& cache,
                                  const CameraModel& camera, const RigidTransform& init_pose,
                                  int frame, const Eigen::Vector2d& pixel,
                                  const RenderParams& params) {
  CsePixel res;
  Tape tape;
  ParamBinder binder(tape, false);
  RaySetup setup = make_ray_setup(camera, init_pose, frame, {pixel}, params.scene_radius);
  FrameTransforms tf = build_frame_transforms(tape, binder, bundle, frame, init_pose);
  BranchRender coarse =
      render_coarse(tape, binder, bundle, tf, setup, params.coarse_samples, nullptr);
  res.expected = tape.value(coarse.expected).col(0);
  if (cache.empty()) return res;  // matched point unavailable, CSE terms skip

  res.matched = match_embedding(cache, bundle.canonical_embedding(res.expected));
  Eigen::Matrix3Xd both(3, 2);
  both.col(0) = res.expected;
  both.col(1) = res.matched;
  Var warped = forward_warp_var(tape, tf, tape.constant(both));
  Var projected = project_var(tape, setup, warped);
  res.proj_expected = tape.value(projected).col(0);
  res.proj_matched = tape.value(projected).col(1);
  res.ok = true;
  return res;
}

TriMesh pose_mesh(FieldBundle& bundle, const TriMesh& canonical, int frame,
                  const RigidTransform& init_pose, bool fine_branch, int fixed_point_iters) {
  TriMesh out = canonical;
  const Eigen::Index n = static_cast<Eigen::Index>(canonical.vertices.size());
  if (n == 0) return out;

  Eigen::Matrix3Xd targets(3, n);
  for (Eigen::Index i = 0; i < n; ++i) targets.col(i) = canonical.vertices[i];

  // Invert x_f = A(x_c) D(x_c) by fixed point; identity coefficients converge
  // in one iteration.
  Eigen::Matrix3Xd x = targets;
  if (fine_branch) {
    for (int it = 0; it < fixed_point_iters; ++it) {
      const Eigen::MatrixXd coeffs = bundle.quad_coeffs_plain(x, frame);
      Eigen::Matrix3Xd fwd(3, n);
      for (Eigen::Index i = 0; i < n; ++i) {
        QuadraticCoeffs a;
        for (int r = 0; r < 3; ++r)
          for (int c = 0; c < 9; ++c) a(r, c) = coeffs(r * 9 + c, i);
        fwd.col(i) = apply_quadratic(a, Eigen::Vector3d(x.col(i)));
      }
      x -= fwd - targets;
    }
  }

  const RigidTransform root = bundle.root_pose(frame, init_pose);
  std::vector<RigidTransform> bone_tf(bundle.config().bone_count);
  for (int b = 0; b < bundle.config().bone_count; ++b) bone_tf[b] = bundle.bone_pose(frame, b);
  const BoneSet bones = bundle.bones();

  Eigen::MatrixXd delta;
  if (fine_branch) delta = bundle.skin_delta_plain(x, frame);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd d =
        fine_branch ? Eigen::VectorXd(delta.col(i)) : Eigen::VectorXd();
    const Eigen::VectorXd w = skinning_weights(x.col(i), bones, d);
    out.vertices[i] = warp_forward(x.col(i), root, bone_tf, w);
  }
  return out;
}

}  // namespace nrr
