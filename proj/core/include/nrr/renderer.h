// Copyright Contributors to the nrr Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "nrr/camera.h"
#include "nrr/fields.h"
#include "nrr/geometry.h"
#include "nrr/image.h"
#include "nrr/meshing.h"
#include "nrr/rng.h"

namespace nrr {

struct RenderParams {
  int coarse_samples = 256;
  int fine_samples = 128;  // importance samples merged on top of the coarse set
  double scene_radius = 0.6;
  bool deterministic = true;  // bin centers; training uses stratified jitter
};

// One chunk of rays sharing a frame: pixel coordinates, unit camera-space
// directions and the depth range derived from the init pose and the canonical
// bounding radius (padded 20%).
struct RaySetup {
  int frame = 0;
  RigidTransform init_pose;
  std::vector<Eigen::Vector2d> pixels;
  Eigen::Matrix3Xd dirs;
  double near = 0.0, far = 0.0;
  double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;
};

RaySetup make_ray_setup(const CameraModel& camera, const RigidTransform& init_pose, int frame,
                        const std::vector<Eigen::Vector2d>& pixels, double scene_radius);

// Frame-t transforms and bone geometry bound on a tape.
struct FrameTransforms {
  TransformVar root;
  std::vector<TransformVar> bones;
  FieldBundle::BoneVars geometry;
};

FrameTransforms build_frame_transforms(ad::Tape& tape, ParamBinder& binder, FieldBundle& bundle,
                                       int frame, const RigidTransform& init_pose);

// Image-space -> canonical warp of a 3xN column batch: inverse root, then the
// blend of inverse bone maps with weights from the posed-bone Mahalanobis
// softmax (plus optional learned per-bone offsets, B x N).
ad::Var backward_warp_var(ad::Tape& tape, const FrameTransforms& tf, ad::Var points_t,
                          ad::Var delta = {});
// Canonical -> image-space warp (weights against canonical bones).
ad::Var forward_warp_var(ad::Tape& tape, const FrameTransforms& tf, ad::Var points_c,
                         ad::Var delta = {});
// Pinhole projection of camera-space columns, 2xN.
ad::Var project_var(ad::Tape& tape, const RaySetup& setup, ad::Var points_cam);
// Rows (x, y, z, x^2, y^2, z^2, xy, yz, zx) of a 3xN batch.
ad::Var extend_coords_var(ad::Tape& tape, ad::Var points);

struct BranchRender {
  ad::Var color;      // 3 x R
  ad::Var opacity;    // 1 x R
  ad::Var expected;   // 3 x R, canonical space
  ad::Var mu;         // H x R compositing weights
  ad::Var canonical;  // 3 x (R*H) canonical query points
  Eigen::Matrix3Xd points_t;  // camera-space samples, column r*H + h
  Eigen::MatrixXd depths;     // H x R
  Eigen::MatrixXd intervals;  // H x R
  int samples_per_ray = 0;
};

// Analytic SDF/color stand-ins for oracle tests; when given, the branch
// queries these instead of the bundle's canonical networks.
struct AnalyticFields {
  std::function<ad::Var(ad::Tape&, ad::Var points)> sdf;    // 1 x N
  std::function<ad::Var(ad::Tape&, ad::Var points)> color;  // 3 x N
  double alpha = 0.01;
};

BranchRender render_coarse(ad::Tape& tape, ParamBinder& binder, FieldBundle& bundle,
                           const FrameTransforms& tf, const RaySetup& setup, int h_count,
                           RngStream* jitter, const AnalyticFields* analytic = nullptr);

// Importance-resamples from the coarse weights, reuses the coarse backward
// warp (with the learned skinning offsets), applies the per-point quadratic
// refinement, and composites through the fine canonical networks. Sample
// placement is not differentiated; `fixed_depths` (H_merged x R) bypasses the
// resampling so finite-difference oracles can probe the differentiable map.
BranchRender render_fine(ad::Tape& tape, ParamBinder& binder, FieldBundle& bundle,
                         const FrameTransforms& tf, const RaySetup& setup,
                         const BranchRender& coarse, int extra_count, RngStream* jitter,
                         const Eigen::MatrixXd* fixed_depths = nullptr);

struct FrameRender {
  ImageRGB color_coarse, color_fine;
  ImageGray opacity_coarse, opacity_fine;
  bool has_fine = false;
};

// Full-image render without gradients; `pose_override` substitutes the init
// pose (novel viewpoints keep the frame's deformation codes).
FrameRender render_frame(FieldBundle& bundle, const CameraModel& camera,
                         const RigidTransform& init_pose, int frame, const RenderParams& params,
                         bool with_fine,
                         const std::optional<RigidTransform>& pose_override = std::nullopt);

// Canonical surface points with their embeddings, for CSE matching.
struct SurfaceCache {
  Eigen::Matrix3Xd points;
  Eigen::MatrixXd embeddings;  // embed_dim x M
  std::vector<std::array<int, 3>> faces;
  std::vector<std::vector<int>> vertex_faces;
  bool empty() const { return points.cols() == 0; }
};

// (resolution+1)^3 SDF lattice over [-extent, extent]^3, evaluated slab by
// slab to bound peak memory.
std::vector<double> sample_sdf_grid(FieldBundle& bundle, Branch which, int resolution,
                                    double extent);

SurfaceCache build_surface_cache(FieldBundle& bundle, int grid_resolution, double extent = 0.6);

// Closest interpolated surface point in embedding space: nearest vertex, then
// a clamped least-squares barycentric refinement over its incident faces.
Eigen::Vector3d match_embedding(const SurfaceCache& cache, const Eigen::VectorXd& query);

struct CsePixel {
  bool ok = false;
  Eigen::Vector3d expected = Eigen::Vector3d::Zero();
  Eigen::Vector3d matched = Eigen::Vector3d::Zero();
  Eigen::Vector2d proj_expected = Eigen::Vector2d::Zero();
  Eigen::Vector2d proj_matched = Eigen::Vector2d::Zero();
};

// Expected canonical surface point of a pixel plus its embedding-matched
// counterpart and both frame-t projections (through the forward warp).
CsePixel expected_surface_and_cse(FieldBundle& bundle, const SurfaceCache& cache,
                                  const CameraModel& camera, const RigidTransform& init_pose,
                                  int frame, const Eigen::Vector2d& pixel,
                                  const RenderParams& params);

// Canonical fine mesh posed to a frame: the quadratic map is inverted per
// vertex by fixed-point iteration, then vertices go through the forward warp.
TriMesh pose_mesh(FieldBundle& bundle, const TriMesh& canonical, int frame,
                  const RigidTransform& init_pose, bool fine_branch = true,
                  int fixed_point_iters = 10);

}  // namespace nrr
