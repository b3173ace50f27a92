// Copyright Contributors to the nrr Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "nrr/camera.h"
#include "nrr/meshing.h"

namespace nrr {

struct GenerationError : std::runtime_error {
  explicit GenerationError(const std::string& what) : std::runtime_error(what) {}
};

enum class ShapeKind { kSphere, kEllipsoid, kCapsule };
enum class CameraPath { kOrbit, kTranslate, kStatic };

ShapeKind parse_shape(const std::string& name);  // throws on unknown names
std::string shape_names();                       // for error messages

// Analytic scene: a canonical shape, a prescribed two-bone bend plus a
// quadratic cross-section bulge over time, and a camera trajectory. The
// deformation is invertible on the object for the default amplitudes.
struct SyntheticScene {
  ShapeKind shape = ShapeKind::kCapsule;
  int videos = 3;
  int frames_per_video = 30;
  int image_size = 64;
  double sphere_radius = 0.3;
  double bend_amplitude = 0.5;    // radians between the two halves at peak
  double bulge_amplitude = 0.05;  // fractional radial scaling at peak
  double motion_period = 30.0;    // frames per cycle
  int lights = 2;                 // illumination states, at most 2
  CameraPath camera_path = CameraPath::kOrbit;
  double camera_radius = 2.2;
  double orbit_degrees = 150.0;
  double translate_step = 0.0;  // units per frame along the image plane
  double focal = 0.0;           // pixels; 0 picks a framing that fits the object
  int gt_mesh_resolution = 96;
};

// Canonical signed distance of the scene's rest shape.
double scene_sdf(const SyntheticScene& scene, const Eigen::Vector3d& x_canonical);
// Canonical -> world deformation at a continuous time (frames within a video).
Eigen::Vector3d scene_deform(const SyntheticScene& scene, double time,
                             const Eigen::Vector3d& x_canonical);
Eigen::Vector3d scene_deform_inverse(const SyntheticScene& scene, double time,
                                     const Eigen::Vector3d& x_world);
// World -> camera extrinsics for a video at a continuous time.
RigidTransform scene_camera(const SyntheticScene& scene, int video, double time);
double scene_focal(const SyntheticScene& scene);
// Continuous in-video time of a frame, shared by all videos.
inline double scene_time(const SyntheticScene&, int frame_in_video) { return frame_in_video; }

struct SyntheticSummary {
  int videos = 0;
  int total_frames = 0;
  std::filesystem::path root;
};

// Renders the dataset (rgb, mask, flow, cse, cameras with exact init poses)
// and writes per-frame ground-truth meshes under <video>/gt/.
SyntheticSummary generate_synthetic(const SyntheticScene& scene,
                                    const std::filesystem::path& out_root);

}  // namespace nrr
