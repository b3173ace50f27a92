// Copyright Contributors to the nrr Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

#include "nrr/transforms.h"

namespace nrr {

struct BehindCameraError : std::runtime_error {
  BehindCameraError() : std::runtime_error("point has nonpositive camera depth") {}
};

// Pinhole camera: intrinsics shared across a video, one extrinsic transform
// per frame (world -> camera). Pixel coordinates are continuous with pixel
// (i, j) covering [i, i+1) x [j, j+1); integer pixel centers sit at +0.5.
struct CameraModel {
  double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;
  int width = 0, height = 0;
  std::vector<RigidTransform> extrinsics;

  // Intrinsics-only projection of a camera-space point.
  Eigen::Vector2d project_cam(const Eigen::Vector3d& x) const {
    if (x.z() <= 0.0) throw BehindCameraError();
    return {fx * x.x() / x.z() + cx, fy * x.y() / x.z() + cy};
  }

  // Unit direction through a continuous pixel coordinate, in camera space.
  Eigen::Vector3d ray_dir(const Eigen::Vector2d& pixel) const {
    Eigen::Vector3d d((pixel.x() - cx) / fx, (pixel.y() - cy) / fy, 1.0);
    return d.normalized();
  }
};

// Extrinsics for frame t, then intrinsics.
Eigen::Vector2d project(const CameraModel& camera, int frame, const Eigen::Vector3d& x_world);

}  // namespace nrr
