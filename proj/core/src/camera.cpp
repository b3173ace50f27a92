// Copyright Contributors to the nrr Project
// SPDX-License-Identifier: Apache-2.0
#include "nrr/camera.h"

namespace nrr {

Eigen::Vector2d project(const CameraModel& camera, int frame, const Eigen::Vector3d& x_world) {
  if (frame < 0 || frame >= static_cast<int>(camera.extrinsics.size()))
    throw std::invalid_argument("project: frame out of range");
  return camera.project_cam(camera.extrinsics[frame].apply(x_world));
}

}  // namespace nrr
