// Copyright Contributors to the nrr Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

namespace nrr {

// Axis-angle to rotation matrix.
Eigen::Matrix3d rodrigues(const Eigen::Vector3d& w);

struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static RigidTransform identity() { return {}; }
  static RigidTransform from_axis_angle(const Eigen::Vector3d& w, const Eigen::Vector3d& t) {
    return {rodrigues(w), t};
  }

  Eigen::Vector3d apply(const Eigen::Vector3d& x) const { return rotation * x + translation; }

  RigidTransform inverse() const {
    return {rotation.transpose(), -(rotation.transpose() * translation)};
  }

  // this ∘ other: apply `other` first, then this.
  RigidTransform compose(const RigidTransform& other) const {
    return {rotation * other.rotation, rotation * other.translation + translation};
  }

  Eigen::Matrix4d homogeneous() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = rotation;
    m.topRightCorner<3, 1>() = translation;
    return m;
  }

  double orthonormality_residual() const {
    return (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).norm();
  }
};

}  // namespace nrr
