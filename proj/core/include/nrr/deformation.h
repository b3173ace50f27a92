// Copyright Contributors to the nrr Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <vector>

#include "nrr/transforms.h"

namespace nrr {

// Gaussian-ellipsoid bones driving the blend-skinning weights. `scales` holds
// the diagonal of the precision's eigenvalue matrix, so the Mahalanobis
// precision of bone b is Q_b = V_b^T diag(scales_b) V_b.
struct BoneSet {
  Eigen::Matrix3Xd centers;                 // 3 x B
  std::vector<Eigen::Matrix3d> orientations;  // V_b
  Eigen::Matrix3Xd scales;                  // 3 x B, strictly positive

  int count() const { return static_cast<int>(centers.cols()); }
  Eigen::Matrix3d precision(int b) const {
    return orientations[b].transpose() * scales.col(b).asDiagonal() * orientations[b];
  }
};

// Softmax over the negated per-bone Mahalanobis distance (plus an optional
// learned offset), so nearer bones dominate. Returns a nonnegative B-vector
// summing to 1.
Eigen::VectorXd skinning_weights(const Eigen::Vector3d& x, const BoneSet& bones,
                                 const Eigen::VectorXd& delta);
Eigen::VectorXd skinning_weights(const Eigen::Vector3d& x, const BoneSet& bones);

// Canonical -> image-space warp: weight-blended bone maps, then the root.
Eigen::Vector3d warp_forward(const Eigen::Vector3d& x_c, const RigidTransform& root,
                             const std::vector<RigidTransform>& bone_transforms,
                             const Eigen::VectorXd& weights);

// Image-space -> canonical warp: inverse root, then blended inverse bone maps.
Eigen::Vector3d warp_backward(const Eigen::Vector3d& x_t, const RigidTransform& root,
                              const std::vector<RigidTransform>& bone_transforms,
                              const Eigen::VectorXd& weights);

// Bones carried to image space by the root and per-bone transforms; used to
// evaluate backward-warp skinning weights at image-space points.
BoneSet pose_bones(const BoneSet& bones, const RigidTransform& root,
                   const std::vector<RigidTransform>& bone_transforms);

// (x, y, z, x^2, y^2, z^2, xy, yz, zx)
Eigen::Matrix<double, 9, 1> extend_coords(const Eigen::Vector3d& x);

// 3x9 coefficient block [linear | quadratic | cross-term] applied to the
// extended coordinates.
using QuadraticCoeffs = Eigen::Matrix<double, 3, 9>;

Eigen::Vector3d apply_quadratic(const QuadraticCoeffs& coeffs, const Eigen::Vector3d& x);

// Identity coefficients: [I | 0 | 0].
QuadraticCoeffs quadratic_identity();

}  // namespace nrr
