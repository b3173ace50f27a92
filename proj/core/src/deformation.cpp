// Copyright Contributors to the nrr Project
// SPDX-License-Identifier: Apache-2.0
#include "nrr/deformation.h"

#include <cmath>
#include <stdexcept>

namespace nrr {

Eigen::VectorXd skinning_weights(const Eigen::Vector3d& x, const BoneSet& bones,
                                 const Eigen::VectorXd& delta) {
  const int b_count = bones.count();
  if (delta.size() != 0 && delta.size() != b_count)
    throw std::invalid_argument("skinning_weights: delta size mismatch");
  Eigen::VectorXd logits(b_count);
  for (int b = 0; b < b_count; ++b) {
    Eigen::Vector3d v = x - bones.centers.col(b);
    double maha = v.dot(bones.precision(b) * v);
    logits(b) = -(maha + (delta.size() ? delta(b) : 0.0));
  }
  const double m = logits.maxCoeff();
  Eigen::VectorXd w = (logits.array() - m).exp();
  return w / w.sum();
}

Eigen::VectorXd skinning_weights(const Eigen::Vector3d& x, const BoneSet& bones) {
  return skinning_weights(x, bones, Eigen::VectorXd());
}

Eigen::Vector3d warp_forward(const Eigen::Vector3d& x_c, const RigidTransform& root,
                             const std::vector<RigidTransform>& bone_transforms,
                             const Eigen::VectorXd& weights) {
  if (static_cast<int>(bone_transforms.size()) != weights.size())
    throw std::invalid_argument("warp_forward: bone/weight count mismatch");
  Eigen::Vector3d blended = Eigen::Vector3d::Zero();
  for (int b = 0; b < weights.size(); ++b) blended += weights(b) * bone_transforms[b].apply(x_c);
  return root.apply(blended);
}

Eigen::Vector3d warp_backward(const Eigen::Vector3d& x_t, const RigidTransform& root,
                              const std::vector<RigidTransform>& bone_transforms,
                              const Eigen::VectorXd& weights) {
  if (static_cast<int>(bone_transforms.size()) != weights.size())
    throw std::invalid_argument("warp_backward: bone/weight count mismatch");
  const Eigen::Vector3d y = root.inverse().apply(x_t);
  Eigen::Vector3d blended = Eigen::Vector3d::Zero();
  for (int b = 0; b < weights.size(); ++b)
    blended += weights(b) * bone_transforms[b].inverse().apply(y);
  return blended;
}

BoneSet pose_bones(const BoneSet& bones, const RigidTransform& root,
                   const std::vector<RigidTransform>& bone_transforms) {
  BoneSet posed = bones;
  for (int b = 0; b < bones.count(); ++b) {
    const RigidTransform g = root.compose(bone_transforms[b]);
    posed.centers.col(b) = g.apply(bones.centers.col(b));
    // Q' = R Q R^T keeps Mahalanobis distances invariant under the map.
    posed.orientations[b] = bones.orientations[b] * g.rotation.transpose();
  }
  return posed;
}

Eigen::Matrix<double, 9, 1> extend_coords(const Eigen::Vector3d& x) {
  Eigen::Matrix<double, 9, 1> d;
  d << x.x(), x.y(), x.z(), x.x() * x.x(), x.y() * x.y(), x.z() * x.z(), x.x() * x.y(),
      x.y() * x.z(), x.z() * x.x();
  return d;
}

Eigen::Vector3d apply_quadratic(const QuadraticCoeffs& coeffs, const Eigen::Vector3d& x) {
  return coeffs * extend_coords(x);
}

QuadraticCoeffs quadratic_identity() {
  QuadraticCoeffs a = QuadraticCoeffs::Zero();
  a.leftCols<3>() = Eigen::Matrix3d::Identity();
  return a;
}

}  // namespace nrr
