// Copyright Contributors to the nrr Project
// SPDX-License-Identifier: Apache-2.0
#include "nrr/transforms.h"

#include <cmath>

namespace nrr {

Eigen::Matrix3d rodrigues(const Eigen::Vector3d& w) {
  const double theta2 = w.squaredNorm();
  Eigen::Matrix3d K;
  if (theta2 < 1e-24) {
    K << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
    return Eigen::Matrix3d::Identity() + K;
  }
  const double theta = std::sqrt(theta2);
  const Eigen::Vector3d k = w / theta;
  K << 0, -k.z(), k.y(), k.z(), 0, -k.x(), -k.y(), k.x(), 0;
  return Eigen::Matrix3d::Identity() + std::sin(theta) * K + (1.0 - std::cos(theta)) * (K * K);
}

}  // namespace nrr
