// Copyright Contributors to the nrr Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

#include "nrr/image.h"
#include "nrr/meshing.h"

namespace nrr {

struct UndefinedMetricError : std::runtime_error {
  explicit UndefinedMetricError(const std::string& what) : std::runtime_error(what) {}
};

struct MetricReport {
  double chamfer_cm = 0.0;
  double f_at_2pct = 0.0;  // percentage in [0, 100]
  double psnr = 0.0;       // dB, capped at 100
  double ssim = 0.0;
};

// Exact nearest neighbor over 3D points (median-split kd-tree).
class KdTree3 {
 public:
  explicit KdTree3(const std::vector<Eigen::Vector3d>& points);
  // Squared distance to the nearest stored point.
  double nearest_squared(const Eigen::Vector3d& query) const;
  // Nearest stored point itself (handy for correspondences).
  Eigen::Vector3d nearest_point(const Eigen::Vector3d& query) const;

 private:
  struct Node {
    int axis = -1;  // -1 marks a leaf
    double split = 0.0;
    int begin = 0, end = 0;
    int left = -1, right = -1;
  };
  int build(int begin, int end, int depth);
  void query(int node, const Eigen::Vector3d& q, double* best, int* best_idx) const;
  std::vector<Eigen::Vector3d> pts_;
  std::vector<Node> nodes_;
};

// Area-weighted surface samples, deterministic under `seed`.
std::vector<Eigen::Vector3d> sample_surface(const TriMesh& mesh, int count, uint64_t seed);

// Symmetric mean nearest-neighbor distance. `brute_force` switches the
// search to the O(N^2) reference path (same distances, same order).
double chamfer_distance(const std::vector<Eigen::Vector3d>& pred,
                        const std::vector<Eigen::Vector3d>& gt, bool brute_force = false);

// Harmonic mean of precision/recall within `threshold`, times 100.
double f_score(const std::vector<Eigen::Vector3d>& pred, const std::vector<Eigen::Vector3d>& gt,
               double threshold, bool brute_force = false);

// 2% of the longest ground-truth bounding box edge.
double f_score_threshold(const TriMesh& gt);

struct SimilarityTransform {
  double scale = 1.0;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  Eigen::Vector3d apply(const Eigen::Vector3d& x) const {
    return scale * (rotation * x) + translation;
  }
};

// Similarity (scale + rigid) fit of `pred` onto `gt` by iterated
// nearest-neighbor correspondence; the global scale of a monocular
// reconstruction is unobservable, so metrics align first by default.
SimilarityTransform similarity_align(const std::vector<Eigen::Vector3d>& pred,
                                     const std::vector<Eigen::Vector3d>& gt, int iterations = 10);

struct MeshMetricOptions {
  int samples = 10000;
  bool align = true;
  bool brute_force = false;
  uint64_t seed = 71;
};

// Chamfer + F@2% between two meshes with area-weighted sampling.
void mesh_metrics(const TriMesh& pred, const TriMesh& gt, const MeshMetricOptions& opts,
                  double* chamfer, double* f_at_2pct);

// PSNR over all channels (dB, capped at 100 for zero MSE).
double psnr(const ImageRGB& rendered, const ImageRGB& reference);
// Mean SSIM over valid 11x11 Gaussian windows (sigma 1.5, K1=.01, K2=.03, L=1).
double ssim(const ImageRGB& rendered, const ImageRGB& reference);

}  // namespace nrr
