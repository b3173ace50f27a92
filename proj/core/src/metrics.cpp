// Copyright Contributors to the nrr Project
// SPDX-License-Identifier: Apache-2.0
#include "nrr/metrics.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nrr/rng.h"

namespace nrr {

KdTree3::KdTree3(const std::vector<Eigen::Vector3d>& points) : pts_(points) {
  if (pts_.empty()) throw std::invalid_argument("KdTree3: empty point set");
  nodes_.reserve(2 * pts_.size());
  build(0, static_cast<int>(pts_.size()), 0);
}

int KdTree3::build(int begin, int end, int depth) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({});
  if (end - begin <= 8) {
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    return id;
  }
  const int axis = depth % 3;
  const int mid = (begin + end) / 2;
  std::nth_element(pts_.begin() + begin, pts_.begin() + mid, pts_.begin() + end,
                   [axis](const auto& a, const auto& b) { return a(axis) < b(axis); });
  nodes_[id].axis = axis;
  nodes_[id].split = pts_[mid](axis);
  const int l = build(begin, mid, depth + 1);
  const int r = build(mid, end, depth + 1);
  nodes_[id].left = l;
  nodes_[id].right = r;
  return id;
}

void KdTree3::query(int node, const Eigen::Vector3d& q, double* best, int* best_idx) const {
  const Node& n = nodes_[node];
  if (n.axis < 0) {
    for (int i = n.begin; i < n.end; ++i) {
      const double d = (pts_[i] - q).squaredNorm();
      if (d < *best) {
        *best = d;
        *best_idx = i;
      }
    }
    return;
  }
  const double d = q(n.axis) - n.split;
  const int first = d < 0.0 ? n.left : n.right;
  const int second = d < 0.0 ? n.right : n.left;
  query(first, q, best, best_idx);
  if (d * d < *best) query(second, q, best, best_idx);
}

double KdTree3::nearest_squared(const Eigen::Vector3d& query_point) const {
  double best = std::numeric_limits<double>::infinity();
  int idx = 0;
  query(0, query_point, &best, &idx);
  return best;
}

Eigen::Vector3d KdTree3::nearest_point(const Eigen::Vector3d& query_point) const {
  double best = std::numeric_limits<double>::infinity();
  int idx = 0;
  query(0, query_point, &best, &idx);
  return pts_[idx];
}

std::vector<Eigen::Vector3d> sample_surface(const TriMesh& mesh, int count, uint64_t seed) {
  if (mesh.empty()) throw UndefinedMetricError("sample_surface: empty mesh");
  std::vector<double> cum(mesh.faces.size());
  double acc = 0.0;
  for (size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& face = mesh.faces[f];
    acc += 0.5 * (mesh.vertices[face[1]] - mesh.vertices[face[0]])
                     .cross(mesh.vertices[face[2]] - mesh.vertices[face[0]])
                     .norm();
    cum[f] = acc;
  }
  if (acc <= 0.0) throw UndefinedMetricError("sample_surface: zero-area mesh");

  RngStream rng(seed, 0x5a3d);
  std::vector<Eigen::Vector3d> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    const double u = rng.uniform() * acc;
    const size_t f = std::lower_bound(cum.begin(), cum.end(), u) - cum.begin();
    const auto& face = mesh.faces[std::min(f, mesh.faces.size() - 1)];
    double a = rng.uniform(), b = rng.uniform();
    if (a + b > 1.0) {
      a = 1.0 - a;
      b = 1.0 - b;
    }
    out.push_back(mesh.vertices[face[0]] +
                  a * (mesh.vertices[face[1]] - mesh.vertices[face[0]]) +
                  b * (mesh.vertices[face[2]] - mesh.vertices[face[0]]));
  }
  return out;
}

namespace {

// Nearest-neighbor distances from each of `from` to `to`; brute force and the
// kd-tree track the same min-squared-distance expression so results match
// exactly.
std::vector<double> nn_distances(const std::vector<Eigen::Vector3d>& from,
                                 const std::vector<Eigen::Vector3d>& to, bool brute_force) {
  std::vector<double> d(from.size());
  if (brute_force) {
    for (size_t i = 0; i < from.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& p : to) best = std::min(best, (p - from[i]).squaredNorm());
      d[i] = std::sqrt(best);
    }
  } else {
    KdTree3 tree(to);
    for (size_t i = 0; i < from.size(); ++i) d[i] = std::sqrt(tree.nearest_squared(from[i]));
  }
  return d;
}

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

double chamfer_distance(const std::vector<Eigen::Vector3d>& pred,
                        const std::vector<Eigen::Vector3d>& gt, bool brute_force) {
  if (pred.empty() || gt.empty()) throw UndefinedMetricError("chamfer: empty point set");
  const auto d1 = nn_distances(pred, gt, brute_force);
  const auto d2 = nn_distances(gt, pred, brute_force);
  return 0.5 * (mean(d1) + mean(d2));
}

double f_score(const std::vector<Eigen::Vector3d>& pred, const std::vector<Eigen::Vector3d>& gt,
               double threshold, bool brute_force) {
  if (pred.empty() || gt.empty()) throw UndefinedMetricError("f_score: empty point set");
  const auto d_pred = nn_distances(pred, gt, brute_force);
  const auto d_gt = nn_distances(gt, pred, brute_force);
  double precision = 0.0, recall = 0.0;
  for (double d : d_pred) precision += d <= threshold ? 1.0 : 0.0;
  for (double d : d_gt) recall += d <= threshold ? 1.0 : 0.0;
  precision /= static_cast<double>(d_pred.size());
  recall /= static_cast<double>(d_gt.size());
  if (precision + recall <= 0.0) return 0.0;
  return 100.0 * 2.0 * precision * recall / (precision + recall);
}

double f_score_threshold(const TriMesh& gt) {
  if (gt.empty()) throw UndefinedMetricError("f_score_threshold: empty mesh");
  const Eigen::Vector3d ext = gt.bounds().sizes();
  return 0.02 * ext.maxCoeff();
}

SimilarityTransform similarity_align(const std::vector<Eigen::Vector3d>& pred,
                                     const std::vector<Eigen::Vector3d>& gt, int iterations) {
  if (pred.empty() || gt.empty()) throw UndefinedMetricError("similarity_align: empty point set");
  auto centroid = [](const std::vector<Eigen::Vector3d>& p) {
    Eigen::Vector3d c = Eigen::Vector3d::Zero();
    for (const auto& x : p) c += x;
    return Eigen::Vector3d(c / static_cast<double>(p.size()));
  };
  auto rms_radius = [&](const std::vector<Eigen::Vector3d>& p, const Eigen::Vector3d& c) {
    double s = 0.0;
    for (const auto& x : p) s += (x - c).squaredNorm();
    return std::sqrt(s / static_cast<double>(p.size()));
  };

  const Eigen::Vector3d cp = centroid(pred), cg = centroid(gt);
  SimilarityTransform sim;
  // Scale once from the RMS radii; re-estimating it from noisy
  // nearest-neighbor correspondences systematically shrinks it.
  const double rp = rms_radius(pred, cp);
  sim.scale = rp > 1e-12 ? rms_radius(gt, cg) / rp : 1.0;
  sim.translation = cg - sim.scale * cp;

  KdTree3 gt_tree(gt);
  std::vector<Eigen::Vector3d> moved(pred.size());
  Eigen::MatrixXd src(3, pred.size()), dst(3, pred.size());
  for (int it = 0; it < iterations; ++it) {
    for (size_t i = 0; i < pred.size(); ++i) moved[i] = sim.apply(pred[i]);
    for (size_t i = 0; i < pred.size(); ++i) {
      src.col(i) = sim.scale * pred[i];
      dst.col(i) = gt_tree.nearest_point(moved[i]);
    }
    const Eigen::Matrix4d t = Eigen::umeyama(src, dst, false);  // rigid refit
    sim.rotation = t.topLeftCorner<3, 3>();
    sim.translation = t.topRightCorner<3, 1>();
  }
  return sim;
}

void mesh_metrics(const TriMesh& pred, const TriMesh& gt, const MeshMetricOptions& opts,
                  double* chamfer, double* f_at_2pct) {
  if (pred.empty() || gt.empty()) throw UndefinedMetricError("mesh_metrics: empty mesh");
  // The same stream samples both meshes: identical inputs score exactly zero
  // instead of the nearest-neighbor spacing noise floor.
  std::vector<Eigen::Vector3d> ps = sample_surface(pred, opts.samples, opts.seed);
  std::vector<Eigen::Vector3d> gs = sample_surface(gt, opts.samples, opts.seed);
  if (opts.align) {
    const SimilarityTransform sim = similarity_align(ps, gs);
    for (auto& p : ps) p = sim.apply(p);
  }
  *chamfer = chamfer_distance(ps, gs, opts.brute_force);
  *f_at_2pct = f_score(ps, gs, f_score_threshold(gt), opts.brute_force);
}

double psnr(const ImageRGB& rendered, const ImageRGB& reference) {
  if (rendered.width != reference.width || rendered.height != reference.height)
    throw std::invalid_argument("psnr: dimension mismatch");
  double mse = 0.0;
  for (size_t i = 0; i < rendered.data.size(); ++i) {
    const double d = rendered.data[i] - reference.data[i];
    mse += d * d;
  }
  mse /= static_cast<double>(rendered.data.size());
  if (mse <= 1e-10) return 100.0;
  return std::min(100.0, 10.0 * std::log10(1.0 / mse));
}

double ssim(const ImageRGB& rendered, const ImageRGB& reference) {
  if (rendered.width != reference.width || rendered.height != reference.height)
    throw std::invalid_argument("ssim: dimension mismatch");
  constexpr int kWin = 11;
  constexpr double kSigma = 1.5;
  constexpr double kC1 = 0.01 * 0.01, kC2 = 0.03 * 0.03;
  double g[kWin];
  double gsum = 0.0;
  for (int i = 0; i < kWin; ++i) {
    const double d = i - kWin / 2;
    g[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    gsum += g[i];
  }
  for (double& v : g) v /= gsum;

  const int w = rendered.width, h = rendered.height;
  if (w < kWin || h < kWin) throw std::invalid_argument("ssim: image smaller than the window");

  double total = 0.0;
  int windows = 0;
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y + kWin <= h; ++y) {
      for (int x = 0; x + kWin <= w; ++x) {
        double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
        for (int j = 0; j < kWin; ++j) {
          for (int i = 0; i < kWin; ++i) {
            const double wgt = g[i] * g[j];
            const double a = rendered.px(x + i, y + j)[c];
            const double b = reference.px(x + i, y + j)[c];
            mx += wgt * a;
            my += wgt * b;
            sxx += wgt * a * a;
            syy += wgt * b * b;
            sxy += wgt * a * b;
          }
        }
        sxx -= mx * mx;
        syy -= my * my;
        sxy -= mx * my;
        total += ((2 * mx * my + kC1) * (2 * sxy + kC2)) /
                 ((mx * mx + my * my + kC1) * (sxx + syy + kC2));
        ++windows;
      }
    }
  }
  return total / windows;
}

}  // namespace nrr
