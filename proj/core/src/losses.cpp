// Copyright Contributors to the nrr Project
// SPDX-License-Identifier: Apache-2.0
#include "nrr/losses.h"

#include <cmath>

#include "nrr/rng.h"

namespace nrr {

using ad::Tape;
using ad::Var;

const std::vector<std::string>& loss_term_order() {
  static const std::vector<std::string> order = {"pho_c",   "pho_f",   "sil_c", "sil_f", "of",
                                                 "cse3d",   "cse2d_c", "cse2d_f", "cyc2d",
                                                 "cyc3d",   "cam",     "q_spatial", "q_temporal"};
  return order;
}

Var photometric_loss(Tape& t, Var rendered, const ad::Mat& observed) {
  if (t.value(rendered).rows() != observed.rows() || t.value(rendered).cols() != observed.cols())
    throw std::invalid_argument("photometric_loss: shape mismatch");
  return t.sum(t.abs(t.sub(rendered, t.constant(observed))));
}

Var silhouette_loss(Tape& t, Var pred, Var target) {
  if (t.value(pred).cols() != t.value(target).cols())
    throw std::invalid_argument("silhouette_loss: shape mismatch");
  return t.sum(t.square(t.sub(pred, target)));
}

namespace {

// Per-column squared norms, optionally scaled, then summed.
Var weighted_sq_sum(Tape& t, Var diff, Var confidence) {
  Var sq = t.colwise_sum(t.square(diff));
  if (confidence.valid()) sq = t.mul(sq, confidence);
  return t.sum(sq);
}

}  // namespace

Var flow_loss(Tape& t, Var projected, const ad::Mat& target, Var confidence) {
  if (t.value(projected).cols() != target.cols())
    throw std::invalid_argument("flow_loss: shape mismatch");
  return weighted_sq_sum(t, t.sub(projected, t.constant(target)), confidence);
}

Var cse3d_loss(Tape& t, Var expected, const ad::Mat& matched, Var confidence) {
  return weighted_sq_sum(t, t.sub(expected, t.constant(matched)), confidence);
}

Var cse2d_loss(Tape& t, Var proj_expected, Var proj_matched, Var confidence) {
  return weighted_sq_sum(t, t.sub(proj_expected, proj_matched), confidence);
}

Var cycle2d_loss(Tape& t, Var projected, const ad::Mat& pixels, Var confidence) {
  return weighted_sq_sum(t, t.sub(projected, t.constant(pixels)), confidence);
}

Var cycle3d_loss(Tape& t, Var forward_warped, const ad::Mat& points_t, Var mu_flat) {
  Var diff = t.sub(forward_warped, t.constant(points_t));
  Var sq = t.colwise_sum(t.square(diff));  // 1 x (R*H)
  return t.sum(t.mul(sq, mu_flat));
}

Var camera_smoothness_loss(Tape& t, const std::vector<TransformVar>& roots,
                           const std::vector<std::pair<int, int>>& consecutive_pairs) {
  Var total = t.scalar(0.0);
  for (const auto& [a, b] : consecutive_pairs) {
    Var dr = t.sum(t.square(t.sub(roots[a].rotation, roots[b].rotation)));
    Var dt = t.sum(t.square(t.sub(roots[a].translation, roots[b].translation)));
    total = t.add(total, t.add(dr, dt));
  }
  return total;
}

QuadSmoothnessResult quad_smoothness_loss(Tape& t, const CoeffField& coeffs,
                                          const Eigen::Matrix3Xd& points, int frame,
                                          int next_frame, int neighbors, double noise_scale,
                                          uint64_t seed, uint64_t step,
                                          const std::vector<uint64_t>& point_ids) {
  if (neighbors < 1) throw std::invalid_argument("quad_smoothness: neighbors must be >= 1");
  if (noise_scale <= 0.0) throw std::invalid_argument("quad_smoothness: noise scale must be > 0");
  const Eigen::Index n = points.cols();
  if (static_cast<Eigen::Index>(point_ids.size()) != n)
    throw std::invalid_argument("quad_smoothness: point id count mismatch");

  Var base = coeffs(t, t.constant(points), frame);
  const double sigma = std::sqrt(noise_scale);

  QuadSmoothnessResult res;
  res.spatial = t.scalar(0.0);
  if (next_frame >= 0) res.temporal = t.scalar(0.0);

  for (int k = 0; k < neighbors; ++k) {
    Eigen::Matrix3Xd jittered(3, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      RngStream rng(seed, step, point_ids[i], static_cast<uint64_t>(k));
      jittered.col(i) =
          points.col(i) + sigma * Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
    }
    Var pts = t.constant(jittered);
    Var spatial_coeffs = coeffs(t, pts, frame);
    Var frob = t.sqrt_safe(t.colwise_sum(t.square(t.sub(base, spatial_coeffs))));
    res.spatial = t.add(res.spatial, t.sum(frob));
    if (next_frame >= 0) {
      Var temporal_coeffs = coeffs(t, pts, next_frame);
      Var frob_t = t.sqrt_safe(t.colwise_sum(t.square(t.sub(base, temporal_coeffs))));
      res.temporal = t.add(res.temporal, t.sum(frob_t));
    }
  }
  return res;
}

double photometric_loss(const Eigen::Matrix3Xd& rendered, const Eigen::Matrix3Xd& observed) {
  if (rendered.cols() != observed.cols())
    throw std::invalid_argument("photometric_loss: shape mismatch");
  return (rendered - observed).cwiseAbs().sum();
}

double silhouette_loss(const Eigen::VectorXd& pred, const Eigen::VectorXd& target) {
  if (pred.size() != target.size()) throw std::invalid_argument("silhouette_loss: shape mismatch");
  return (pred - target).squaredNorm();
}

double camera_smoothness(const std::vector<RigidTransform>& extrinsics,
                         const std::vector<int>& video_of) {
  if (extrinsics.size() != video_of.size())
    throw std::invalid_argument("camera_smoothness: size mismatch");
  double total = 0.0;
  for (size_t i = 0; i + 1 < extrinsics.size(); ++i) {
    if (video_of[i] != video_of[i + 1]) continue;  // never across video boundaries
    total += (extrinsics[i].rotation - extrinsics[i + 1].rotation).squaredNorm() +
             (extrinsics[i].translation - extrinsics[i + 1].translation).squaredNorm();
  }
  return total;
}

double total_loss(const LossReport& report, const LossWeights& w) {
  for (const auto& [name, value] : report.parts)
    if (!std::isfinite(value)) throw TrainingFault(name);
  const double l_q = report.part("q_spatial") + w.quad_temporal * report.part("q_temporal");
  return w.pho_f * report.part("pho_f") + w.sil_f * report.part("sil_f") + w.quad * l_q +
         w.pho_c * report.part("pho_c") + w.sil_c * report.part("sil_c") +
         w.flow * report.part("of") +
         w.reg * (report.part("cse3d") + report.part("cse2d_c") + report.part("cse2d_f")) +
         report.part("cyc2d") + report.part("cyc3d") + report.part("cam");
}

}  // namespace nrr
