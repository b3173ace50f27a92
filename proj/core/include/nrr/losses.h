// Copyright Contributors to the nrr Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "nrr/autodiff.h"
#include "nrr/fields.h"
#include "nrr/transforms.h"

namespace nrr {

struct LossWeights {
  double pho_f = 0.1;          // fine photometric
  double sil_f = 1.0;          // fine silhouette
  double quad = 1e3;           // quadratic smoothness (spatial + temporal)
  double pho_c = 0.1;          // coarse photometric
  double sil_c = 1.0;          // coarse silhouette
  double flow = 0.1;           // optical flow
  double reg = 0.02;           // CSE regularization
  double quad_temporal = 1.0;  // temporal share inside the quadratic term
};

// Canonical term order used for reports and logs.
const std::vector<std::string>& loss_term_order();

struct LossReport {
  std::map<std::string, double> parts;  // only phase-enabled terms are present
  double total = 0.0;

  bool has(const std::string& name) const { return parts.count(name) != 0; }
  double part(const std::string& name) const {
    auto it = parts.find(name);
    return it == parts.end() ? 0.0 : it->second;
  }
};

struct TrainingFault : std::runtime_error {
  explicit TrainingFault(const std::string& term_name)
      : std::runtime_error("non-finite loss term: " + term_name), term(term_name) {}
  std::string term;
};

// ---- tape-level terms (sums over the given columns) ----

// l1 color difference.
ad::Var photometric_loss(ad::Tape& t, ad::Var rendered, const ad::Mat& observed);
// Squared difference; the fine branch passes the detached coarse prediction
// as `target` so the teacher does not learn from the student.
ad::Var silhouette_loss(ad::Tape& t, ad::Var pred, ad::Var target);
// Squared 2D distance of projected points to (pixel + measured flow). The
// optional 1xN `confidence` scales per-pixel terms (the trainer passes the
// detached rendered opacity so empty rays do not drag the pose).
ad::Var flow_loss(ad::Tape& t, ad::Var projected, const ad::Mat& target,
                  ad::Var confidence = {});
// Squared 3D distance between expected and matched canonical points.
ad::Var cse3d_loss(ad::Tape& t, ad::Var expected, const ad::Mat& matched,
                   ad::Var confidence = {});
// Squared 2D distance of the two forward-warped projections.
ad::Var cse2d_loss(ad::Tape& t, ad::Var proj_expected, ad::Var proj_matched,
                   ad::Var confidence = {});
// Squared reprojection error against the source pixels.
ad::Var cycle2d_loss(ad::Tape& t, ad::Var projected, const ad::Mat& pixels,
                     ad::Var confidence = {});
// mu-weighted squared round-trip error over all ray samples.
ad::Var cycle3d_loss(ad::Tape& t, ad::Var forward_warped, const ad::Mat& points_t,
                     ad::Var mu_flat);
// First-order smoothness of the stacked extrinsic entries over consecutive
// same-video frames.
ad::Var camera_smoothness_loss(ad::Tape& t, const std::vector<TransformVar>& roots,
                               const std::vector<std::pair<int, int>>& consecutive_pairs);

// Frobenius-norm coherence of the quadratic coefficients under Gaussian
// perturbations of the input point. Returns (spatial, temporal); the temporal
// half is only valid when next_frame >= 0. Noise is drawn from streams keyed
// by (seed, step, point id, k). The coefficient field is a functor
// (27 x N columns per 3 x N points) so oracles can swap in analytic fields.
struct QuadSmoothnessResult {
  ad::Var spatial;
  ad::Var temporal;  // invalid when there is no next frame
};
using CoeffField = std::function<ad::Var(ad::Tape&, ad::Var points, int frame)>;
QuadSmoothnessResult quad_smoothness_loss(ad::Tape& t, const CoeffField& coeffs,
                                          const Eigen::Matrix3Xd& points, int frame,
                                          int next_frame, int neighbors, double noise_scale,
                                          uint64_t seed, uint64_t step,
                                          const std::vector<uint64_t>& point_ids);

// ---- plain helpers (used by tests and the trainer's reporting path) ----

double photometric_loss(const Eigen::Matrix3Xd& rendered, const Eigen::Matrix3Xd& observed);
double silhouette_loss(const Eigen::VectorXd& pred, const Eigen::VectorXd& target);
double camera_smoothness(const std::vector<RigidTransform>& extrinsics,
                         const std::vector<int>& video_of);

// Weighted assembly of the parts; missing parts count as zero, a non-finite
// part raises TrainingFault with the term name.
double total_loss(const LossReport& report, const LossWeights& weights);

}  // namespace nrr
