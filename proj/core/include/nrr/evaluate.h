// Copyright Contributors to the nrr Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "nrr/dataset.h"
#include "nrr/fields.h"
#include "nrr/metrics.h"
#include "nrr/renderer.h"

namespace nrr {

// Intersection over union of thresholded (0.5) rasters.
double mask_iou(const ImageGray& predicted_opacity, const ImageGray& mask);

// True when the frame is excluded from training under the holdout rule
// (frame_in_video % n == n/2).
bool holdout_frame(const FrameObservation& obs, int holdout_every);

// Latent codes of held-out frames are replaced by the mean of the nearest
// trainable neighbors in the same video (training never sees those frames,
// so their codes stay near init otherwise).
void blend_holdout_codes(FieldBundle& bundle, const VideoCollection& data, int holdout_every);

struct EvalFrameResult {
  int frame = 0;
  bool held_out = false;
  double psnr = 0.0, ssim = 0.0, iou = 0.0;
  std::optional<double> chamfer;    // present when a ground-truth mesh exists
  std::optional<double> f_at_2pct;
};

struct EvalOptions {
  RenderParams render;
  bool fine_branch = true;  // rendering branch and meshed SDF
  int mesh_resolution = 64;
  double mesh_extent = 0.6;
  MeshMetricOptions mesh_metrics;
  bool holdout_only = false;
  int holdout_every = 0;
  std::filesystem::path gt_root;  // dataset root holding <video>/gt/%05d.obj
};

// Renders every requested frame, compares against the observations, and when
// ground-truth meshes exist, poses the canonical mesh per frame and scores it.
std::vector<EvalFrameResult> evaluate_dataset(FieldBundle& bundle, const VideoCollection& data,
                                              const EvalOptions& options);

// Key-value metric lines: frame/<id>/<name> and mean/<name> records with the
// CD, F@2%, PSNR, SSIM (and IoU) fields.
void write_metric_report(const std::filesystem::path& path,
                         const std::vector<EvalFrameResult>& results);

}  // namespace nrr
