// Copyright Contributors to the nrr Project
// SPDX-License-Identifier: Apache-2.0
#include "nrr/evaluate.h"

#include <fstream>

namespace nrr {

namespace fs = std::filesystem;

double mask_iou(const ImageGray& predicted_opacity, const ImageGray& mask) {
  if (predicted_opacity.width != mask.width || predicted_opacity.height != mask.height)
    throw std::invalid_argument("mask_iou: dimension mismatch");
  int inter = 0, uni = 0;
  for (size_t i = 0; i < mask.pixel_count(); ++i) {
    const bool a = predicted_opacity.data[i] >= 0.5;
    const bool b = mask.data[i] >= 0.5;
    inter += (a && b) ? 1 : 0;
    uni += (a || b) ? 1 : 0;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / uni;
}

bool holdout_frame(const FrameObservation& obs, int holdout_every) {
  if (holdout_every <= 0) return false;
  return obs.frame_in_video % holdout_every == holdout_every / 2;
}

void blend_holdout_codes(FieldBundle& bundle, const VideoCollection& data, int holdout_every) {
  if (holdout_every <= 0) return;
  for (const Video& video : data.videos) {
    for (const FrameObservation& obs : video.frames) {
      if (!holdout_frame(obs, holdout_every)) continue;
      int prev = -1, next = -1;
      for (int f = obs.frame_in_video - 1; f >= 0; --f)
        if (!holdout_frame(video.frames[f], holdout_every)) {
          prev = video.frames[f].global_index;
          break;
        }
      for (int f = obs.frame_in_video + 1; f < static_cast<int>(video.frames.size()); ++f)
        if (!holdout_frame(video.frames[f], holdout_every)) {
          next = video.frames[f].global_index;
          break;
        }
      if (prev < 0 && next < 0) continue;
      if (prev < 0) prev = next;
      if (next < 0) next = prev;
      bundle.blend_codes_into(obs.global_index, prev, next);
    }
  }
}

std::vector<EvalFrameResult> evaluate_dataset(FieldBundle& bundle, const VideoCollection& data,
                                              const EvalOptions& options) {
  const Branch branch = options.fine_branch ? Branch::kFine : Branch::kCoarse;

  TriMesh canonical;
  bool have_canonical = false;
  if (!options.gt_root.empty()) {
    GridBounds bounds{Eigen::Vector3d::Constant(-options.mesh_extent),
                      Eigen::Vector3d::Constant(options.mesh_extent)};
    canonical = marching_cubes_grid(
        sample_sdf_grid(bundle, branch, options.mesh_resolution, options.mesh_extent),
        options.mesh_resolution, bounds);
    have_canonical = !canonical.empty();
  }

  std::vector<EvalFrameResult> results;
  for (const Video& video : data.videos) {
    for (const FrameObservation& obs : video.frames) {
      const bool held = holdout_frame(obs, options.holdout_every);
      if (options.holdout_only && !held) continue;

      EvalFrameResult res;
      res.frame = obs.global_index;
      res.held_out = held;

      const RigidTransform init = obs.init_root_pose.value_or(RigidTransform::identity());
      FrameRender render = render_frame(bundle, video.camera, init, obs.global_index,
                                        options.render, options.fine_branch);
      const ImageRGB& color = options.fine_branch ? render.color_fine : render.color_coarse;
      const ImageGray& opacity =
          options.fine_branch ? render.opacity_fine : render.opacity_coarse;
      res.psnr = psnr(color, obs.rgb);
      res.ssim = ssim(color, obs.rgb);
      res.iou = mask_iou(opacity, obs.mask);

      if (have_canonical) {
        char name[32];
        std::snprintf(name, sizeof(name), "%05d.obj", obs.frame_in_video);
        const fs::path gt_path = options.gt_root / video.name / "gt" / name;
        if (fs::exists(gt_path)) {
          const TriMesh gt = load_obj(gt_path);
          const TriMesh posed =
              pose_mesh(bundle, canonical, obs.global_index, init, options.fine_branch);
          if (!gt.empty() && !posed.empty()) {
            double cd = 0.0, f = 0.0;
            mesh_metrics(posed, gt, options.mesh_metrics, &cd, &f);
            res.chamfer = cd;
            res.f_at_2pct = f;
          }
        }
      }
      results.push_back(res);
    }
  }
  return results;
}

void write_metric_report(const fs::path& path, const std::vector<EvalFrameResult>& results) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write metric report: " + path.string());
  out.precision(10);
  double sum_cd = 0, sum_f = 0, sum_psnr = 0, sum_ssim = 0, sum_iou = 0;
  int mesh_count = 0;
  for (const auto& r : results) {
    char frame[16];
    std::snprintf(frame, sizeof(frame), "%05d", r.frame);
    if (r.chamfer) out << "frame/" << frame << "/CD " << *r.chamfer << "\n";
    if (r.f_at_2pct) out << "frame/" << frame << "/F@2% " << *r.f_at_2pct << "\n";
    out << "frame/" << frame << "/PSNR " << r.psnr << "\n";
    out << "frame/" << frame << "/SSIM " << r.ssim << "\n";
    out << "frame/" << frame << "/IoU " << r.iou << "\n";
    sum_psnr += r.psnr;
    sum_ssim += r.ssim;
    sum_iou += r.iou;
    if (r.chamfer) {
      sum_cd += *r.chamfer;
      sum_f += *r.f_at_2pct;
      ++mesh_count;
    }
  }
  const double n = std::max<size_t>(1, results.size());
  if (mesh_count > 0) {
    out << "mean/CD " << sum_cd / mesh_count << "\n";
    out << "mean/F@2% " << sum_f / mesh_count << "\n";
  }
  out << "mean/PSNR " << sum_psnr / n << "\n";
  out << "mean/SSIM " << sum_ssim / n << "\n";
  out << "mean/IoU " << sum_iou / n << "\n";
}

}  // namespace nrr
