// Copyright Contributors to the nrr Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "nrr/dataset.h"
#include "nrr/fields.h"
#include "nrr/losses.h"
#include "nrr/renderer.h"

namespace nrr {

struct Schedule {
  int64_t warmup_steps = 9600;
  int64_t phase1_extra_steps = 14400;
  int64_t total_steps = 224000;
  int batch_rays = 416;
  int coarse_samples = 256;
  int fine_samples = 128;
  double learning_rate = 5e-4;
  double lr_decay_floor = 0.1;  // exponential decay target within each phase span
  double adam_beta1 = 0.9, adam_beta2 = 0.999, adam_eps = 1e-8;

  void validate() const;
  int64_t phase2_start() const { return warmup_steps + phase1_extra_steps; }
};

enum class Phase { kWarmup, kPhase1, kPhase2 };

Phase phase_of(const Schedule& schedule, int64_t step);
const char* phase_name(Phase phase);
// Base rate decayed exponentially within the current phase span; phase 2
// restarts at the base rate (a 10x warm restart over the decayed floor).
double learning_rate_at(const Schedule& schedule, int64_t step);

// Parameter blocks updated in a phase; everything else is frozen. Phase 2
// freezes the root-pose branch and enables the fine stack.
std::vector<std::string> trainable_block_names(Phase phase, bool fine_enabled);
// Loss terms present in the report for a phase; anything absent is disabled.
std::vector<std::string> enabled_terms(Phase phase, bool fine_enabled);

struct TrainOptions {
  Schedule schedule;
  LossWeights weights;
  uint64_t seed = 0;
  int frames_per_batch = 8;
  double flow_boost = 10.0;  // warmup multiplier on the flow weight, decays linearly to 1
  double active_fraction = 0.5;
  double active_half_life = 500.0;
  int holdout_every = 0;  // hold frame_in_video % n == n/2 out of training
  bool fine_enabled = true;
  int quad_neighbors = 6;
  double quad_noise_scale = 0.02;
  double mask_dilation = 5.0;
  int bone_reinit_grid = 32;
  double scene_radius = 0.6;
  int64_t checkpoint_interval = 2000;
  std::filesystem::path out_dir;  // empty disables checkpoints/logs in run()
};

// Single-sequence stochastic optimizer over a FieldBundle. Deterministic:
// batches, jitter and noise come from counter-based streams keyed on
// (seed, step, ...), chunks reduce in a fixed order, and checkpoints carry
// the optimizer moments and the active-sampling error map.
class Trainer {
 public:
  Trainer(FieldBundle& bundle, const VideoCollection& data, const TrainOptions& options);

  // One optimization step (the caller is responsible for transition()).
  LossReport step();
  // Bone/learning-rate reinitialization at phase boundaries; no-op elsewhere.
  void transition();
  // Runs [current, until): transitions, steps, logging, checkpoints.
  void run(int64_t until, std::ostream* log);

  int64_t current_step() const { return step_; }
  Phase phase() const { return phase_of(options_.schedule, step_); }
  bool frame_held_out(int global_frame) const;
  const std::vector<int>& trainable_frames() const { return trainable_frames_; }
  const Eigen::VectorXd& error_map(int global_frame) const { return error_map_[global_frame]; }
  void set_error_map(int global_frame, const Eigen::VectorXd& map);  // test hook

  struct Chunk {
    int frame = 0;
    std::vector<int> pixel_indices;  // y * width + x
  };
  std::vector<Chunk> sample_batch();

  std::string log_line(const LossReport& report) const;

  void save_checkpoint(const std::filesystem::path& path) const;
  void load_checkpoint(const std::filesystem::path& path);

 private:
  LossReport step_impl();
  void reinitialize_bones();
  void update_error_map(const std::vector<Chunk>& chunks,
                        const std::vector<std::vector<double>>& errors);
  RigidTransform init_pose_of(int global_frame) const;
  std::vector<RigidTransform> all_init_poses() const;

  FieldBundle& bundle_;
  const VideoCollection& data_;
  TrainOptions options_;
  int64_t step_ = 0;
  std::vector<Eigen::VectorXd> error_map_;        // per global frame, w*h
  std::vector<std::vector<int>> sample_pixels_;   // dilated-mask pixel indices
  std::vector<int> trainable_frames_;
  std::vector<std::pair<int, int>> camera_pairs_;  // consecutive same-video frames
};

}  // namespace nrr
