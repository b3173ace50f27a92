// Copyright Contributors to the nrr Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "nrr/fields.h"
#include "nrr/losses.h"

namespace nrr {

// Flat run configuration. Defaults are the documented paper-scale values;
// the desk preset swaps in a configuration sized for a single workstation.
struct RunConfig {
  std::string data_root;
  std::string out_root = "out";
  std::string preset = "paper";
  int64_t seed = 0;

  // schedule
  int64_t total_steps = 224000;
  int64_t warmup_steps = 9600;
  int64_t phase1_extra_steps = 14400;
  int64_t batch_rays = 416;
  int64_t coarse_samples = 256;
  int64_t fine_samples = 128;
  int64_t frames_per_batch = 8;
  double learning_rate = 5e-4;
  double lr_decay_floor = 0.1;
  int64_t checkpoint_interval = 2000;
  double flow_boost = 10.0;
  double active_fraction = 0.5;
  double active_half_life = 500.0;
  int64_t holdout_every = 0;
  bool fine_enabled = true;

  // loss weights
  double w_pho_f = 0.1;
  double w_sil_f = 1.0;
  double w_quad = 1e3;
  double w_pho_c = 0.1;
  double w_sil_c = 1.0;
  double w_flow = 0.1;
  double w_reg = 0.02;
  double w_quad_temporal = 1.0;
  int64_t quad_neighbors = 6;
  double quad_noise_scale = 0.0;  // 0 = 1% of the scene bounding-box diagonal

  // field sizes
  int64_t pos_bands = 10;
  int64_t dir_bands = 4;
  int64_t hidden = 256;
  int64_t layers = 8;
  int64_t quad_hidden = 128;
  int64_t quad_layers = 6;
  int64_t embed_dim = 16;
  int64_t env_code_dim = 64;
  int64_t pose_code_dim = 128;
  int64_t deform_code_dim = 128;
  int64_t bones = 25;
  double init_alpha = 0.1;
  int64_t sphere_init_steps = 1500;
  double sphere_init_radius = 0.3;

  // rendering / meshing / eval
  double scene_radius = 0.6;
  int64_t mesh_resolution = 512;
  double mask_dilation = 5.0;
  int64_t bone_reinit_grid = 32;
  int64_t surface_cache_grid = 64;
  int64_t surface_cache_interval = 2000;
  int64_t eval_samples = 10000;
  bool eval_align = true;

  // synthetic scenes
  std::string scene = "capsule";
  int64_t synth_videos = 3;
  int64_t synth_frames = 30;
  int64_t synth_size = 64;
  double synth_bend = 0.5;
  double synth_bulge = 0.05;
  double synth_period = 30.0;
  int64_t synth_lights = 2;
  std::string synth_camera = "orbit";
  double synth_camera_radius = 2.2;
  double synth_orbit_degrees = 150.0;
  double synth_translate_step = 0.0;
  double synth_focal = 0.0;
};

enum class KeyKind { kInt, kDouble, kString, kBool };

struct ConfigKey {
  std::string name;
  KeyKind kind;
  std::string description;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

// Every RunConfig field, in declaration order.
const std::vector<ConfigKey>& config_keys();

RunConfig default_config();  // paper preset
// "paper" restores the documented defaults, "desk" the workstation-sized
// configuration; unknown names are rejected.
void apply_preset(RunConfig& config, const std::string& name);
// One "key value" pair per line, '#' comments. Unknown keys are rejected.
void apply_config_file(RunConfig& config, const std::filesystem::path& path);
void set_config_key(RunConfig& config, const std::string& key, const std::string& value);
void write_config_file(const RunConfig& config, const std::filesystem::path& path);

FieldConfig make_field_config(const RunConfig& config, int frame_count);
LossWeights make_loss_weights(const RunConfig& config);
// Applies the 1%-of-diagonal fallback when quad_noise_scale is 0.
double effective_quad_noise(const RunConfig& config);

}  // namespace nrr
