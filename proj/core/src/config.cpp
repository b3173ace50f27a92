// Copyright Contributors to the nrr Project
// SPDX-License-Identifier: Apache-2.0
#include "nrr/config.h"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace nrr {

namespace {

std::string format_double(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

bool parse_bool(const std::string& s) {
  if (s == "1" || s == "true" || s == "on") return true;
  if (s == "0" || s == "false" || s == "off") return false;
  throw std::invalid_argument("expected a boolean, got '" + s + "'");
}

ConfigKey int_key(const std::string& name, const std::string& desc, int64_t RunConfig::*member) {
  return {name, KeyKind::kInt, desc,
          [member](const RunConfig& c) { return std::to_string(c.*member); },
          [member, name](RunConfig& c, const std::string& v) {
            try {
              c.*member = std::stoll(v);
            } catch (...) {
              throw std::invalid_argument("key '" + name + "' expects an integer, got '" + v + "'");
            }
          }};
}

ConfigKey double_key(const std::string& name, const std::string& desc,
                     double RunConfig::*member) {
  return {name, KeyKind::kDouble, desc,
          [member](const RunConfig& c) { return format_double(c.*member); },
          [member, name](RunConfig& c, const std::string& v) {
            try {
              c.*member = std::stod(v);
            } catch (...) {
              throw std::invalid_argument("key '" + name + "' expects a number, got '" + v + "'");
            }
          }};
}

ConfigKey string_key(const std::string& name, const std::string& desc,
                     std::string RunConfig::*member) {
  return {name, KeyKind::kString, desc, [member](const RunConfig& c) { return c.*member; },
          [member](RunConfig& c, const std::string& v) { c.*member = v; }};
}

ConfigKey bool_key(const std::string& name, const std::string& desc, bool RunConfig::*member) {
  return {name, KeyKind::kBool, desc,
          [member](const RunConfig& c) { return c.*member ? "true" : "false"; },
          [member](RunConfig& c, const std::string& v) { c.*member = parse_bool(v); }};
}

std::vector<ConfigKey> build_keys() {
  std::vector<ConfigKey> k;
  k.push_back(string_key("data_root", "dataset root directory", &RunConfig::data_root));
  k.push_back(string_key("out_root", "output directory (checkpoints, logs, renders)",
                         &RunConfig::out_root));
  k.push_back(string_key("preset", "configuration preset: paper | desk", &RunConfig::preset));
  k.push_back(int_key("seed", "global random seed", &RunConfig::seed));

  k.push_back(int_key("total_steps", "optimization steps", &RunConfig::total_steps));
  k.push_back(int_key("warmup_steps", "warmup steps with the boosted, decaying flow weight",
                      &RunConfig::warmup_steps));
  k.push_back(int_key("phase1_extra_steps", "coarse-only steps after warmup",
                      &RunConfig::phase1_extra_steps));
  k.push_back(int_key("batch_rays", "rays per optimization step", &RunConfig::batch_rays));
  k.push_back(int_key("coarse_samples", "uniform samples per ray", &RunConfig::coarse_samples));
  k.push_back(int_key("fine_samples", "importance samples merged per ray",
                      &RunConfig::fine_samples));
  k.push_back(int_key("frames_per_batch", "frames mixed into each ray batch",
                      &RunConfig::frames_per_batch));
  k.push_back(double_key("learning_rate", "Adam base learning rate", &RunConfig::learning_rate));
  k.push_back(double_key("lr_decay_floor", "per-phase exponential decay target fraction",
                         &RunConfig::lr_decay_floor));
  k.push_back(int_key("checkpoint_interval", "steps between checkpoints",
                      &RunConfig::checkpoint_interval));
  k.push_back(double_key("flow_boost", "warmup flow-weight boost factor, decays linearly to 1",
                         &RunConfig::flow_boost));
  k.push_back(double_key("active_fraction", "phase-2 fraction of rays drawn from high-error pixels",
                         &RunConfig::active_fraction));
  k.push_back(double_key("active_half_life", "error-map EMA half life in steps",
                         &RunConfig::active_half_life));
  k.push_back(int_key("holdout_every",
                      "hold every n-th frame out of training (0 disables holdout)",
                      &RunConfig::holdout_every));
  k.push_back(bool_key("fine_enabled", "enable the fine branch in phase 2",
                       &RunConfig::fine_enabled));

  k.push_back(double_key("w_pho_f", "fine photometric weight", &RunConfig::w_pho_f));
  k.push_back(double_key("w_sil_f", "fine silhouette weight", &RunConfig::w_sil_f));
  k.push_back(double_key("w_quad", "quadratic smoothness weight", &RunConfig::w_quad));
  k.push_back(double_key("w_pho_c", "coarse photometric weight", &RunConfig::w_pho_c));
  k.push_back(double_key("w_sil_c", "coarse silhouette weight", &RunConfig::w_sil_c));
  k.push_back(double_key("w_flow", "optical flow weight", &RunConfig::w_flow));
  k.push_back(double_key("w_reg", "CSE regularization weight", &RunConfig::w_reg));
  k.push_back(double_key("w_quad_temporal", "temporal share inside the quadratic term",
                         &RunConfig::w_quad_temporal));
  k.push_back(int_key("quad_neighbors", "perturbation draws per point in the smoothness term",
                      &RunConfig::quad_neighbors));
  k.push_back(double_key("quad_noise_scale",
                         "variance of the smoothness perturbations (0 = 1% of bbox diagonal)",
                         &RunConfig::quad_noise_scale));

  k.push_back(int_key("pos_bands", "positional encoding bands", &RunConfig::pos_bands));
  k.push_back(int_key("dir_bands", "view-direction encoding bands", &RunConfig::dir_bands));
  k.push_back(int_key("hidden", "canonical/pose network width", &RunConfig::hidden));
  k.push_back(int_key("layers", "canonical/pose network linear layers", &RunConfig::layers));
  k.push_back(int_key("quad_hidden", "quadratic-coefficient network width",
                      &RunConfig::quad_hidden));
  k.push_back(int_key("quad_layers", "quadratic-coefficient network linear layers",
                      &RunConfig::quad_layers));
  k.push_back(int_key("embed_dim", "canonical embedding dimension", &RunConfig::embed_dim));
  k.push_back(int_key("env_code_dim", "per-frame environment code dimension",
                      &RunConfig::env_code_dim));
  k.push_back(int_key("pose_code_dim", "per-frame root/bone pose code dimension",
                      &RunConfig::pose_code_dim));
  k.push_back(int_key("deform_code_dim", "per-frame deformation code dimension",
                      &RunConfig::deform_code_dim));
  k.push_back(int_key("bones", "bone count", &RunConfig::bones));
  k.push_back(double_key("init_alpha", "initial density sharpness scale", &RunConfig::init_alpha));
  k.push_back(int_key("sphere_init_steps", "SDF sphere pre-fit steps",
                      &RunConfig::sphere_init_steps));
  k.push_back(double_key("sphere_init_radius", "SDF sphere pre-fit radius",
                         &RunConfig::sphere_init_radius));

  k.push_back(double_key("scene_radius", "canonical bounding radius for ray near/far",
                         &RunConfig::scene_radius));
  k.push_back(int_key("mesh_resolution", "marching cubes grid resolution",
                      &RunConfig::mesh_resolution));
  k.push_back(double_key("mask_dilation", "silhouette dilation radius for ray sampling (px)",
                         &RunConfig::mask_dilation));
  k.push_back(int_key("bone_reinit_grid", "marching cubes resolution for bone reinitialization",
                      &RunConfig::bone_reinit_grid));
  k.push_back(int_key("surface_cache_grid", "marching cubes resolution for the CSE surface cache",
                      &RunConfig::surface_cache_grid));
  k.push_back(int_key("surface_cache_interval", "steps between CSE surface cache rebuilds",
                      &RunConfig::surface_cache_interval));
  k.push_back(int_key("eval_samples", "surface samples per mesh for metrics",
                      &RunConfig::eval_samples));
  k.push_back(bool_key("eval_align", "similarity-align meshes before metrics",
                       &RunConfig::eval_align));

  k.push_back(string_key("scene", "synthetic scene: sphere | ellipsoid | capsule",
                         &RunConfig::scene));
  k.push_back(int_key("synth_videos", "synthetic videos", &RunConfig::synth_videos));
  k.push_back(int_key("synth_frames", "frames per synthetic video", &RunConfig::synth_frames));
  k.push_back(int_key("synth_size", "synthetic image size", &RunConfig::synth_size));
  k.push_back(double_key("synth_bend", "peak bend angle (radians)", &RunConfig::synth_bend));
  k.push_back(double_key("synth_bulge", "peak quadratic bulge fraction", &RunConfig::synth_bulge));
  k.push_back(double_key("synth_period", "motion period in frames", &RunConfig::synth_period));
  k.push_back(int_key("synth_lights", "illumination states (1 or 2)", &RunConfig::synth_lights));
  k.push_back(string_key("synth_camera", "camera path: orbit | translate | static",
                         &RunConfig::synth_camera));
  k.push_back(double_key("synth_camera_radius", "camera distance", &RunConfig::synth_camera_radius));
  k.push_back(double_key("synth_orbit_degrees", "orbit arc per video",
                         &RunConfig::synth_orbit_degrees));
  k.push_back(double_key("synth_translate_step", "camera translation per frame",
                         &RunConfig::synth_translate_step));
  k.push_back(double_key("synth_focal", "focal length in pixels (0 = auto framing)",
                         &RunConfig::synth_focal));
  return k;
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = build_keys();
  return keys;
}

RunConfig default_config() { return RunConfig{}; }

void apply_preset(RunConfig& c, const std::string& name) {
  if (name == "paper") {
    const RunConfig defaults;
    const std::string data = c.data_root, out = c.out_root;
    const int64_t seed = c.seed;
    c = defaults;
    c.data_root = data;
    c.out_root = out;
    c.seed = seed;
    c.preset = "paper";
    return;
  }
  if (name == "desk") {
    apply_preset(c, "paper");
    c.preset = "desk";
    c.total_steps = 20000;
    c.warmup_steps = 1000;
    c.phase1_extra_steps = 2200;
    c.batch_rays = 128;
    c.coarse_samples = 32;
    c.fine_samples = 16;
    c.frames_per_batch = 4;
    c.checkpoint_interval = 1000;
    c.pos_bands = 6;
    c.dir_bands = 2;
    c.hidden = 64;
    c.layers = 4;
    c.quad_hidden = 48;
    c.quad_layers = 4;
    c.env_code_dim = 16;
    c.pose_code_dim = 32;
    c.deform_code_dim = 32;
    c.bones = 6;
    c.sphere_init_steps = 2000;
    c.mesh_resolution = 128;
    c.surface_cache_grid = 48;
    c.holdout_every = 10;
    c.eval_samples = 4000;
    return;
  }
  throw std::invalid_argument("unknown preset '" + name + "' (valid: paper, desk)");
}

void set_config_key(RunConfig& config, const std::string& key, const std::string& value) {
  for (const auto& k : config_keys()) {
    if (k.name == key) {
      k.set(config, value);
      return;
    }
  }
  throw std::invalid_argument("unknown config key '" + key + "'");
}

void apply_config_file(RunConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path.string());
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::istringstream ss(line);
    std::string key, value;
    if (!(ss >> key)) continue;
    if (!(ss >> value))
      throw std::invalid_argument(path.string() + ":" + std::to_string(lineno) +
                                  ": key '" + key + "' has no value");
    set_config_key(config, key, value);
  }
}

void write_config_file(const RunConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path);
  for (const auto& k : config_keys()) out << k.name << " " << k.get(config) << "\n";
}

FieldConfig make_field_config(const RunConfig& c, int frame_count) {
  FieldConfig f;
  f.pos_bands = static_cast<int>(c.pos_bands);
  f.dir_bands = static_cast<int>(c.dir_bands);
  f.hidden = static_cast<int>(c.hidden);
  f.layers = static_cast<int>(c.layers);
  f.quad_hidden = static_cast<int>(c.quad_hidden);
  f.quad_layers = static_cast<int>(c.quad_layers);
  f.embed_dim = static_cast<int>(c.embed_dim);
  f.env_code_dim = static_cast<int>(c.env_code_dim);
  f.pose_code_dim = static_cast<int>(c.pose_code_dim);
  f.deform_code_dim = static_cast<int>(c.deform_code_dim);
  f.bone_count = static_cast<int>(c.bones);
  f.frame_count = frame_count;
  f.init_alpha = c.init_alpha;
  f.bone_init_radius = c.sphere_init_radius;
  f.seed = static_cast<uint64_t>(c.seed) + 1;
  return f;
}

LossWeights make_loss_weights(const RunConfig& c) {
  LossWeights w;
  w.pho_f = c.w_pho_f;
  w.sil_f = c.w_sil_f;
  w.quad = c.w_quad;
  w.pho_c = c.w_pho_c;
  w.sil_c = c.w_sil_c;
  w.flow = c.w_flow;
  w.reg = c.w_reg;
  w.quad_temporal = c.w_quad_temporal;
  return w;
}

double effective_quad_noise(const RunConfig& c) {
  if (c.quad_noise_scale > 0.0) return c.quad_noise_scale;
  return 0.01 * 2.0 * c.scene_radius * std::sqrt(3.0);
}

}  // namespace nrr
