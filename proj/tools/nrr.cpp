// Copyright Contributors to the nrr Project
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: synth, train, render, mesh, eval.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "nrr/config.h"
#include "nrr/dataset.h"
#include "nrr/evaluate.h"
#include "nrr/renderer.h"
#include "nrr/synthetic.h"
#include "nrr/trainer.h"

namespace fs = std::filesystem;
using namespace nrr;

namespace {

struct CliState {
  std::string config_file;
  std::map<std::string, std::string> flags;  // config keys set on the command line
};

// Every RunConfig key becomes a --key flag on each subcommand; values merge
// defaults < preset < config file < flags.
void add_config_flags(CLI::App* cmd, CliState* state) {
  cmd->add_option("--config", state->config_file, "key-value config file");
  for (const auto& key : config_keys()) {
    cmd->add_option_function<std::string>(
        "--" + key.name,
        [state, name = key.name](const std::string& v) { state->flags[name] = v; },
        key.description);
  }
}

RunConfig resolve_config(const CliState& state) {
  RunConfig config = default_config();
  // Preset first (flag wins over file), then file values, then flags.
  std::string preset;
  if (!state.config_file.empty()) {
    RunConfig probe = default_config();
    apply_config_file(probe, state.config_file);
    preset = probe.preset;
  }
  if (auto it = state.flags.find("preset"); it != state.flags.end()) preset = it->second;
  if (!preset.empty()) apply_preset(config, preset);
  if (!state.config_file.empty()) apply_config_file(config, state.config_file);
  for (const auto& [key, value] : state.flags)
    if (key != "preset") set_config_key(config, key, value);
  if (const char* env = std::getenv("NRR_OUT_ROOT"); env && *env) config.out_root = env;
  return config;
}

SyntheticScene scene_from_config(const RunConfig& c) {
  SyntheticScene scene;
  scene.shape = parse_shape(c.scene);
  scene.videos = static_cast<int>(c.synth_videos);
  scene.frames_per_video = static_cast<int>(c.synth_frames);
  scene.image_size = static_cast<int>(c.synth_size);
  scene.bend_amplitude = c.synth_bend;
  scene.bulge_amplitude = c.synth_bulge;
  scene.motion_period = c.synth_period;
  scene.lights = static_cast<int>(c.synth_lights);
  if (c.synth_camera == "orbit")
    scene.camera_path = CameraPath::kOrbit;
  else if (c.synth_camera == "translate")
    scene.camera_path = CameraPath::kTranslate;
  else if (c.synth_camera == "static")
    scene.camera_path = CameraPath::kStatic;
  else
    throw std::invalid_argument("unknown camera path '" + c.synth_camera +
                                "' (valid: orbit, translate, static)");
  scene.camera_radius = c.synth_camera_radius;
  scene.orbit_degrees = c.synth_orbit_degrees;
  scene.translate_step = c.synth_translate_step;
  scene.focal = c.synth_focal;
  return scene;
}

TrainOptions train_options_from_config(const RunConfig& c, const fs::path& out_dir) {
  TrainOptions opt;
  opt.schedule.warmup_steps = c.warmup_steps;
  opt.schedule.phase1_extra_steps = c.phase1_extra_steps;
  opt.schedule.total_steps = c.total_steps;
  opt.schedule.batch_rays = static_cast<int>(c.batch_rays);
  opt.schedule.coarse_samples = static_cast<int>(c.coarse_samples);
  opt.schedule.fine_samples = static_cast<int>(c.fine_samples);
  opt.schedule.learning_rate = c.learning_rate;
  opt.schedule.lr_decay_floor = c.lr_decay_floor;
  opt.weights = make_loss_weights(c);
  opt.seed = static_cast<uint64_t>(c.seed);
  opt.frames_per_batch = static_cast<int>(c.frames_per_batch);
  opt.flow_boost = c.flow_boost;
  opt.active_fraction = c.active_fraction;
  opt.active_half_life = c.active_half_life;
  opt.holdout_every = static_cast<int>(c.holdout_every);
  opt.fine_enabled = c.fine_enabled;
  opt.quad_neighbors = static_cast<int>(c.quad_neighbors);
  opt.quad_noise_scale = effective_quad_noise(c);
  opt.mask_dilation = c.mask_dilation;
  opt.bone_reinit_grid = static_cast<int>(c.bone_reinit_grid);
  opt.scene_radius = c.scene_radius;
  opt.checkpoint_interval = c.checkpoint_interval;
  opt.out_dir = out_dir;
  return opt;
}

RenderParams render_params_from_config(const RunConfig& c) {
  RenderParams p;
  p.coarse_samples = static_cast<int>(c.coarse_samples);
  p.fine_samples = static_cast<int>(c.fine_samples);
  p.scene_radius = c.scene_radius;
  p.deterministic = true;
  return p;
}

int cmd_synth(const RunConfig& config) {
  if (config.data_root.empty()) throw std::invalid_argument("synth: --data_root is required");
  const SyntheticScene scene = scene_from_config(config);
  const SyntheticSummary summary = generate_synthetic(scene, config.data_root);
  std::cout << "wrote " << summary.total_frames << " frames over " << summary.videos
            << " videos to " << summary.root.string() << "\n";
  return 0;
}

int cmd_train(const RunConfig& config, const std::string& resume) {
  if (config.data_root.empty()) throw std::invalid_argument("train: --data_root is required");
  const VideoCollection data = load_dataset(config.data_root);
  FieldBundle bundle(make_field_config(config, data.total_frames));

  const fs::path out_dir = config.out_root;
  fs::create_directories(out_dir);
  write_config_file(config, out_dir / "config.txt");
  TrainOptions options = train_options_from_config(config, out_dir);
  Trainer trainer(bundle, data, options);

  if (!resume.empty()) {
    trainer.load_checkpoint(resume);
    std::cout << "resumed from " << resume << " at step " << trainer.current_step() << "\n";
  } else {
    bundle.init_sphere_sdf(config.sphere_init_radius,
                           static_cast<int>(config.sphere_init_steps));
  }

  std::ofstream log(out_dir / "loss_log.txt", std::ios::app);
  trainer.run(config.total_steps, &log);
  std::cout << "trained to step " << trainer.current_step() << "; checkpoints in "
            << out_dir.string() << "\n";
  return 0;
}

// Loads dataset + bundle + checkpoint for the inference commands.
struct Loaded {
  VideoCollection data;
  std::unique_ptr<FieldBundle> bundle;
};

Loaded load_for_inference(const RunConfig& config, const std::string& checkpoint) {
  if (config.data_root.empty()) throw std::invalid_argument("--data_root is required");
  Loaded loaded;
  loaded.data = load_dataset(config.data_root);
  loaded.bundle =
      std::make_unique<FieldBundle>(make_field_config(config, loaded.data.total_frames));
  TrainOptions options = train_options_from_config(config, fs::path());
  Trainer trainer(*loaded.bundle, loaded.data, options);
  trainer.load_checkpoint(checkpoint);
  return loaded;
}

int cmd_render(const RunConfig& config, const std::string& checkpoint, int frame,
               const std::string& pose_spec, const std::string& branch) {
  Loaded loaded = load_for_inference(config, checkpoint);
  if (frame < 0 || frame >= loaded.data.total_frames)
    throw std::invalid_argument("render: frame out of range");
  blend_holdout_codes(*loaded.bundle, loaded.data, static_cast<int>(config.holdout_every));

  std::optional<RigidTransform> pose_override;
  if (!pose_spec.empty()) {
    std::istringstream ss(pose_spec);
    RigidTransform g;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c)
        if (!(ss >> g.rotation(r, c)))
          throw std::invalid_argument("render: --pose expects 12 numbers (rotation + translation)");
    for (int r = 0; r < 3; ++r)
      if (!(ss >> g.translation(r)))
        throw std::invalid_argument("render: --pose expects 12 numbers (rotation + translation)");
    pose_override = g;
  }

  const FrameObservation& obs = loaded.data.frame(frame);
  const Video& video = loaded.data.video_of(frame);
  const bool want_fine = branch != "coarse" && config.fine_enabled;
  FrameRender render = render_frame(
      *loaded.bundle, video.camera, obs.init_root_pose.value_or(RigidTransform::identity()),
      frame, render_params_from_config(config), want_fine, pose_override);

  fs::create_directories(config.out_root);
  char tag[32];
  std::snprintf(tag, sizeof(tag), "f%05d", frame);
  const fs::path base = fs::path(config.out_root) / tag;
  if (branch != "fine") {
    write_png_rgb(base.string() + "_coarse_rgb.png", render.color_coarse);
    write_png_gray(base.string() + "_coarse_opacity.png", render.opacity_coarse);
  }
  if (want_fine) {
    write_png_rgb(base.string() + "_fine_rgb.png", render.color_fine);
    write_png_gray(base.string() + "_fine_opacity.png", render.opacity_fine);
  }
  std::cout << "wrote renders to " << config.out_root << "\n";
  return 0;
}

int cmd_mesh(const RunConfig& config, const std::string& checkpoint, int frame, bool cse_colors,
             const std::string& branch) {
  Loaded loaded = load_for_inference(config, checkpoint);
  blend_holdout_codes(*loaded.bundle, loaded.data, static_cast<int>(config.holdout_every));
  const Branch which = branch == "coarse" ? Branch::kCoarse : Branch::kFine;

  const int resolution = static_cast<int>(config.mesh_resolution);
  GridBounds bounds{Eigen::Vector3d::Constant(-config.scene_radius),
                    Eigen::Vector3d::Constant(config.scene_radius)};
  TriMesh mesh = marching_cubes_grid(
      sample_sdf_grid(*loaded.bundle, which, resolution, config.scene_radius), resolution, bounds);
  if (mesh.empty()) {
    std::cerr << "error: the SDF has no zero level set inside the scene bounds\n";
    return 1;
  }

  if (frame >= 0) {
    if (frame >= loaded.data.total_frames) throw std::invalid_argument("mesh: frame out of range");
    const FrameObservation& obs = loaded.data.frame(frame);
    mesh = pose_mesh(*loaded.bundle, mesh, frame,
                     obs.init_root_pose.value_or(RigidTransform::identity()),
                     which == Branch::kFine);
  }

  if (cse_colors) {
    // Embedding-derived coloring: first three embedding channels, normalized.
    Eigen::Matrix3Xd pts(3, static_cast<Eigen::Index>(mesh.vertices.size()));
    for (size_t i = 0; i < mesh.vertices.size(); ++i) pts.col(i) = mesh.vertices[i];
    const Eigen::MatrixXd emb = loaded.bundle->embedding_plain(pts);
    mesh.colors.resize(mesh.vertices.size());
    Eigen::Vector3d lo = emb.topRows(3).rowwise().minCoeff();
    Eigen::Vector3d hi = emb.topRows(3).rowwise().maxCoeff();
    for (size_t i = 0; i < mesh.vertices.size(); ++i)
      mesh.colors[i] = (emb.block<3, 1>(0, static_cast<Eigen::Index>(i)) - lo)
                           .cwiseQuotient((hi - lo).cwiseMax(1e-9));
  }

  fs::create_directories(config.out_root);
  char name[48];
  if (frame >= 0)
    std::snprintf(name, sizeof(name), "mesh_f%05d.obj", frame);
  else
    std::snprintf(name, sizeof(name), "mesh_canonical.obj");
  const fs::path out = fs::path(config.out_root) / name;
  save_obj(out, mesh);
  std::cout << "wrote " << out.string() << " (" << mesh.vertices.size() << " vertices)\n";
  return 0;
}

int cmd_eval(const RunConfig& config, const std::string& checkpoint, bool holdout_only) {
  Loaded loaded = load_for_inference(config, checkpoint);
  blend_holdout_codes(*loaded.bundle, loaded.data, static_cast<int>(config.holdout_every));

  // Ground truth must exist for mesh metrics; probe the first video.
  bool any_gt = false;
  for (const Video& video : loaded.data.videos)
    if (fs::is_directory(fs::path(config.data_root) / video.name / "gt")) any_gt = true;

  EvalOptions options;
  options.render = render_params_from_config(config);
  options.fine_branch = config.fine_enabled;
  options.mesh_resolution = static_cast<int>(std::min<int64_t>(config.mesh_resolution, 64));
  options.mesh_extent = config.scene_radius;
  options.mesh_metrics.samples = static_cast<int>(config.eval_samples);
  options.mesh_metrics.align = config.eval_align;
  options.holdout_only = holdout_only;
  options.holdout_every = static_cast<int>(config.holdout_every);
  if (any_gt) options.gt_root = config.data_root;

  const auto results = evaluate_dataset(*loaded.bundle, loaded.data, options);
  if (results.empty()) {
    std::cerr << "error: no frames selected for evaluation\n";
    return 1;
  }
  fs::create_directories(config.out_root);
  const fs::path out = fs::path(config.out_root) / "metrics.txt";
  write_metric_report(out, results);
  std::cout << "wrote " << out.string() << " (" << results.size() << " frames)\n";
  std::ifstream in(out);
  std::string line;
  while (std::getline(in, line))
    if (line.rfind("mean/", 0) == 0) std::cout << line << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"coarse-to-fine non-rigid radiance-field reconstruction from video"};
  app.require_subcommand(1);

  CliState synth_state, train_state, render_state, mesh_state, eval_state;
  std::string resume, pose_spec, checkpoint;
  std::string render_branch = "both", mesh_branch = "fine";
  int frame = -1;
  bool cse_colors = false, holdout_only = false;

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset with ground truth");
  add_config_flags(synth, &synth_state);
  synth->add_option("--videos", [&](const CLI::results_t& r) {
    synth_state.flags["synth_videos"] = r[0];
    return true;
  }, "alias for --synth_videos");
  synth->add_option("--frames", [&](const CLI::results_t& r) {
    synth_state.flags["synth_frames"] = r[0];
    return true;
  }, "alias for --synth_frames");
  synth->add_option("--size", [&](const CLI::results_t& r) {
    synth_state.flags["synth_size"] = r[0];
    return true;
  }, "alias for --synth_size");

  CLI::App* train = app.add_subcommand("train", "optimize a model on a dataset");
  add_config_flags(train, &train_state);
  train->add_option("--resume", resume, "checkpoint to resume from");

  CLI::App* render = app.add_subcommand("render", "render a frame or novel pose");
  add_config_flags(render, &render_state);
  render->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  render->add_option("--frame", frame, "frame index")->required();
  render->add_option("--pose", pose_spec, "novel camera pose (12 numbers, rotation + translation)");
  render->add_option("--branch", render_branch, "coarse | fine | both");

  CLI::App* mesh = app.add_subcommand("mesh", "extract the zero level-set mesh");
  add_config_flags(mesh, &mesh_state);
  mesh->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  mesh->add_option("--frame", frame, "pose the mesh to this frame (-1 = canonical)");
  mesh->add_flag("--cse-colors", cse_colors, "color vertices by canonical embedding");
  mesh->add_option("--branch", mesh_branch, "fine | coarse SDF to mesh");

  CLI::App* eval = app.add_subcommand("eval", "metrics against observations and ground truth");
  add_config_flags(eval, &eval_state);
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval->add_flag("--holdout-only", holdout_only, "evaluate held-out frames only");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return cmd_synth(resolve_config(synth_state));
    if (train->parsed()) return cmd_train(resolve_config(train_state), resume);
    if (render->parsed())
      return cmd_render(resolve_config(render_state), checkpoint, frame, pose_spec, render_branch);
    if (mesh->parsed())
      return cmd_mesh(resolve_config(mesh_state), checkpoint, frame, cse_colors, mesh_branch);
    if (eval->parsed()) return cmd_eval(resolve_config(eval_state), checkpoint, holdout_only);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
