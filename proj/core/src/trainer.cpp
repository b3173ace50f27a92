// Copyright Contributors to the nrr Project
// SPDX-License-Identifier: Apache-2.0
#include "nrr/trainer.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <ostream>
#include <sstream>

#include "nrr/rng.h"

namespace nrr {

using ad::Tape;
using ad::Var;

void Schedule::validate() const {
  if (warmup_steps < 0 || phase1_extra_steps < 0 || total_steps <= 0)
    throw std::invalid_argument("Schedule: step counts must be positive");
  if (warmup_steps + phase1_extra_steps > total_steps)
    throw std::invalid_argument("Schedule: warmup + phase1 exceed total steps");
  if (batch_rays <= 0 || coarse_samples <= 0 || fine_samples <= 0)
    throw std::invalid_argument("Schedule: counts must be positive");
}

Phase phase_of(const Schedule& s, int64_t step) {
  if (step < s.warmup_steps) return Phase::kWarmup;
  if (step < s.phase2_start()) return Phase::kPhase1;
  return Phase::kPhase2;
}

const char* phase_name(Phase phase) {
  switch (phase) {
    case Phase::kWarmup: return "warmup";
    case Phase::kPhase1: return "phase1";
    case Phase::kPhase2: return "phase2";
  }
  return "?";
}

double learning_rate_at(const Schedule& s, int64_t step) {
  int64_t seg_start = 0, seg_len = s.phase2_start();
  if (step >= s.phase2_start()) {
    seg_start = s.phase2_start();
    seg_len = s.total_steps - s.phase2_start();
  }
  const double frac =
      seg_len > 0 ? static_cast<double>(step - seg_start) / static_cast<double>(seg_len) : 0.0;
  return s.learning_rate * std::pow(s.lr_decay_floor, frac);
}

std::vector<std::string> trainable_block_names(Phase phase, bool fine_enabled) {
  std::vector<std::string> names = {"net.coarse_color", "net.coarse_sdf", "net.embed",
                                    "net.bone",         "alpha.log",      "code.env",
                                    "code.bone",        "bones.centers",  "bones.rotvec",
                                    "bones.logscale"};
  if (phase != Phase::kPhase2) {
    names.push_back("net.root");
    names.push_back("code.root");
  } else if (fine_enabled) {
    names.push_back("net.fine_color");
    names.push_back("net.fine_sdf");
    names.push_back("net.delta");
    names.push_back("net.quad");
    names.push_back("code.deform");
  }
  return names;
}

std::vector<std::string> enabled_terms(Phase phase, bool fine_enabled) {
  std::vector<std::string> terms = {"pho_c", "sil_c", "of", "cse3d", "cse2d_c",
                                    "cyc2d", "cyc3d", "cam"};
  if (phase == Phase::kPhase2 && fine_enabled) {
    terms.push_back("pho_f");
    terms.push_back("sil_f");
    terms.push_back("cse2d_f");
    terms.push_back("q_spatial");
    terms.push_back("q_temporal");
  }
  return terms;
}

Trainer::Trainer(FieldBundle& bundle, const VideoCollection& data, const TrainOptions& options)
    : bundle_(bundle), data_(data), options_(options) {
  options_.schedule.validate();
  if (bundle_.config().frame_count != data_.total_frames)
    throw std::invalid_argument("Trainer: bundle frame count does not match the dataset");

  error_map_.resize(data_.total_frames);
  sample_pixels_.resize(data_.total_frames);
  int global = 0;
  for (size_t v = 0; v < data_.videos.size(); ++v) {
    const Video& video = data_.videos[v];
    for (size_t f = 0; f < video.frames.size(); ++f, ++global) {
      const FrameObservation& obs = video.frames[f];
      error_map_[global] = Eigen::VectorXd::Zero(obs.mask.pixel_count());
      const ImageGray dilated = dilate_mask(obs.mask, options_.mask_dilation);
      for (size_t p = 0; p < dilated.pixel_count(); ++p)
        if (dilated.data[p] >= 0.5) sample_pixels_[global].push_back(static_cast<int>(p));
      if (sample_pixels_[global].empty())
        for (size_t p = 0; p < dilated.pixel_count(); ++p)
          sample_pixels_[global].push_back(static_cast<int>(p));
      if (!frame_held_out(global)) trainable_frames_.push_back(global);
      if (f + 1 < video.frames.size()) camera_pairs_.emplace_back(global, global + 1);
    }
  }
  if (trainable_frames_.empty()) throw std::invalid_argument("Trainer: every frame is held out");
}

bool Trainer::frame_held_out(int global_frame) const {
  if (options_.holdout_every <= 0) return false;
  const FrameObservation& obs = data_.frame(global_frame);
  return obs.frame_in_video % options_.holdout_every == options_.holdout_every / 2;
}

void Trainer::set_error_map(int global_frame, const Eigen::VectorXd& map) {
  error_map_[global_frame] = map;
}

RigidTransform Trainer::init_pose_of(int global_frame) const {
  const FrameObservation& obs = data_.frame(global_frame);
  return obs.init_root_pose.value_or(RigidTransform::identity());
}

std::vector<RigidTransform> Trainer::all_init_poses() const {
  std::vector<RigidTransform> poses(data_.total_frames);
  for (int t = 0; t < data_.total_frames; ++t) poses[t] = init_pose_of(t);
  return poses;
}

std::vector<Trainer::Chunk> Trainer::sample_batch() {
  RngStream rng(options_.seed, static_cast<uint64_t>(step_), 0xba7c);
  const Phase phase = phase_of(options_.schedule, step_);
  const int n_chunks =
      std::min<int>(options_.frames_per_batch, static_cast<int>(trainable_frames_.size()));
  const int base_rays = options_.schedule.batch_rays / n_chunks;
  int remainder = options_.schedule.batch_rays % n_chunks;

  std::vector<Chunk> chunks;
  for (int c = 0; c < n_chunks; ++c) {
    Chunk chunk;
    chunk.frame = trainable_frames_[rng.below(trainable_frames_.size())];
    const int rays = base_rays + (remainder-- > 0 ? 1 : 0);
    const auto& valid = sample_pixels_[chunk.frame];
    const Eigen::VectorXd& errors = error_map_[chunk.frame];

    int n_active = 0;
    if (phase == Phase::kPhase2)
      n_active = static_cast<int>(std::lround(options_.active_fraction * rays));

    if (n_active > 0) {
      // Sample proportionally to the recent photometric error over the
      // valid region (tiny floor keeps the distribution proper).
      std::vector<double> cdf(valid.size());
      double acc = 0.0;
      for (size_t i = 0; i < valid.size(); ++i) {
        acc += errors(valid[i]) + 1e-12;
        cdf[i] = acc;
      }
      for (int r = 0; r < n_active; ++r) {
        const double u = rng.uniform() * acc;
        const size_t i = std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin();
        chunk.pixel_indices.push_back(valid[std::min(i, valid.size() - 1)]);
      }
    }
    for (int r = n_active; r < rays; ++r)
      chunk.pixel_indices.push_back(valid[rng.below(valid.size())]);
    chunks.push_back(std::move(chunk));
  }
  return chunks;
}

LossReport Trainer::step() { return step_impl(); }

LossReport Trainer::step_impl() {
  const Schedule& sched = options_.schedule;
  const Phase phase = phase_of(sched, step_);
  const bool fine_on = phase == Phase::kPhase2 && options_.fine_enabled;

  LossWeights eff = options_.weights;
  if (phase == Phase::kWarmup && sched.warmup_steps > 0) {
    const double frac = static_cast<double>(step_) / static_cast<double>(sched.warmup_steps);
    eff.flow *= options_.flow_boost + (1.0 - options_.flow_boost) * frac;
  }

  for (ParamBlock* block : bundle_.blocks()) block->zero_grad();

  LossReport report;
  for (const std::string& term : enabled_terms(phase, options_.fine_enabled))
    report.parts[term] = 0.0;

  std::vector<Chunk> chunks = sample_batch();
  std::vector<std::vector<double>> chunk_errors(chunks.size());

  for (size_t ci = 0; ci < chunks.size(); ++ci) {
    const Chunk& chunk = chunks[ci];
    const FrameObservation& obs = data_.frame(chunk.frame);
    const Video& video = data_.videos[obs.video];
    const int width = obs.rgb.width;
    const int rays = static_cast<int>(chunk.pixel_indices.size());

    std::vector<Eigen::Vector2d> pixels(rays);
    ad::Mat observed(3, rays), pixel_mat(2, rays), mask_row(1, rays);
    for (int r = 0; r < rays; ++r) {
      const int px = chunk.pixel_indices[r] % width;
      const int py = chunk.pixel_indices[r] / width;
      pixels[r] = Eigen::Vector2d(px + 0.5, py + 0.5);
      pixel_mat.col(r) = pixels[r];
      observed.col(r) = obs.rgb.at(px, py);
      mask_row(0, r) = obs.mask.px(px, py)[0];
    }

    const int next = data_.next_in_video(chunk.frame);
    const bool next_usable = next >= 0 && !frame_held_out(next);

    Tape tape;
    ParamBinder binder(tape, true);
    const RigidTransform init_pose = init_pose_of(chunk.frame);
    RaySetup setup =
        make_ray_setup(video.camera, init_pose, chunk.frame, pixels, options_.scene_radius);
    FrameTransforms tf = build_frame_transforms(tape, binder, bundle_, chunk.frame, init_pose);
    RngStream jitter(options_.seed, static_cast<uint64_t>(step_), 0x7151, ci);
    BranchRender coarse =
        render_coarse(tape, binder, bundle_, tf, setup, sched.coarse_samples, &jitter);
    Var conf = tape.detach(coarse.opacity);

    struct Term {
      const char* name;
      Var value;
      double weight;
    };
    std::vector<Term> terms;

    terms.push_back({"pho_c", photometric_loss(tape, coarse.color, observed), eff.pho_c});
    terms.push_back(
        {"sil_c", silhouette_loss(tape, coarse.opacity, tape.constant(mask_row)), eff.sil_c});

    Var fwd_expected = forward_warp_var(tape, tf, coarse.expected);
    Var proj_expected = project_var(tape, setup, fwd_expected);
    terms.push_back({"cyc2d", cycle2d_loss(tape, proj_expected, pixel_mat, conf), 1.0});

    Var mu_flat = tape.reshape(coarse.mu, 1, static_cast<int>(tape.value(coarse.mu).size()));
    Var fwd_samples = forward_warp_var(tape, tf, coarse.canonical);
    terms.push_back({"cyc3d", cycle3d_loss(tape, fwd_samples, coarse.points_t, mu_flat), 1.0});

    // Optical flow: pixels inside the mask with a usable next frame.
    std::vector<int> flow_cols;
    if (obs.flow_to_next && next_usable) {
      for (int r = 0; r < rays; ++r)
        if (mask_row(0, r) >= 0.5) flow_cols.push_back(r);
    }
    if (!flow_cols.empty()) {
      ad::Mat flow_target(2, static_cast<Eigen::Index>(flow_cols.size()));
      for (size_t i = 0; i < flow_cols.size(); ++i) {
        const int r = flow_cols[i];
        const int px = chunk.pixel_indices[r] % width;
        const int py = chunk.pixel_indices[r] / width;
        flow_target.col(static_cast<Eigen::Index>(i)) = pixels[r] + obs.flow_to_next->at(px, py);
      }
      FrameTransforms tf_next =
          build_frame_transforms(tape, binder, bundle_, next, init_pose_of(next));
      Var expected_sel = tape.select_cols(coarse.expected, flow_cols);
      Var warped_next = forward_warp_var(tape, tf_next, expected_sel);
      Var projected = project_var(tape, setup, warped_next);
      terms.push_back({"of",
                       flow_loss(tape, projected, flow_target, tape.select_cols(conf, flow_cols)),
                       eff.flow});
    }

    // CSE matching terms where observations exist.
    std::vector<int> cse_cols;
    if (obs.cse) {
      for (int r = 0; r < rays; ++r) {
        const int px = chunk.pixel_indices[r] % width;
        const int py = chunk.pixel_indices[r] / width;
        if (obs.cse->is_valid(px, py)) cse_cols.push_back(r);
      }
    }
    Var proj_matched;
    if (!cse_cols.empty()) {
      ad::Mat matched(3, static_cast<Eigen::Index>(cse_cols.size()));
      for (size_t i = 0; i < cse_cols.size(); ++i) {
        const int r = cse_cols[i];
        matched.col(static_cast<Eigen::Index>(i)) =
            obs.cse->point(chunk.pixel_indices[r] % width, chunk.pixel_indices[r] / width);
      }
      Var conf_sel = tape.select_cols(conf, cse_cols);
      Var expected_sel = tape.select_cols(coarse.expected, cse_cols);
      terms.push_back({"cse3d", cse3d_loss(tape, expected_sel, matched, conf_sel), eff.reg});
      Var proj_e = project_var(tape, setup, forward_warp_var(tape, tf, expected_sel));
      proj_matched = project_var(tape, setup, forward_warp_var(tape, tf, tape.constant(matched)));
      terms.push_back({"cse2d_c", cse2d_loss(tape, proj_e, proj_matched, conf_sel), eff.reg});
    }

    Var q_combined;
    if (fine_on) {
      BranchRender fine =
          render_fine(tape, binder, bundle_, tf, setup, coarse, sched.fine_samples, &jitter);
      terms.push_back({"pho_f", photometric_loss(tape, fine.color, observed), eff.pho_f});
      terms.push_back(
          {"sil_f", silhouette_loss(tape, fine.opacity, tape.detach(coarse.opacity)), eff.sil_f});
      if (!cse_cols.empty()) {
        Var fine_sel = tape.select_cols(fine.expected, cse_cols);
        Var delta_sel = bundle_.skin_delta(tape, binder, fine_sel, chunk.frame);
        Var proj_f = project_var(tape, setup, forward_warp_var(tape, tf, fine_sel, delta_sel));
        terms.push_back({"cse2d_f",
                         cse2d_loss(tape, proj_f, proj_matched, tape.select_cols(conf, cse_cols)),
                         eff.reg});
      }

      // Spatio-temporal coherence of the quadratic coefficients, anchored at
      // the per-ray expected surface points.
      const Eigen::Matrix3Xd anchor = tape.value(coarse.expected);
      std::vector<uint64_t> point_ids(rays);
      for (int r = 0; r < rays; ++r)
        point_ids[r] = static_cast<uint64_t>(chunk.frame) * obs.mask.pixel_count() +
                       static_cast<uint64_t>(chunk.pixel_indices[r]);
      CoeffField field = [this, &binder](Tape& tp, Var pts, int f) {
        return bundle_.quad_coeffs_var(tp, binder, pts, f);
      };
      QuadSmoothnessResult q = quad_smoothness_loss(
          tape, field, anchor, chunk.frame, next_usable ? next : -1, options_.quad_neighbors,
          options_.quad_noise_scale, options_.seed, static_cast<uint64_t>(step_), point_ids);
      terms.push_back({"q_spatial", q.spatial, 0.0});  // weighted through q_combined
      if (q.temporal.valid()) terms.push_back({"q_temporal", q.temporal, 0.0});
      q_combined = q.temporal.valid()
                       ? tape.add(q.spatial, tape.scale(q.temporal, eff.quad_temporal))
                       : q.spatial;
    }

    Var chunk_total = tape.scalar(0.0);
    for (const Term& term : terms)
      if (term.weight != 0.0) chunk_total = tape.add(chunk_total, tape.scale(term.value, term.weight));
    if (q_combined.valid()) chunk_total = tape.add(chunk_total, tape.scale(q_combined, eff.quad));

    tape.backward(chunk_total);
    binder.scatter();

    for (const Term& term : terms) report.parts[term.name] += tape.value(term.value)(0, 0);

    // Per-ray photometric error feeds the active-sampling map.
    const ad::Mat rendered = tape.value(coarse.color);
    chunk_errors[ci].resize(rays);
    for (int r = 0; r < rays; ++r)
      chunk_errors[ci][r] = (rendered.col(r) - observed.col(r)).cwiseAbs().sum();
  }

  // Camera smoothness spans the whole trajectory. The root branch is frozen
  // in phase 2, so the term is reported without a gradient pass there.
  if (phase == Phase::kPhase2) {
    std::vector<RigidTransform> roots(data_.total_frames);
    std::vector<int> video_of(data_.total_frames);
    for (int t = 0; t < data_.total_frames; ++t) {
      roots[t] = bundle_.root_pose(t, init_pose_of(t));
      video_of[t] = data_.frame(t).video;
    }
    report.parts["cam"] += camera_smoothness(roots, video_of);
  } else {
    Tape tape;
    ParamBinder binder(tape, true);
    auto roots = bundle_.root_transforms_all(tape, binder, all_init_poses());
    Var cam = camera_smoothness_loss(tape, roots, camera_pairs_);
    tape.backward(cam);
    binder.scatter();
    report.parts["cam"] += tape.value(cam)(0, 0);
  }

  report.total = total_loss(report, eff);  // raises TrainingFault on non-finite parts

  const double lr = learning_rate_at(sched, step_);
  const auto trainable = trainable_block_names(phase, options_.fine_enabled);
  for (ParamBlock* block : bundle_.blocks())
    if (std::find(trainable.begin(), trainable.end(), block->name) != trainable.end())
      adam_update(*block, lr, sched.adam_beta1, sched.adam_beta2, sched.adam_eps);

  update_error_map(chunks, chunk_errors);
  ++step_;
  return report;
}

void Trainer::update_error_map(const std::vector<Chunk>& chunks,
                               const std::vector<std::vector<double>>& errors) {
  const double decay = std::exp2(-1.0 / options_.active_half_life);
  for (auto& map : error_map_) map *= decay;
  for (size_t ci = 0; ci < chunks.size(); ++ci) {
    Eigen::VectorXd& map = error_map_[chunks[ci].frame];
    for (size_t r = 0; r < chunks[ci].pixel_indices.size(); ++r)
      map(chunks[ci].pixel_indices[r]) += (1.0 - decay) * errors[ci][r];
  }
}

void Trainer::transition() {
  const Schedule& sched = options_.schedule;
  const bool warmup_boundary = sched.warmup_steps > 0 && step_ == sched.warmup_steps;
  const bool phase2_boundary = step_ == sched.phase2_start() && sched.phase2_start() > 0;
  if (!warmup_boundary && !phase2_boundary) return;  // off-boundary: no-op
  reinitialize_bones();
}

void Trainer::reinitialize_bones() {
  const int grid = options_.bone_reinit_grid;
  GridBounds bounds{Eigen::Vector3d::Constant(-options_.scene_radius),
                    Eigen::Vector3d::Constant(options_.scene_radius)};
  TriMesh mesh = marching_cubes_grid(
      sample_sdf_grid(bundle_, Branch::kCoarse, grid, options_.scene_radius), grid, bounds);
  if (mesh.vertices.empty()) return;  // keep the old bones if the level set vanished

  const int b_count = bundle_.config().bone_count;
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& v : mesh.vertices) centroid += v;
  centroid /= static_cast<double>(mesh.vertices.size());

  // Farthest-point sampling over the level-set vertices, seeded at the vertex
  // nearest the surface centroid.
  std::vector<int> picked;
  {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < mesh.vertices.size(); ++i) {
      const double d = (mesh.vertices[i] - centroid).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(i);
      }
    }
    picked.push_back(best);
  }
  std::vector<double> dist(mesh.vertices.size(), std::numeric_limits<double>::infinity());
  while (static_cast<int>(picked.size()) < b_count) {
    const Eigen::Vector3d& last = mesh.vertices[picked.back()];
    int far_idx = 0;
    double far_d = -1.0;
    for (size_t i = 0; i < mesh.vertices.size(); ++i) {
      dist[i] = std::min(dist[i], (mesh.vertices[i] - last).squaredNorm());
      if (dist[i] > far_d) {
        far_d = dist[i];
        far_idx = static_cast<int>(i);
      }
    }
    picked.push_back(far_idx);
  }

  BoneSet bones;
  bones.centers.resize(3, b_count);
  bones.scales.resize(3, b_count);
  bones.orientations.assign(b_count, Eigen::Matrix3d::Identity());
  for (int b = 0; b < b_count; ++b)
    bones.centers.col(b) = mesh.vertices[picked[b % picked.size()]];
  for (int b = 0; b < b_count; ++b) {
    double nearest = std::numeric_limits<double>::infinity();
    for (int other = 0; other < b_count; ++other)
      if (other != b)
        nearest = std::min(nearest, (bones.centers.col(b) - bones.centers.col(other)).norm());
    if (!std::isfinite(nearest)) nearest = options_.scene_radius;
    const double radius = std::min(0.5, std::max(0.02, 0.5 * nearest));
    bones.scales.col(b).setConstant(1.0 / (radius * radius));
  }
  bundle_.set_bones(bones);
  // Bone-pose latent codes are preserved across reinitialization.
}

std::string Trainer::log_line(const LossReport& report) const {
  std::ostringstream ss;
  ss.precision(17);
  ss << "step=" << step_ - 1;
  for (const std::string& term : loss_term_order())
    if (report.has(term)) ss << " " << term << "=" << report.part(term);
  ss << " total=" << report.total;
  return ss.str();
}

void Trainer::run(int64_t until, std::ostream* log) {
  const Schedule& sched = options_.schedule;
  until = std::min<int64_t>(until, sched.total_steps);
  while (step_ < until) {
    transition();
    LossReport report = step_impl();
    if (log) *log << log_line(report) << "\n";
    const bool boundary =
        step_ == sched.warmup_steps || step_ == sched.phase2_start() || step_ == until;
    if (!options_.out_dir.empty() &&
        (boundary || (options_.checkpoint_interval > 0 && step_ % options_.checkpoint_interval == 0))) {
      char name[40];
      std::snprintf(name, sizeof(name), "ckpt_%08lld.bin", static_cast<long long>(step_));
      save_checkpoint(options_.out_dir / name);
      save_checkpoint(options_.out_dir / "ckpt_latest.bin");
    }
  }
}

namespace {
constexpr char kCheckpointMagic[8] = {'N', 'R', 'R', 'C', 'K', 'P', 'T', '1'};
}

void Trainer::save_checkpoint(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path.string());
  out.write(kCheckpointMagic, 8);
  const uint32_t version = 1;
  out.write(reinterpret_cast<const char*>(&version), 4);
  const uint64_t step = static_cast<uint64_t>(step_), seed = options_.seed;
  out.write(reinterpret_cast<const char*>(&step), 8);
  out.write(reinterpret_cast<const char*>(&seed), 8);
  bundle_.save(out);
  const uint64_t frames = error_map_.size();
  out.write(reinterpret_cast<const char*>(&frames), 8);
  for (const auto& map : error_map_) {
    const uint64_t n = static_cast<uint64_t>(map.size());
    out.write(reinterpret_cast<const char*>(&n), 8);
    out.write(reinterpret_cast<const char*>(map.data()), static_cast<std::streamsize>(n * 8));
  }
}

void Trainer::load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw std::runtime_error("corrupt checkpoint (bad magic): " + path.string());
  uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), 4);
  if (version != 1)
    throw std::runtime_error("unsupported checkpoint version in " + path.string());
  uint64_t step = 0, seed = 0;
  in.read(reinterpret_cast<char*>(&step), 8);
  in.read(reinterpret_cast<char*>(&seed), 8);
  bundle_.load(in);
  uint64_t frames = 0;
  in.read(reinterpret_cast<char*>(&frames), 8);
  if (frames != error_map_.size())
    throw std::runtime_error("checkpoint frame count mismatch: " + path.string());
  for (auto& map : error_map_) {
    uint64_t n = 0;
    in.read(reinterpret_cast<char*>(&n), 8);
    if (n != static_cast<uint64_t>(map.size()))
      throw std::runtime_error("checkpoint raster size mismatch: " + path.string());
    in.read(reinterpret_cast<char*>(map.data()), static_cast<std::streamsize>(n * 8));
  }
  if (!in) throw std::runtime_error("truncated checkpoint: " + path.string());
  step_ = static_cast<int64_t>(step);
  options_.seed = seed;
}

}  // namespace nrr
