// Copyright Contributors to the nrr Project
// SPDX-License-Identifier: Apache-2.0
#include "nrr/fields.h"

#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "nrr/geometry.h"
#include "nrr/rng.h"

namespace nrr {

namespace {

std::string binding_key(const ParamBlock* block, int offset, int rows, int cols) {
  return block->name + ":" + std::to_string(offset) + ":" + std::to_string(rows) + ":" +
         std::to_string(cols);
}

// code column broadcast to N columns; gradient flows back into the column.
ad::Var broadcast_col(ad::Tape& t, ad::Var col, int n) {
  return t.matmul(col, t.constant(ad::Mat::Ones(1, n)));
}

void write_u64(std::ostream& out, uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }
uint64_t read_u64(std::istream& in) {
  uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 8);
  return v;
}

void write_vec(std::ostream& out, const Eigen::VectorXd& v) {
  write_u64(out, static_cast<uint64_t>(v.size()));
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * 8));
}

void read_vec(std::istream& in, Eigen::VectorXd& v) {
  uint64_t n = read_u64(in);
  v.resize(static_cast<Eigen::Index>(n));
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * 8));
}

}  // namespace

ad::Var ParamBinder::bind(ParamBlock& block, int offset, int rows, int cols) {
  const std::string key = binding_key(&block, offset, rows, cols);
  auto it = index_.find(key);
  if (it != index_.end()) return entries_[it->second].var;
  if (offset + rows * cols > block.value.size())
    throw std::invalid_argument("ParamBinder: slice out of range for " + block.name);
  ad::Mat value = Eigen::Map<const ad::Mat>(block.value.data() + offset, rows, cols);
  ad::Var var = tape_.leaf(std::move(value), with_grad_);
  index_[key] = static_cast<int>(entries_.size());
  entries_.push_back({&block, offset, rows, cols, var});
  return var;
}

void ParamBinder::scatter() {
  if (!with_grad_) return;
  for (const Entry& e : entries_) {
    ad::Mat g = tape_.grad(e.var);
    Eigen::Map<ad::Mat>(e.block->grad.data() + e.offset, e.rows, e.cols) += g;
  }
}

Mlp::Mlp(std::string name, const MlpSpec& spec, uint64_t seed) : spec_(spec) {
  if (spec.layers < 1) throw std::invalid_argument("Mlp: needs at least one layer");
  block_.name = std::move(name);
  int total = 0;
  int in = spec.input;
  for (int l = 0; l < spec.layers; ++l) {
    const int out = (l == spec.layers - 1) ? spec.output : spec.hidden;
    layers_.push_back({out, in, total, total + out * in});
    total += out * in + out;
    in = out;
  }
  block_.resize(total);
  RngStream rng(seed, 0x6d6c70);
  for (size_t l = 0; l < layers_.size(); ++l) {
    const Layer& ly = layers_[l];
    const bool last = (l + 1 == layers_.size());
    if (last && spec_.zero_init_last) continue;  // residual heads start at identity
    const double stddev = std::sqrt(2.0 / ly.cols);
    for (int i = 0; i < ly.rows * ly.cols; ++i) block_.value(ly.w_off + i) = stddev * rng.normal();
    // Small random hidden biases keep code-only inputs alive when the latent
    // codes start at zero.
    if (!last)
      for (int i = 0; i < ly.rows; ++i) block_.value(ly.b_off + i) = 0.1 * rng.normal();
  }
}

ad::Var Mlp::eval(ad::Tape& tape, ParamBinder& binder, ad::Var input) {
  if (tape.value(input).rows() != spec_.input)
    throw std::invalid_argument("Mlp::eval: input rows mismatch for " + block_.name);
  ad::Var h = input;
  for (size_t l = 0; l < layers_.size(); ++l) {
    const Layer& ly = layers_[l];
    ad::Var w = binder.bind(block_, ly.w_off, ly.rows, ly.cols);
    ad::Var b = binder.bind(block_, ly.b_off, ly.rows, 1);
    h = tape.add_colvec(tape.matmul(w, h), b);
    if (l + 1 < layers_.size()) h = tape.relu(h);
  }
  if (spec_.sigmoid_output) h = tape.sigmoid(h);
  return h;
}

Eigen::MatrixXd Mlp::eval_plain(const Eigen::MatrixXd& input) const {
  Eigen::MatrixXd h = input;
  for (size_t l = 0; l < layers_.size(); ++l) {
    const Layer& ly = layers_[l];
    Eigen::Map<const Eigen::MatrixXd> w(block_.value.data() + ly.w_off, ly.rows, ly.cols);
    Eigen::Map<const Eigen::VectorXd> b(block_.value.data() + ly.b_off, ly.rows);
    h = (w * h).colwise() + b;
    if (l + 1 < layers_.size()) h = h.cwiseMax(0.0);
  }
  if (spec_.sigmoid_output) h = (1.0 / (1.0 + (-h.array()).exp())).matrix();
  return h;
}

FieldBundle::FieldBundle(const FieldConfig& c) : config_(c) {
  const int pos_dim = 3 * (2 * c.pos_bands + 1);
  const int dir_dim = 3 * (2 * c.dir_bands + 1);
  const uint64_t s = c.seed;

  coarse_color_ = Mlp("net.coarse_color",
                      {pos_dim + dir_dim + c.env_code_dim, 3, c.hidden, c.layers, true, false},
                      s + 1);
  coarse_sdf_ = Mlp("net.coarse_sdf", {pos_dim, 1, c.hidden, c.layers, false, false}, s + 2);
  embed_ = Mlp("net.embed", {pos_dim, c.embed_dim, c.hidden, c.layers, false, false}, s + 3);
  fine_color_ = Mlp("net.fine_color",
                    {pos_dim + dir_dim + c.env_code_dim, 3, c.hidden, c.layers, true, false},
                    s + 4);
  fine_sdf_ = Mlp("net.fine_sdf", {pos_dim, 1, c.hidden, c.layers, false, false}, s + 5);
  root_net_ = Mlp("net.root", {c.pose_code_dim, 6, c.hidden, c.layers, false, true}, s + 6);
  bone_net_ = Mlp("net.bone", {c.pose_code_dim, 6 * c.bone_count, c.hidden, c.layers, false, true},
                  s + 7);
  delta_net_ = Mlp("net.delta", {pos_dim + c.pose_code_dim, c.bone_count, c.hidden, c.layers,
                                 false, true},
                   s + 8);
  quad_net_ = Mlp("net.quad", {pos_dim + c.deform_code_dim, 27, c.quad_hidden, c.quad_layers,
                               false, true},
                  s + 9);

  log_alpha_.name = "alpha.log";
  log_alpha_.resize(1);
  log_alpha_.value(0) = std::log(c.init_alpha);

  // Codes start at zero: with the residual pose/deformation heads this makes
  // every frame share an identical identity deformation at init.
  auto init_codes = [&](ParamBlock& blk, const char* name, int dim) {
    blk.name = name;
    blk.resize(static_cast<Eigen::Index>(dim) * c.frame_count);
  };
  init_codes(env_codes_, "code.env", c.env_code_dim);
  init_codes(root_codes_, "code.root", c.pose_code_dim);
  init_codes(bone_codes_, "code.bone", c.pose_code_dim);
  init_codes(deform_codes_, "code.deform", c.deform_code_dim);

  bone_centers_.name = "bones.centers";
  bone_centers_.resize(3 * c.bone_count);
  bone_rotvecs_.name = "bones.rotvec";
  bone_rotvecs_.resize(3 * c.bone_count);
  bone_logscales_.name = "bones.logscale";
  bone_logscales_.resize(3 * c.bone_count);

  // Spread initial centers over a sphere (golden-angle spiral) inside the box.
  const double golden = 2.399963229728653;
  for (int b = 0; b < c.bone_count; ++b) {
    if (c.bone_count == 1) {
      bone_centers_.value.segment<3>(0).setZero();
    } else {
      const double z = 1.0 - 2.0 * (b + 0.5) / c.bone_count;
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double phi = golden * b;
      bone_centers_.value.segment<3>(3 * b) =
          c.bone_init_radius * Eigen::Vector3d(r * std::cos(phi), r * std::sin(phi), z);
    }
    const double spacing = c.bone_init_radius * std::sqrt(4.0 / std::max(1, c.bone_count)) + 1e-3;
    bone_logscales_.value.segment<3>(3 * b).setConstant(std::log(1.0 / (spacing * spacing)));
  }
}

ad::Var FieldBundle::sdf(ad::Tape& t, ParamBinder& b, ad::Var points, Branch which) {
  ad::Var enc = t.positional_encode(points, config_.pos_bands);
  return (which == Branch::kCoarse ? coarse_sdf_ : fine_sdf_).eval(t, b, enc);
}

ad::Var FieldBundle::color(ad::Tape& t, ParamBinder& b, ad::Var points, ad::Var dirs, int frame,
                           Branch which) {
  const int n = static_cast<int>(t.value(points).cols());
  ad::Var enc_p = t.positional_encode(points, config_.pos_bands);
  ad::Var enc_d = t.positional_encode(dirs, config_.dir_bands);
  ad::Var env = b.bind(env_codes_, frame * config_.env_code_dim, config_.env_code_dim, 1);
  ad::Var in = t.concat_rows({enc_p, enc_d, broadcast_col(t, env, n)});
  return (which == Branch::kCoarse ? coarse_color_ : fine_color_).eval(t, b, in);
}

ad::Var FieldBundle::embedding(ad::Tape& t, ParamBinder& b, ad::Var points) {
  return embed_.eval(t, b, t.positional_encode(points, config_.pos_bands));
}

ad::Var FieldBundle::skin_delta(ad::Tape& t, ParamBinder& b, ad::Var points, int frame) {
  const int n = static_cast<int>(t.value(points).cols());
  ad::Var enc = t.positional_encode(points, config_.pos_bands);
  ad::Var code = b.bind(bone_codes_, frame * config_.pose_code_dim, config_.pose_code_dim, 1);
  return delta_net_.eval(t, b, t.concat_rows({enc, broadcast_col(t, code, n)}));
}

ad::Var FieldBundle::quad_coeffs_var(ad::Tape& t, ParamBinder& b, ad::Var points, int frame) {
  const int n = static_cast<int>(t.value(points).cols());
  ad::Var enc = t.positional_encode(points, config_.pos_bands);
  ad::Var code = b.bind(deform_codes_, frame * config_.deform_code_dim, config_.deform_code_dim, 1);
  ad::Var raw = quad_net_.eval(t, b, t.concat_rows({enc, broadcast_col(t, code, n)}));
  ad::Mat identity = ad::Mat::Zero(27, 1);
  identity(0, 0) = identity(9 + 1, 0) = identity(18 + 2, 0) = 1.0;  // rows r*9+c, A = [I|0|0]
  return t.add_colvec(raw, t.constant(identity));
}

TransformVar FieldBundle::root_transform(ad::Tape& t, ParamBinder& b, int frame,
                                         const RigidTransform& init) {
  ad::Var code = b.bind(root_codes_, frame * config_.pose_code_dim, config_.pose_code_dim, 1);
  ad::Var out = root_net_.eval(t, b, code);  // 6x1
  ad::Var rot_delta = t.rodrigues(t.slice_rows(out, 0, 3));
  ad::Var trans_delta = t.slice_rows(out, 3, 3);
  ad::Var r0 = t.constant(init.rotation);
  ad::Var t0 = t.constant(init.translation);
  TransformVar g;
  g.rotation = t.matmul(rot_delta, r0);
  g.translation = t.add(t.matmul(rot_delta, t0), trans_delta);
  return g;
}

std::vector<TransformVar> FieldBundle::root_transforms_all(
    ad::Tape& t, ParamBinder& b, const std::vector<RigidTransform>& inits) {
  if (static_cast<int>(inits.size()) != config_.frame_count)
    throw std::invalid_argument("root_transforms_all: init pose count mismatch");
  ad::Var codes = b.bind(root_codes_, 0, config_.pose_code_dim, config_.frame_count);
  ad::Var out = root_net_.eval(t, b, codes);  // 6 x T
  std::vector<TransformVar> res;
  res.reserve(config_.frame_count);
  for (int f = 0; f < config_.frame_count; ++f) {
    ad::Var col = t.slice_cols(out, f, 1);
    ad::Var rot_delta = t.rodrigues(t.slice_rows(col, 0, 3));
    TransformVar g;
    g.rotation = t.matmul(rot_delta, t.constant(inits[f].rotation));
    g.translation = t.add(t.matmul(rot_delta, t.constant(inits[f].translation)),
                          t.slice_rows(col, 3, 3));
    res.push_back(g);
  }
  return res;
}

std::vector<TransformVar> FieldBundle::bone_transforms(ad::Tape& t, ParamBinder& b, int frame) {
  ad::Var code = b.bind(bone_codes_, frame * config_.pose_code_dim, config_.pose_code_dim, 1);
  ad::Var out = bone_net_.eval(t, b, code);  // 6B x 1
  std::vector<TransformVar> res;
  res.reserve(config_.bone_count);
  for (int bi = 0; bi < config_.bone_count; ++bi) {
    TransformVar tv;
    tv.rotation = t.rodrigues(t.slice_rows(out, 6 * bi, 3));
    tv.translation = t.slice_rows(out, 6 * bi + 3, 3);
    res.push_back(tv);
  }
  return res;
}

ad::Var FieldBundle::log_alpha(ad::Tape& t, ParamBinder& b) {
  (void)t;
  return b.bind(log_alpha_, 0, 1, 1);
}

FieldBundle::BoneVars FieldBundle::bone_vars(ad::Tape& t, ParamBinder& b) {
  BoneVars bv;
  ad::Var centers = b.bind(bone_centers_, 0, 3, config_.bone_count);
  ad::Var rotvecs = b.bind(bone_rotvecs_, 0, 3, config_.bone_count);
  ad::Var logscales = b.bind(bone_logscales_, 0, 3, config_.bone_count);
  for (int bi = 0; bi < config_.bone_count; ++bi) {
    bv.centers.push_back(t.slice_cols(centers, bi, 1));
    ad::Var v = t.rodrigues(t.slice_cols(rotvecs, bi, 1));
    ad::Var s = t.exp(t.slice_cols(logscales, bi, 1));
    // Q = V^T diag(s) V
    bv.precisions.push_back(t.matmul(t.transpose(v), t.mul_colvec(v, s)));
  }
  return bv;
}

Eigen::MatrixXd FieldBundle::encoded_plain(const Eigen::Matrix3Xd& pts, int bands) const {
  Eigen::MatrixXd enc(3 * (2 * bands + 1), pts.cols());
  for (Eigen::Index i = 0; i < pts.cols(); ++i)
    enc.col(i) = positional_encode(Eigen::Vector3d(pts.col(i)), bands);
  return enc;
}

Eigen::Vector3d FieldBundle::canonical_color(const Eigen::Vector3d& x,
                                             const Eigen::Vector3d& view_dir,
                                             const Eigen::VectorXd& env_code, Branch which) const {
  Eigen::VectorXd in(coarse_color_.spec().input);
  in << positional_encode(x, config_.pos_bands), positional_encode(view_dir, config_.dir_bands),
      env_code;
  return (which == Branch::kCoarse ? coarse_color_ : fine_color_).eval_plain(in).col(0);
}

double FieldBundle::canonical_sdf(const Eigen::Vector3d& x, Branch which) const {
  Eigen::VectorXd enc = positional_encode(x, config_.pos_bands);
  return (which == Branch::kCoarse ? coarse_sdf_ : fine_sdf_).eval_plain(enc)(0, 0);
}

Eigen::VectorXd FieldBundle::canonical_embedding(const Eigen::Vector3d& x) const {
  return embed_.eval_plain(positional_encode(x, config_.pos_bands)).col(0);
}

RigidTransform FieldBundle::root_pose(int frame, const RigidTransform& init_pose) const {
  if (frame < 0 || frame >= config_.frame_count)
    throw std::invalid_argument("root_pose: frame out of range");
  Eigen::VectorXd code =
      root_codes_.value.segment(frame * config_.pose_code_dim, config_.pose_code_dim);
  Eigen::VectorXd out = root_net_.eval_plain(code).col(0);
  RigidTransform delta = RigidTransform::from_axis_angle(out.head<3>(), out.tail<3>());
  return delta.compose(init_pose);
}

RigidTransform FieldBundle::bone_pose(int frame, int bone) const {
  if (frame < 0 || frame >= config_.frame_count)
    throw std::invalid_argument("bone_pose: frame out of range");
  if (bone < 0 || bone >= config_.bone_count)
    throw std::invalid_argument("bone_pose: bone out of range");
  Eigen::VectorXd code =
      bone_codes_.value.segment(frame * config_.pose_code_dim, config_.pose_code_dim);
  Eigen::VectorXd out = bone_net_.eval_plain(code).col(0);
  return RigidTransform::from_axis_angle(out.segment<3>(6 * bone), out.segment<3>(6 * bone + 3));
}

QuadraticCoeffs FieldBundle::quad_coeffs(const Eigen::Vector3d& x, int frame) const {
  if (frame < 0 || frame >= config_.frame_count)
    throw std::invalid_argument("quad_coeffs: frame out of range");
  Eigen::VectorXd in(quad_net_.spec().input);
  in << positional_encode(x, config_.pos_bands),
      deform_codes_.value.segment(frame * config_.deform_code_dim, config_.deform_code_dim);
  Eigen::VectorXd out = quad_net_.eval_plain(in).col(0);
  QuadraticCoeffs a;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 9; ++c) a(r, c) = out(r * 9 + c);
  return a + quadratic_identity();
}

Eigen::VectorXd FieldBundle::sdf_plain(const Eigen::Matrix3Xd& points, Branch which) const {
  Eigen::MatrixXd enc = encoded_plain(points, config_.pos_bands);
  return (which == Branch::kCoarse ? coarse_sdf_ : fine_sdf_).eval_plain(enc).row(0);
}

Eigen::MatrixXd FieldBundle::embedding_plain(const Eigen::Matrix3Xd& points) const {
  return embed_.eval_plain(encoded_plain(points, config_.pos_bands));
}

Eigen::Matrix3Xd FieldBundle::color_plain(const Eigen::Matrix3Xd& points,
                                          const Eigen::Matrix3Xd& dirs, int frame,
                                          Branch which) const {
  Eigen::MatrixXd in(coarse_color_.spec().input, points.cols());
  in.topRows(3 * (2 * config_.pos_bands + 1)) = encoded_plain(points, config_.pos_bands);
  in.middleRows(3 * (2 * config_.pos_bands + 1), 3 * (2 * config_.dir_bands + 1)) =
      encoded_plain(dirs, config_.dir_bands);
  in.bottomRows(config_.env_code_dim).colwise() =
      Eigen::VectorXd(env_codes_.value.segment(frame * config_.env_code_dim, config_.env_code_dim));
  return (which == Branch::kCoarse ? coarse_color_ : fine_color_).eval_plain(in);
}

Eigen::MatrixXd FieldBundle::quad_coeffs_plain(const Eigen::Matrix3Xd& points, int frame) const {
  Eigen::MatrixXd in(quad_net_.spec().input, points.cols());
  in.topRows(3 * (2 * config_.pos_bands + 1)) = encoded_plain(points, config_.pos_bands);
  in.bottomRows(config_.deform_code_dim).colwise() = Eigen::VectorXd(
      deform_codes_.value.segment(frame * config_.deform_code_dim, config_.deform_code_dim));
  Eigen::MatrixXd out = quad_net_.eval_plain(in);
  out.row(0).array() += 1.0;
  out.row(9 + 1).array() += 1.0;
  out.row(18 + 2).array() += 1.0;
  return out;
}

Eigen::MatrixXd FieldBundle::skin_delta_plain(const Eigen::Matrix3Xd& points, int frame) const {
  Eigen::MatrixXd in(delta_net_.spec().input, points.cols());
  in.topRows(3 * (2 * config_.pos_bands + 1)) = encoded_plain(points, config_.pos_bands);
  in.bottomRows(config_.pose_code_dim).colwise() = Eigen::VectorXd(
      bone_codes_.value.segment(frame * config_.pose_code_dim, config_.pose_code_dim));
  return delta_net_.eval_plain(in);
}

double FieldBundle::alpha() const { return std::exp(log_alpha_.value(0)); }

BoneSet FieldBundle::bones() const {
  BoneSet bs;
  const int b_count = config_.bone_count;
  bs.centers.resize(3, b_count);
  bs.scales.resize(3, b_count);
  bs.orientations.resize(b_count);
  for (int b = 0; b < b_count; ++b) {
    bs.centers.col(b) = bone_centers_.value.segment<3>(3 * b);
    bs.orientations[b] = rodrigues(Eigen::Vector3d(bone_rotvecs_.value.segment<3>(3 * b)));
    bs.scales.col(b) = bone_logscales_.value.segment<3>(3 * b).array().exp();
  }
  return bs;
}

void FieldBundle::set_bones(const BoneSet& bones) {
  if (bones.count() != config_.bone_count)
    throw std::invalid_argument("set_bones: bone count mismatch");
  for (int b = 0; b < bones.count(); ++b) {
    bone_centers_.value.segment<3>(3 * b) = bones.centers.col(b);
    // Store the orientation as an axis-angle vector; recover angle from trace.
    const Eigen::Matrix3d& r = bones.orientations[b];
    const double cos_theta = std::min(1.0, std::max(-1.0, (r.trace() - 1.0) / 2.0));
    const double theta = std::acos(cos_theta);
    Eigen::Vector3d axis(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
    if (theta < 1e-9 || axis.norm() < 1e-12) {
      bone_rotvecs_.value.segment<3>(3 * b).setZero();
    } else {
      bone_rotvecs_.value.segment<3>(3 * b) = theta * axis.normalized();
    }
    bone_logscales_.value.segment<3>(3 * b) = bones.scales.col(b).array().log();
  }
}

Eigen::VectorXd FieldBundle::env_code(int frame) const {
  return env_codes_.value.segment(frame * config_.env_code_dim, config_.env_code_dim);
}

Eigen::VectorXd FieldBundle::deform_code(int frame) const {
  return deform_codes_.value.segment(frame * config_.deform_code_dim, config_.deform_code_dim);
}

void FieldBundle::blend_codes_into(int dst, int a, int b) {
  auto blend = [&](ParamBlock& blk, int dim) {
    blk.value.segment(dst * dim, dim) =
        0.5 * (blk.value.segment(a * dim, dim) + blk.value.segment(b * dim, dim));
  };
  blend(env_codes_, config_.env_code_dim);
  blend(root_codes_, config_.pose_code_dim);
  blend(bone_codes_, config_.pose_code_dim);
  blend(deform_codes_, config_.deform_code_dim);
}

void FieldBundle::init_sphere_sdf(double radius, int steps, uint64_t seed) {
  for (Mlp* net : {&coarse_sdf_, &fine_sdf_}) {
    const int batch = 1024;
    for (int step = 0; step < steps; ++step) {
      RngStream rng(seed, static_cast<uint64_t>(step), net == &fine_sdf_ ? 1u : 0u);
      Eigen::Matrix3Xd pts(3, batch);
      Eigen::MatrixXd target(1, batch);
      for (int i = 0; i < batch; ++i) {
        pts.col(i) = Eigen::Vector3d(rng.uniform(-0.65, 0.65), rng.uniform(-0.65, 0.65),
                                     rng.uniform(-0.65, 0.65));
        target(0, i) = pts.col(i).norm() - radius;
      }
      ad::Tape tape;
      ParamBinder binder(tape, true);
      ad::Var enc = tape.positional_encode(tape.constant(pts), config_.pos_bands);
      ad::Var pred = net->eval(tape, binder, enc);
      ad::Var loss = tape.sum(tape.square(tape.sub(pred, tape.constant(target))));
      net->params().zero_grad();
      tape.backward(loss);
      binder.scatter();
      const double progress = static_cast<double>(step) / steps;
      const double lr = 1e-4 + 0.5 * 3e-3 * (1.0 + std::cos(M_PI * progress));
      adam_update(net->params(), lr);
    }
  }
}

std::vector<ParamBlock*> FieldBundle::blocks() {
  return {&coarse_color_.params(), &coarse_sdf_.params(), &embed_.params(), &fine_color_.params(),
          &fine_sdf_.params(),     &root_net_.params(),   &bone_net_.params(),
          &delta_net_.params(),    &quad_net_.params(),   &log_alpha_,
          &env_codes_,             &root_codes_,          &bone_codes_,
          &deform_codes_,          &bone_centers_,        &bone_rotvecs_,
          &bone_logscales_};
}

ParamBlock* FieldBundle::find_block(const std::string& name) {
  for (ParamBlock* b : blocks())
    if (b->name == name) return b;
  return nullptr;
}

void FieldBundle::save(std::ostream& out) const {
  auto* self = const_cast<FieldBundle*>(this);
  for (ParamBlock* b : self->blocks()) {
    write_vec(out, b->value);
    write_vec(out, b->adam_m);
    write_vec(out, b->adam_v);
    write_u64(out, static_cast<uint64_t>(b->adam_updates));
  }
}

void FieldBundle::load(std::istream& in) {
  for (ParamBlock* b : blocks()) {
    Eigen::VectorXd v;
    read_vec(in, v);
    if (v.size() != b->value.size())
      throw std::runtime_error("FieldBundle::load: size mismatch in block " + b->name);
    b->value = v;
    read_vec(in, b->adam_m);
    read_vec(in, b->adam_v);
    b->adam_updates = static_cast<int64_t>(read_u64(in));
    b->grad = Eigen::VectorXd::Zero(b->value.size());
  }
}

void adam_update(ParamBlock& block, double lr, double beta1, double beta2, double eps) {
  block.adam_updates += 1;
  block.adam_m = beta1 * block.adam_m + (1.0 - beta1) * block.grad;
  block.adam_v = beta2 * block.adam_v.array() + (1.0 - beta2) * block.grad.array().square();
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(block.adam_updates));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(block.adam_updates));
  block.value.array() -=
      lr * (block.adam_m.array() / c1) / ((block.adam_v.array() / c2).sqrt() + eps);
}

}  // namespace nrr
