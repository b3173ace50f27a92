// Copyright Contributors to the nrr Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "nrr/autodiff.h"
#include "nrr/deformation.h"
#include "nrr/transforms.h"

namespace nrr {

struct ParamBlock;

// One Adam step on `block` from its accumulated gradient.
void adam_update(ParamBlock& block, double lr, double beta1 = 0.9, double beta2 = 0.999,
                 double eps = 1e-8);

// One named flat parameter vector plus its gradient accumulator and Adam
// moments. Everything the optimizer touches lives in blocks.
struct ParamBlock {
  std::string name;
  Eigen::VectorXd value;
  Eigen::VectorXd grad;
  Eigen::VectorXd adam_m;
  Eigen::VectorXd adam_v;
  int64_t adam_updates = 0;

  void resize(Eigen::Index n) {
    value = Eigen::VectorXd::Zero(n);
    grad = Eigen::VectorXd::Zero(n);
    adam_m = Eigen::VectorXd::Zero(n);
    adam_v = Eigen::VectorXd::Zero(n);
    adam_updates = 0;
  }
  void zero_grad() { grad.setZero(); }
};

// Binds slices of parameter blocks as tape leaves and scatters tape gradients
// back after backward(). Bindings are deduplicated per (block, offset, shape)
// so repeated network evaluations share leaves.
class ParamBinder {
 public:
  ParamBinder(ad::Tape& tape, bool with_grad) : tape_(tape), with_grad_(with_grad) {}

  ad::Var bind(ParamBlock& block) {
    return bind(block, 0, static_cast<int>(block.value.size()), 1);
  }
  ad::Var bind(ParamBlock& block, int offset, int rows, int cols);

  // block.grad += tape gradient of every binding, in bind order.
  void scatter();

 private:
  struct Entry {
    ParamBlock* block;
    int offset, rows, cols;
    ad::Var var;
  };
  ad::Tape& tape_;
  bool with_grad_;
  std::vector<Entry> entries_;
  std::unordered_map<std::string, int> index_;
};

struct MlpSpec {
  int input = 0;
  int output = 0;
  int hidden = 256;
  int layers = 8;  // linear layers total, rectifier between them
  bool sigmoid_output = false;
  bool zero_init_last = false;
};

// Fully connected network with parameters in one flat block.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::string name, const MlpSpec& spec, uint64_t seed);

  ad::Var eval(ad::Tape& tape, ParamBinder& binder, ad::Var input);
  Eigen::MatrixXd eval_plain(const Eigen::MatrixXd& input) const;

  ParamBlock& params() { return block_; }
  const ParamBlock& params() const { return block_; }
  const MlpSpec& spec() const { return spec_; }

 private:
  struct Layer {
    int rows, cols, w_off, b_off;
  };
  MlpSpec spec_;
  ParamBlock block_;
  std::vector<Layer> layers_;
};

struct FieldConfig {
  int pos_bands = 10;
  int dir_bands = 4;
  int hidden = 256;
  int layers = 8;
  int quad_hidden = 128;
  int quad_layers = 6;
  int embed_dim = 16;
  int env_code_dim = 64;
  int pose_code_dim = 128;
  int deform_code_dim = 128;
  int bone_count = 25;
  int frame_count = 1;
  double init_alpha = 0.1;
  double bone_init_radius = 0.3;
  uint64_t seed = 1;
};

enum class Branch { kCoarse, kFine };

// Per-frame transform pair on the tape.
struct TransformVar {
  ad::Var rotation;     // 3x3
  ad::Var translation;  // 3x1
};

// All learnable fields: canonical networks (coarse + fine), pose networks,
// skinning-delta and quadratic-coefficient networks, per-frame latent codes,
// bone geometry, and the density sharpness alpha.
class FieldBundle {
 public:
  explicit FieldBundle(const FieldConfig& config);

  const FieldConfig& config() const { return config_; }

  // ---- tape-level evaluation (batched, differentiable) ----
  ad::Var sdf(ad::Tape& t, ParamBinder& b, ad::Var points, Branch which);
  ad::Var color(ad::Tape& t, ParamBinder& b, ad::Var points, ad::Var dirs, int frame, Branch which);
  ad::Var embedding(ad::Tape& t, ParamBinder& b, ad::Var points);
  ad::Var skin_delta(ad::Tape& t, ParamBinder& b, ad::Var points, int frame);  // B x N
  // 27 x N coefficient columns with the identity residual already added:
  // rows r*9+c hold A(r,c) for the column's point.
  ad::Var quad_coeffs_var(ad::Tape& t, ParamBinder& b, ad::Var points, int frame);
  TransformVar root_transform(ad::Tape& t, ParamBinder& b, int frame, const RigidTransform& init);
  // One network pass over every frame's code; used by the camera smoothness
  // term which spans the whole trajectory.
  std::vector<TransformVar> root_transforms_all(ad::Tape& t, ParamBinder& b,
                                                const std::vector<RigidTransform>& inits);
  std::vector<TransformVar> bone_transforms(ad::Tape& t, ParamBinder& b, int frame);
  ad::Var log_alpha(ad::Tape& t, ParamBinder& b);
  // Bone geometry on the tape: centers 3x1, precision 3x3 per bone.
  struct BoneVars {
    std::vector<ad::Var> centers;
    std::vector<ad::Var> precisions;
  };
  BoneVars bone_vars(ad::Tape& t, ParamBinder& b);

  // ---- plain single-point interface ----
  Eigen::Vector3d canonical_color(const Eigen::Vector3d& x, const Eigen::Vector3d& view_dir,
                                  const Eigen::VectorXd& env_code, Branch which) const;
  double canonical_sdf(const Eigen::Vector3d& x, Branch which) const;
  Eigen::VectorXd canonical_embedding(const Eigen::Vector3d& x) const;
  RigidTransform root_pose(int frame, const RigidTransform& init_pose) const;
  RigidTransform bone_pose(int frame, int bone) const;
  QuadraticCoeffs quad_coeffs(const Eigen::Vector3d& x, int frame) const;

  // Batched plain evaluation (no tape), chunk-friendly.
  Eigen::VectorXd sdf_plain(const Eigen::Matrix3Xd& points, Branch which) const;
  Eigen::MatrixXd embedding_plain(const Eigen::Matrix3Xd& points) const;
  Eigen::Matrix3Xd color_plain(const Eigen::Matrix3Xd& points, const Eigen::Matrix3Xd& dirs,
                               int frame, Branch which) const;
  Eigen::MatrixXd quad_coeffs_plain(const Eigen::Matrix3Xd& points, int frame) const;  // 27 x N
  Eigen::MatrixXd skin_delta_plain(const Eigen::Matrix3Xd& points, int frame) const;   // B x N

  double alpha() const;
  BoneSet bones() const;
  void set_bones(const BoneSet& bones);
  Eigen::VectorXd env_code(int frame) const;
  Eigen::VectorXd deform_code(int frame) const;
  // Overwrites frame `dst`'s latent codes with the mean of `a` and `b`.
  void blend_codes_into(int dst, int a, int b);

  // Brief Adam pre-fit of both SDF networks toward a centered sphere.
  void init_sphere_sdf(double radius, int steps = 1500, uint64_t seed = 7);

  // Fixed-order registry; the optimizer and checksum logic iterate this.
  std::vector<ParamBlock*> blocks();
  ParamBlock* find_block(const std::string& name);

  void save(std::ostream& out) const;
  void load(std::istream& in);

 private:
  Eigen::MatrixXd encoded_plain(const Eigen::Matrix3Xd& pts, int bands) const;

  FieldConfig config_;
  Mlp coarse_color_, coarse_sdf_, embed_, fine_color_, fine_sdf_;
  Mlp root_net_, bone_net_, delta_net_, quad_net_;
  ParamBlock log_alpha_;
  ParamBlock env_codes_, root_codes_, bone_codes_, deform_codes_;
  ParamBlock bone_centers_, bone_rotvecs_, bone_logscales_;
};

}  // namespace nrr
