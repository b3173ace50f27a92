// Copyright Contributors to the nrr Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

namespace nrr::ad {

using Mat = Eigen::MatrixXd;

class Tape;

// Handle to a tape node. Plain index, cheap to copy; only meaningful for the
// tape that produced it.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode autodiff over dense double matrices. One tape records one
// forward evaluation; backward() replays it in reverse. All reductions run
// in a fixed order, so results are bitwise reproducible.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Mat value, bool requires_grad);
  Var constant(Mat value) { return leaf(std::move(value), false); }
  Var scalar(double v) { return constant(Mat::Constant(1, 1, v)); }

  // Elementwise / broadcast arithmetic
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var neg(Var a);
  Var mul(Var a, Var b);          // elementwise
  Var div(Var a, Var b);          // elementwise
  Var scale(Var a, double s);
  Var add_scalar(Var a, double c);
  Var add_colvec(Var a, Var c);   // a(i,j) + c(i)
  Var mul_colvec(Var a, Var c);   // a(i,j) * c(i)
  Var mul_rowvec(Var a, Var r);   // a(i,j) * r(j)
  Var mul_scalarvar(Var a, Var s);  // a * s, s is 1x1

  // Elementwise functions
  Var relu(Var a);
  Var sigmoid(Var a);
  Var exp(Var a);
  Var log(Var a);
  Var sin(Var a);
  Var cos(Var a);
  Var abs(Var a);       // subgradient 0 at 0
  Var square(Var a);
  Var sqrt_safe(Var a); // sqrt with zero gradient where a == 0

  // Linear algebra / structure
  Var matmul(Var a, Var b);
  Var transpose(Var a);
  Var concat_rows(const std::vector<Var>& parts);
  Var slice_rows(Var a, int row0, int nrows);
  Var slice_cols(Var a, int col0, int ncols);
  Var select_cols(Var a, const std::vector<int>& indices);  // gather columns
  Var reshape(Var a, int rows, int cols);  // column-major relabel

  // Reductions
  Var sum(Var a);                      // -> 1x1
  Var colwise_sum(Var a);              // MxN -> 1xN
  Var rowwise_sum(Var a);              // MxN -> Mx1
  Var sum_col_blocks(Var a, int block);  // MxN -> Mx(N/block), sums groups of `block` adjacent columns

  // Scan / normalization along columns
  Var cumsum_cols_exclusive(Var a);    // out(i,j) = sum_{k<i} a(k,j)
  Var softmax_cols(Var a);             // per-column softmax, max-subtracted

  // Domain-fused ops
  // Frequency encoding: rows = [raw; per input row: sin(2^k x), cos(2^k x), k=0..L-1].
  Var positional_encode(Var a, int bands);
  // Laplace-CDF density: sigma = Phi_alpha(-d) / alpha, alpha = exp(log_alpha) (1x1).
  Var sdf_density(Var d, Var log_alpha);
  // Axis-angle (3x1) to rotation matrix (3x3).
  Var rodrigues(Var w);

  Var detach(Var a);

  void backward(Var root);                   // root must be 1x1
  void backward(Var root, const Mat& seed);  // arbitrary seed of root's shape

  const Mat& value(Var v) const { return nodes_[v.id].value; }
  // Gradient of the last backward() root w.r.t. v; zero matrix if none flowed.
  Mat grad(Var v) const;

  int size() const { return static_cast<int>(nodes_.size()); }
  void clear() { nodes_.clear(); }

 private:
  struct Node {
    Mat value;
    Mat grad;  // empty until touched in backward
    bool requires_grad = false;
    std::function<void(Tape&, const Mat&)> pull;  // pushes grad to inputs
  };

  Var push(Mat value, bool requires_grad, std::function<void(Tape&, const Mat&)> pull);
  void accumulate(int id, const Mat& g);
  bool needs(Var v) const { return nodes_[v.id].requires_grad; }

  std::vector<Node> nodes_;
};

}  // namespace nrr::ad
