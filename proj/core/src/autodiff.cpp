// Copyright Contributors to the nrr Project
// SPDX-License-Identifier: Apache-2.0
#include "nrr/autodiff.h"

#include <cmath>
#include <stdexcept>

namespace nrr::ad {

namespace {

void check(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

Var Tape::push(Mat value, bool requires_grad, std::function<void(Tape&, const Mat&)> pull) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  n.pull = std::move(pull);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

void Tape::accumulate(int id, const Mat& g) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

Var Tape::leaf(Mat value, bool requires_grad) {
  return push(std::move(value), requires_grad, nullptr);
}

Var Tape::add(Var a, Var b) {
  check(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(),
        "add: shape mismatch");
  return push(value(a) + value(b), needs(a) || needs(b), [a, b](Tape& t, const Mat& g) {
    t.accumulate(a.id, g);
    t.accumulate(b.id, g);
  });
}

Var Tape::sub(Var a, Var b) {
  check(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(),
        "sub: shape mismatch");
  return push(value(a) - value(b), needs(a) || needs(b), [a, b](Tape& t, const Mat& g) {
    t.accumulate(a.id, g);
    t.accumulate(b.id, -g);
  });
}

Var Tape::neg(Var a) {
  return push(-value(a), needs(a), [a](Tape& t, const Mat& g) { t.accumulate(a.id, -g); });
}

Var Tape::mul(Var a, Var b) {
  check(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(),
        "mul: shape mismatch");
  return push(value(a).cwiseProduct(value(b)), needs(a) || needs(b),
              [a, b](Tape& t, const Mat& g) {
                t.accumulate(a.id, g.cwiseProduct(t.value(b)));
                t.accumulate(b.id, g.cwiseProduct(t.value(a)));
              });
}

Var Tape::div(Var a, Var b) {
  check(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(),
        "div: shape mismatch");
  return push(value(a).cwiseQuotient(value(b)), needs(a) || needs(b),
              [a, b](Tape& t, const Mat& g) {
                const Mat& bv = t.value(b);
                t.accumulate(a.id, g.cwiseQuotient(bv));
                t.accumulate(b.id, -g.cwiseProduct(t.value(a)).cwiseQuotient(bv.cwiseProduct(bv)));
              });
}

Var Tape::scale(Var a, double s) {
  return push(value(a) * s, needs(a), [a, s](Tape& t, const Mat& g) { t.accumulate(a.id, g * s); });
}

Var Tape::add_scalar(Var a, double c) {
  return push(value(a).array() + c, needs(a), [a](Tape& t, const Mat& g) { t.accumulate(a.id, g); });
}

Var Tape::add_colvec(Var a, Var c) {
  check(value(c).cols() == 1 && value(c).rows() == value(a).rows(), "add_colvec: shape mismatch");
  Mat out = value(a);
  out.colwise() += Eigen::VectorXd(value(c).col(0));
  return push(std::move(out), needs(a) || needs(c), [a, c](Tape& t, const Mat& g) {
    t.accumulate(a.id, g);
    t.accumulate(c.id, g.rowwise().sum());
  });
}

Var Tape::mul_colvec(Var a, Var c) {
  check(value(c).cols() == 1 && value(c).rows() == value(a).rows(), "mul_colvec: shape mismatch");
  Mat out = value(a).array().colwise() * value(c).col(0).array();
  return push(std::move(out), needs(a) || needs(c), [a, c](Tape& t, const Mat& g) {
    t.accumulate(a.id, g.array().colwise() * t.value(c).col(0).array());
    t.accumulate(c.id, g.cwiseProduct(t.value(a)).rowwise().sum());
  });
}

Var Tape::mul_rowvec(Var a, Var r) {
  check(value(r).rows() == 1 && value(r).cols() == value(a).cols(), "mul_rowvec: shape mismatch");
  Mat out = value(a).array().rowwise() * value(r).row(0).array();
  return push(std::move(out), needs(a) || needs(r), [a, r](Tape& t, const Mat& g) {
    t.accumulate(a.id, g.array().rowwise() * t.value(r).row(0).array());
    t.accumulate(r.id, g.cwiseProduct(t.value(a)).colwise().sum());
  });
}

Var Tape::mul_scalarvar(Var a, Var s) {
  check(value(s).size() == 1, "mul_scalarvar: s must be 1x1");
  return push(value(a) * value(s)(0, 0), needs(a) || needs(s), [a, s](Tape& t, const Mat& g) {
    t.accumulate(a.id, g * t.value(s)(0, 0));
    Mat gs(1, 1);
    gs(0, 0) = g.cwiseProduct(t.value(a)).sum();
    t.accumulate(s.id, gs);
  });
}

Var Tape::relu(Var a) {
  return push(value(a).cwiseMax(0.0), needs(a), [a](Tape& t, const Mat& g) {
    t.accumulate(a.id, (t.value(a).array() > 0.0).cast<double>().matrix().cwiseProduct(g));
  });
}

Var Tape::sigmoid(Var a) {
  Mat out = (1.0 / (1.0 + (-value(a).array()).exp())).matrix();
  Var v = push(std::move(out), needs(a), nullptr);
  nodes_[v.id].pull = [a, v](Tape& t, const Mat& g) {
    const auto& s = t.value(v).array();
    t.accumulate(a.id, (g.array() * s * (1.0 - s)).matrix());
  };
  return v;
}

Var Tape::exp(Var a) {
  Var v = push(value(a).array().exp().matrix(), needs(a), nullptr);
  nodes_[v.id].pull = [a, v](Tape& t, const Mat& g) {
    t.accumulate(a.id, g.cwiseProduct(t.value(v)));
  };
  return v;
}

Var Tape::log(Var a) {
  return push(value(a).array().log().matrix(), needs(a), [a](Tape& t, const Mat& g) {
    t.accumulate(a.id, g.cwiseQuotient(t.value(a)));
  });
}

Var Tape::sin(Var a) {
  return push(value(a).array().sin().matrix(), needs(a), [a](Tape& t, const Mat& g) {
    t.accumulate(a.id, g.cwiseProduct(t.value(a).array().cos().matrix()));
  });
}

Var Tape::cos(Var a) {
  return push(value(a).array().cos().matrix(), needs(a), [a](Tape& t, const Mat& g) {
    t.accumulate(a.id, -g.cwiseProduct(t.value(a).array().sin().matrix()));
  });
}

Var Tape::abs(Var a) {
  return push(value(a).cwiseAbs(), needs(a), [a](Tape& t, const Mat& g) {
    t.accumulate(a.id, g.cwiseProduct(t.value(a).array().sign().matrix()));
  });
}

Var Tape::square(Var a) {
  return push(value(a).array().square().matrix(), needs(a), [a](Tape& t, const Mat& g) {
    t.accumulate(a.id, 2.0 * g.cwiseProduct(t.value(a)));
  });
}

Var Tape::sqrt_safe(Var a) {
  Var v = push(value(a).cwiseMax(0.0).cwiseSqrt(), needs(a), nullptr);
  nodes_[v.id].pull = [a, v](Tape& t, const Mat& g) {
    const Mat& out = t.value(v);
    Mat ga = Mat::Zero(out.rows(), out.cols());
    for (Eigen::Index j = 0; j < out.cols(); ++j)
      for (Eigen::Index i = 0; i < out.rows(); ++i)
        if (out(i, j) > 0.0) ga(i, j) = 0.5 * g(i, j) / out(i, j);
    t.accumulate(a.id, ga);
  };
  return v;
}

Var Tape::matmul(Var a, Var b) {
  check(value(a).cols() == value(b).rows(), "matmul: inner dimension mismatch");
  return push(value(a) * value(b), needs(a) || needs(b), [a, b](Tape& t, const Mat& g) {
    t.accumulate(a.id, g * t.value(b).transpose());
    t.accumulate(b.id, t.value(a).transpose() * g);
  });
}

Var Tape::transpose(Var a) {
  return push(value(a).transpose(), needs(a), [a](Tape& t, const Mat& g) {
    t.accumulate(a.id, g.transpose());
  });
}

Var Tape::concat_rows(const std::vector<Var>& parts) {
  check(!parts.empty(), "concat_rows: empty");
  Eigen::Index cols = value(parts[0]).cols();
  Eigen::Index rows = 0;
  bool rg = false;
  for (Var p : parts) {
    check(value(p).cols() == cols, "concat_rows: column mismatch");
    rows += value(p).rows();
    rg = rg || needs(p);
  }
  Mat out(rows, cols);
  Eigen::Index r = 0;
  for (Var p : parts) {
    out.middleRows(r, value(p).rows()) = value(p);
    r += value(p).rows();
  }
  std::vector<Var> ps = parts;
  return push(std::move(out), rg, [ps](Tape& t, const Mat& g) {
    Eigen::Index r = 0;
    for (Var p : ps) {
      Eigen::Index n = t.value(p).rows();
      t.accumulate(p.id, g.middleRows(r, n));
      r += n;
    }
  });
}

Var Tape::slice_rows(Var a, int row0, int nrows) {
  check(row0 >= 0 && row0 + nrows <= value(a).rows(), "slice_rows: out of range");
  return push(value(a).middleRows(row0, nrows), needs(a),
              [a, row0, nrows](Tape& t, const Mat& g) {
                Mat ga = Mat::Zero(t.value(a).rows(), t.value(a).cols());
                ga.middleRows(row0, nrows) = g;
                t.accumulate(a.id, ga);
              });
}

Var Tape::slice_cols(Var a, int col0, int ncols) {
  check(col0 >= 0 && col0 + ncols <= value(a).cols(), "slice_cols: out of range");
  return push(value(a).middleCols(col0, ncols), needs(a),
              [a, col0, ncols](Tape& t, const Mat& g) {
                Mat ga = Mat::Zero(t.value(a).rows(), t.value(a).cols());
                ga.middleCols(col0, ncols) = g;
                t.accumulate(a.id, ga);
              });
}

Var Tape::select_cols(Var a, const std::vector<int>& indices) {
  Mat out(value(a).rows(), static_cast<Eigen::Index>(indices.size()));
  for (size_t i = 0; i < indices.size(); ++i) {
    check(indices[i] >= 0 && indices[i] < value(a).cols(), "select_cols: index out of range");
    out.col(static_cast<Eigen::Index>(i)) = value(a).col(indices[i]);
  }
  std::vector<int> idx = indices;
  return push(std::move(out), needs(a), [a, idx](Tape& t, const Mat& g) {
    Mat ga = Mat::Zero(t.value(a).rows(), t.value(a).cols());
    for (size_t i = 0; i < idx.size(); ++i) ga.col(idx[i]) += g.col(static_cast<Eigen::Index>(i));
    t.accumulate(a.id, ga);
  });
}

Var Tape::reshape(Var a, int rows, int cols) {
  check(rows * cols == value(a).size(), "reshape: size mismatch");
  Mat out = Eigen::Map<const Mat>(value(a).data(), rows, cols);
  return push(std::move(out), needs(a), [a](Tape& t, const Mat& g) {
    t.accumulate(a.id, Eigen::Map<const Mat>(g.data(), t.value(a).rows(), t.value(a).cols()));
  });
}

Var Tape::sum(Var a) {
  Mat out(1, 1);
  out(0, 0) = value(a).sum();
  return push(std::move(out), needs(a), [a](Tape& t, const Mat& g) {
    t.accumulate(a.id, Mat::Constant(t.value(a).rows(), t.value(a).cols(), g(0, 0)));
  });
}

Var Tape::colwise_sum(Var a) {
  return push(value(a).colwise().sum(), needs(a), [a](Tape& t, const Mat& g) {
    Mat ga = g.replicate(t.value(a).rows(), 1);
    t.accumulate(a.id, ga);
  });
}

Var Tape::rowwise_sum(Var a) {
  return push(value(a).rowwise().sum(), needs(a), [a](Tape& t, const Mat& g) {
    Mat ga = g.replicate(1, t.value(a).cols());
    t.accumulate(a.id, ga);
  });
}

Var Tape::sum_col_blocks(Var a, int block) {
  check(block >= 1 && value(a).cols() % block == 0, "sum_col_blocks: block must divide cols");
  Eigen::Index nb = value(a).cols() / block;
  Mat out(value(a).rows(), nb);
  for (Eigen::Index j = 0; j < nb; ++j)
    out.col(j) = value(a).middleCols(j * block, block).rowwise().sum();
  return push(std::move(out), needs(a), [a, block](Tape& t, const Mat& g) {
    Mat ga(t.value(a).rows(), t.value(a).cols());
    for (Eigen::Index j = 0; j < g.cols(); ++j)
      ga.middleCols(j * block, block) = g.col(j).replicate(1, block);
    t.accumulate(a.id, ga);
  });
}

Var Tape::cumsum_cols_exclusive(Var a) {
  const Mat& av = value(a);
  Mat out = Mat::Zero(av.rows(), av.cols());
  for (Eigen::Index j = 0; j < av.cols(); ++j) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < av.rows(); ++i) {
      out(i, j) = acc;
      acc += av(i, j);
    }
  }
  return push(std::move(out), needs(a), [a](Tape& t, const Mat& g) {
    // d out(i)/d a(k) = 1 for k < i -> grad a(k) = sum_{i>k} g(i)
    Mat ga = Mat::Zero(g.rows(), g.cols());
    for (Eigen::Index j = 0; j < g.cols(); ++j) {
      double acc = 0.0;
      for (Eigen::Index i = g.rows() - 1; i >= 0; --i) {
        ga(i, j) = acc;
        acc += g(i, j);
      }
    }
    t.accumulate(a.id, ga);
  });
}

Var Tape::softmax_cols(Var a) {
  const Mat& av = value(a);
  Mat out(av.rows(), av.cols());
  for (Eigen::Index j = 0; j < av.cols(); ++j) {
    double m = av.col(j).maxCoeff();
    Eigen::VectorXd e = (av.col(j).array() - m).exp();
    out.col(j) = e / e.sum();
  }
  Var v = push(std::move(out), needs(a), nullptr);
  nodes_[v.id].pull = [a, v](Tape& t, const Mat& g) {
    const Mat& s = t.value(v);
    Mat gs = g.cwiseProduct(s);
    Eigen::RowVectorXd dot = gs.colwise().sum();
    Mat ga = gs - (s.array().rowwise() * dot.array()).matrix();
    t.accumulate(a.id, ga);
  };
  return v;
}

Var Tape::positional_encode(Var a, int bands) {
  check(bands >= 1, "positional_encode: bands must be >= 1");
  const Mat& x = value(a);
  const Eigen::Index d = x.rows(), n = x.cols();
  Mat out(d * (2 * bands + 1), n);
  out.topRows(d) = x;
  for (Eigen::Index c = 0; c < d; ++c) {
    for (int k = 0; k < bands; ++k) {
      double f = std::ldexp(1.0, k);  // 2^k
      out.row(d + c * 2 * bands + 2 * k) = (x.row(c).array() * f).sin();
      out.row(d + c * 2 * bands + 2 * k + 1) = (x.row(c).array() * f).cos();
    }
  }
  return push(std::move(out), needs(a), [a, bands](Tape& t, const Mat& g) {
    const Mat& x = t.value(a);
    const Eigen::Index d = x.rows();
    Mat ga = g.topRows(d);
    for (Eigen::Index c = 0; c < d; ++c) {
      for (int k = 0; k < bands; ++k) {
        double f = std::ldexp(1.0, k);
        auto arg = (x.row(c).array() * f);
        ga.row(c) += f * (g.row(d + c * 2 * bands + 2 * k).array() * arg.cos() -
                          g.row(d + c * 2 * bands + 2 * k + 1).array() * arg.sin())
                         .matrix();
      }
    }
    t.accumulate(a.id, ga);
  });
}

Var Tape::sdf_density(Var d, Var log_alpha) {
  check(value(d).rows() == 1, "sdf_density: d must be 1xN");
  check(value(log_alpha).size() == 1, "sdf_density: log_alpha must be 1x1");
  const double alpha = std::exp(value(log_alpha)(0, 0));
  const Mat& dv = value(d);
  Mat out(1, dv.cols());
  for (Eigen::Index j = 0; j < dv.cols(); ++j) {
    double x = dv(0, j);
    if (x >= 0.0)
      out(0, j) = std::exp(-x / alpha) / (2.0 * alpha);
    else
      out(0, j) = (1.0 - 0.5 * std::exp(x / alpha)) / alpha;
  }
  return push(std::move(out), needs(d) || needs(log_alpha),
              [d, log_alpha, alpha](Tape& t, const Mat& g) {
                const Mat& dv = t.value(d);
                Mat gd(1, dv.cols());
                double glog = 0.0;
                const double a2 = alpha * alpha, a3 = a2 * alpha;
                for (Eigen::Index j = 0; j < dv.cols(); ++j) {
                  double x = dv(0, j);
                  double e = std::exp(-std::fabs(x) / alpha);
                  gd(0, j) = g(0, j) * (-e / (2.0 * a2));
                  double dsig_da;
                  if (x >= 0.0)
                    dsig_da = e * (x - alpha) / (2.0 * a3);
                  else
                    dsig_da = -1.0 / a2 + e * (x + alpha) / (2.0 * a3);
                  glog += g(0, j) * dsig_da * alpha;  // chain through alpha = exp(log_alpha)
                }
                t.accumulate(d.id, gd);
                Mat gl(1, 1);
                gl(0, 0) = glog;
                t.accumulate(log_alpha.id, gl);
              });
}

Var Tape::rodrigues(Var w) {
  check(value(w).rows() == 3 && value(w).cols() == 1, "rodrigues: w must be 3x1");
  const Eigen::Vector3d wv = value(w).col(0);
  const double theta2 = wv.squaredNorm();
  Mat R;
  if (theta2 < 1e-24) {
    R = Mat::Identity(3, 3);
    Mat K(3, 3);
    K << 0, -wv.z(), wv.y(), wv.z(), 0, -wv.x(), -wv.y(), wv.x(), 0;
    R += K;  // first-order term keeps gradients alive at w = 0
  } else {
    const double theta = std::sqrt(theta2);
    Eigen::Vector3d k = wv / theta;
    Mat K(3, 3);
    K << 0, -k.z(), k.y(), k.z(), 0, -k.x(), -k.y(), k.x(), 0;
    R = Mat::Identity(3, 3) + std::sin(theta) * K + (1.0 - std::cos(theta)) * (K * K);
  }
  Var v = push(std::move(R), needs(w), nullptr);
  nodes_[v.id].pull = [w, v](Tape& t, const Mat& g) {
    const Eigen::Vector3d wv = t.value(w).col(0);
    const Mat& R = t.value(v);
    const double theta2 = wv.squaredNorm();
    Mat gw(3, 1);
    auto skew = [](const Eigen::Vector3d& u) {
      Eigen::Matrix3d S;
      S << 0, -u.z(), u.y(), u.z(), 0, -u.x(), -u.y(), u.x(), 0;
      return S;
    };
    if (theta2 < 1e-24) {
      // dR/dw_i -> skew(e_i) at w = 0
      for (int i = 0; i < 3; ++i) {
        Eigen::Vector3d e = Eigen::Vector3d::Zero();
        e(i) = 1.0;
        gw(i, 0) = (g.array() * skew(e).array()).sum();
      }
    } else {
      // Gallego & Yezzi closed form for dR/dw_i.
      Eigen::Matrix3d W = skew(wv);
      Eigen::Matrix3d ImR = Eigen::Matrix3d::Identity() - R;
      for (int i = 0; i < 3; ++i) {
        Eigen::Vector3d e = Eigen::Vector3d::Zero();
        e(i) = 1.0;
        Eigen::Matrix3d dR = ((wv(i) * W + skew(wv.cross(ImR * e))) / theta2) * R;
        gw(i, 0) = (g.array() * dR.array()).sum();
      }
    }
    t.accumulate(w.id, gw);
  };
  return v;
}

Var Tape::detach(Var a) { return push(value(a), false, nullptr); }

void Tape::backward(Var root) {
  check(value(root).size() == 1, "backward: root must be a scalar");
  backward(root, Mat::Constant(1, 1, 1.0));
}

void Tape::backward(Var root, const Mat& seed) {
  check(seed.rows() == value(root).rows() && seed.cols() == value(root).cols(),
        "backward: seed shape mismatch");
  for (auto& n : nodes_) n.grad.resize(0, 0);
  accumulate(root.id, seed);
  for (int i = root.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.size() == 0 || !n.pull) continue;
    n.pull(*this, n.grad);
  }
}

Mat Tape::grad(Var v) const {
  const Node& n = nodes_[v.id];
  if (n.grad.size() == 0) return Mat::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

}  // namespace nrr::ad
