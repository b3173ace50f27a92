// Copyright Contributors to the nrr Project
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "nrr/autodiff.h"
#include "nrr/geometry.h"
#include "nrr/rng.h"

using namespace nrr;

TEST_CASE("positional_encode zero input") {
  const Eigen::VectorXd enc = positional_encode(Eigen::Vector3d::Zero(), 10);
  REQUIRE(enc.size() == 63);
  CHECK(enc.head<3>().cwiseAbs().maxCoeff() == 0.0);
  for (int c = 0; c < 3; ++c) {
    for (int k = 0; k < 10; ++k) {
      CHECK(enc(3 + c * 20 + 2 * k) == 0.0);      // sin
      CHECK(enc(3 + c * 20 + 2 * k + 1) == 1.0);  // cos
    }
  }
}

TEST_CASE("positional_encode scalar direct evaluation") {
  Eigen::VectorXd x(1);
  x << 0.5;
  const Eigen::VectorXd enc = positional_encode(x, 1);
  REQUIRE(enc.size() == 3);
  CHECK(enc(0) == 0.5);
  CHECK(enc(1) == doctest::Approx(std::sin(0.5)));
  CHECK(enc(2) == doctest::Approx(std::cos(0.5)));
}

TEST_CASE("positional_encode output length is dim*(2L+1)") {
  RngStream rng(3);
  for (int dim : {1, 2, 3, 7}) {
    for (int bands : {1, 3, 10}) {
      Eigen::VectorXd x(dim);
      for (int i = 0; i < dim; ++i) x(i) = rng.normal();
      CHECK(positional_encode(x, bands).size() == dim * (2 * bands + 1));
    }
  }
  CHECK_THROWS_AS(positional_encode(Eigen::Vector3d::Zero(), 0), std::invalid_argument);
}

TEST_CASE("sdf_to_density closed-form values") {
  CHECK(sdf_to_density(0.0, 0.25) == doctest::Approx(1.0 / 0.5));
  CHECK(sdf_to_density(50.0, 0.1) == doctest::Approx(0.0).epsilon(1e-12));
  // Laplace CDF at ln 2 with unit scale: 1 - 0.25.
  CHECK(sdf_to_density(-std::log(2.0), 1.0) == doctest::Approx(0.75));
  CHECK_THROWS_AS(sdf_to_density(0.1, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(sdf_to_density(0.1, -1.0), std::invalid_argument);
}

TEST_CASE("sdf_to_density is monotone decreasing") {
  RngStream rng(5);
  for (int i = 0; i < 200; ++i) {
    const double alpha = rng.uniform(0.01, 2.0);
    double d1 = rng.uniform(-1.0, 1.0), d2 = rng.uniform(-1.0, 1.0);
    if (d1 == d2) continue;
    if (d1 > d2) std::swap(d1, d2);
    CHECK(sdf_to_density(d1, alpha) > sdf_to_density(d2, alpha));
  }
}

TEST_CASE("composite trivial cases") {
  const int h = 5;
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(h);
  Eigen::Matrix3Xd colors = Eigen::Matrix3Xd::Random(3, h).cwiseAbs();
  Eigen::VectorXd intervals = Eigen::VectorXd::Constant(h, 0.1);
  Eigen::Matrix3Xd points = Eigen::Matrix3Xd::Random(3, h);

  CompositeResult empty = composite(zero, colors, intervals, points);
  CHECK(empty.opacity == 0.0);
  CHECK(empty.color.cwiseAbs().maxCoeff() == 0.0);
  CHECK(empty.weights.cwiseAbs().maxCoeff() == 0.0);

  Eigen::VectorXd opaque = Eigen::VectorXd::Zero(h);
  opaque(0) = 500.0;  // sigma * delta = 50
  CompositeResult sat = composite(opaque, colors, intervals, points);
  CHECK(sat.weights(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((sat.color - colors.col(0)).cwiseAbs().maxCoeff() < 1e-12);

  CHECK_THROWS_AS(composite(zero, colors.leftCols(3), intervals, points), std::invalid_argument);
}

TEST_CASE("composite homogeneous medium matches the analytic integral") {
  const int h = 128;
  const double sigma0 = 1.7, near = 0.2, far = 1.4;
  Ray ray{Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitZ(), near, far};
  RaySamples s = sample_uniform(ray, h);
  CompositeResult res = composite(Eigen::VectorXd::Constant(h, sigma0),
                                  Eigen::Matrix3Xd::Ones(3, h), s.intervals, s.points);
  const double expect = 1.0 - std::exp(-sigma0 * (far - near));
  CHECK(res.opacity == doctest::Approx(expect).epsilon(1e-3));
}

TEST_CASE("composite weights form a sub-probability vector") {
  RngStream rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const int h = 1 + static_cast<int>(rng.below(40));
    Eigen::VectorXd dens(h), intervals(h);
    for (int i = 0; i < h; ++i) {
      dens(i) = rng.uniform(0.0, 30.0);
      intervals(i) = rng.uniform(1e-4, 0.2);
    }
    CompositeResult res = composite(dens, Eigen::Matrix3Xd::Zero(3, h), intervals,
                                    Eigen::Matrix3Xd::Zero(3, h));
    CHECK(res.weights.minCoeff() >= 0.0);
    CHECK(res.weights.sum() <= 1.0 + 1e-12);
    CHECK(res.opacity == doctest::Approx(res.weights.sum()));
  }
}

TEST_CASE("sample_uniform bin centers and single sample") {
  Ray ray{Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitZ(), 0.1, 1.1};
  RaySamples one = sample_uniform(ray, 1);
  CHECK(one.depths(0) == doctest::Approx(0.6));
  CHECK(one.intervals(0) == doctest::Approx(0.5));

  RaySamples ten = sample_uniform(ray, 10);
  for (int i = 0; i < 10; ++i) CHECK(ten.depths(i) == doctest::Approx(0.15 + 0.1 * i));
  for (int i = 0; i < 10; ++i)
    CHECK((ten.points.col(i) - ray.origin - ten.depths(i) * ray.direction).norm() < 1e-15);
  CHECK_THROWS_AS(sample_uniform(ray, 0), std::invalid_argument);
}

TEST_CASE("sample_importance concentrates in the weighted bin") {
  Ray ray{Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitZ(), 0.0, 1.0};
  RaySamples coarse = sample_uniform(ray, 10);
  Eigen::VectorXd weights = Eigen::VectorXd::Zero(10);
  weights(4) = 1.0;
  RngStream rng(11);
  RaySamples merged = sample_importance(ray, coarse, weights, 16, &rng);
  CHECK(merged.depths.size() == 26);
  // The 16 fresh depths all land inside bin 4, bounded by the midpoint edges
  // around its center: [0.40, 0.50).
  int inside = 0;
  for (int i = 0; i < merged.depths.size(); ++i)
    if (merged.depths(i) > 0.40 && merged.depths(i) < 0.50 &&
        merged.depths(i) != coarse.depths(4)) ++inside;
  CHECK(inside >= 16);
  for (int i = 1; i < merged.depths.size(); ++i) CHECK(merged.depths(i) >= merged.depths(i - 1));
}

TEST_CASE("sample_importance uniform weights pass a KS check") {
  Ray ray{Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitZ(), 0.0, 1.0};
  RaySamples coarse = sample_uniform(ray, 16);
  Eigen::VectorXd weights = Eigen::VectorXd::Ones(16);
  RngStream rng(13);
  const int n = 10000;
  RaySamples merged = sample_importance(ray, coarse, weights, n, &rng);
  // Collect only the fresh draws by removing the known coarse depths.
  std::vector<double> fresh;
  int ci = 0;
  for (int i = 0; i < merged.depths.size(); ++i) {
    if (ci < coarse.depths.size() && merged.depths(i) == coarse.depths(ci)) {
      ++ci;
      continue;
    }
    fresh.push_back(merged.depths(i));
  }
  REQUIRE(static_cast<int>(fresh.size()) == n);
  double ks = 0.0;
  for (size_t i = 0; i < fresh.size(); ++i) {
    const double cdf = fresh[i];  // uniform on [0,1]
    ks = std::max(ks, std::abs(cdf - static_cast<double>(i + 1) / n));
    ks = std::max(ks, std::abs(cdf - static_cast<double>(i) / n));
  }
  CHECK(ks < 0.02);
}

TEST_CASE("sample_importance all-zero weights falls back to uniform") {
  Ray ray{Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitZ(), 0.0, 1.0};
  RaySamples coarse = sample_uniform(ray, 8);
  RaySamples merged = sample_importance(ray, coarse, Eigen::VectorXd::Zero(8), 8, nullptr);
  CHECK(merged.depths.size() == 16);
  for (int i = 1; i < merged.depths.size(); ++i) CHECK(merged.depths(i) >= merged.depths(i - 1));
  CHECK_THROWS_AS(sample_importance(ray, coarse, -Eigen::VectorXd::Ones(8), 4, nullptr),
                  std::invalid_argument);
}

// The discrete compositing rules rebuilt on the autodiff tape: gradients of
// the composited color w.r.t. every density and color entry match central
// finite differences.
TEST_CASE("composite gradients match finite differences") {
  using ad::Mat;
  using ad::Tape;
  using ad::Var;
  const int h = 6;
  RngStream rng(99);
  Mat densities(1, h), colors(3, h), intervals(1, h);
  for (int i = 0; i < h; ++i) {
    densities(0, i) = rng.uniform(0.0, 8.0);
    intervals(0, i) = rng.uniform(0.05, 0.2);
    for (int c = 0; c < 3; ++c) colors(c, i) = rng.uniform();
  }

  auto composite_color = [&](Tape& t, Var dens, Var cols) {
    Var seg = t.mul(dens, t.constant(intervals));
    Var tr = t.exp(t.neg(t.cumsum_cols_exclusive(t.transpose(seg))));  // h x 1
    Var absorb = t.sub(t.constant(Mat::Ones(h, 1)), t.exp(t.neg(t.transpose(seg))));
    Var mu = t.transpose(t.mul(tr, absorb));  // 1 x h
    return t.rowwise_sum(t.mul_rowvec(cols, mu));  // 3 x 1
  };

  // Values agree with the plain composite().
  {
    Tape t;
    Var out = composite_color(t, t.constant(densities), t.constant(colors));
    CompositeResult plain = composite(densities.row(0).transpose(), colors,
                                      intervals.row(0).transpose(), Eigen::Matrix3Xd::Zero(3, h));
    CHECK((t.value(out).col(0) - plain.color).cwiseAbs().maxCoeff() < 1e-12);
  }

  const double step = 1e-5;
  for (int channel = 0; channel < 3; ++channel) {
    Tape t;
    Var dens = t.leaf(densities, true);
    Var cols = t.leaf(colors, true);
    Var out = t.slice_rows(composite_color(t, dens, cols), channel, 1);
    t.backward(out);
    const Mat gd = t.grad(dens), gc = t.grad(cols);

    auto value_at = [&](const Mat& d, const Mat& c) {
      Tape tt;
      return tt.value(
          tt.slice_rows(composite_color(tt, tt.constant(d), tt.constant(c)), channel, 1))(0, 0);
    };
    for (int i = 0; i < h; ++i) {
      Mat dp = densities, dm = densities;
      dp(0, i) += step;
      dm(0, i) -= step;
      const double fd = (value_at(dp, colors) - value_at(dm, colors)) / (2.0 * step);
      CHECK(gd(0, i) == doctest::Approx(fd).epsilon(1e-4).scale(1.0));
      for (int c = 0; c < 3; ++c) {
        Mat cp = colors, cm = colors;
        cp(c, i) += step;
        cm(c, i) -= step;
        const double fdc = (value_at(densities, cp) - value_at(densities, cm)) / (2.0 * step);
        CHECK(gc(c, i) == doctest::Approx(fdc).epsilon(1e-4).scale(1.0));
      }
    }
  }
}
