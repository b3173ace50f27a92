// Copyright Contributors to the nrr Project
// SPDX-License-Identifier: Apache-2.0
#include "nrr/geometry.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nrr {

Eigen::VectorXd positional_encode(const Eigen::VectorXd& x, int bands) {
  if (bands < 1) throw std::invalid_argument("positional_encode: bands must be >= 1");
  const Eigen::Index d = x.size();
  Eigen::VectorXd out(d * (2 * bands + 1));
  out.head(d) = x;
  for (Eigen::Index c = 0; c < d; ++c) {
    for (int k = 0; k < bands; ++k) {
      const double arg = std::ldexp(1.0, k) * x(c);
      out(d + c * 2 * bands + 2 * k) = std::sin(arg);
      out(d + c * 2 * bands + 2 * k + 1) = std::cos(arg);
    }
  }
  return out;
}

double sdf_to_density(double signed_distance, double alpha) {
  if (alpha <= 0.0) throw std::invalid_argument("sdf_to_density: alpha must be positive");
  if (signed_distance >= 0.0) return std::exp(-signed_distance / alpha) / (2.0 * alpha);
  return (1.0 - 0.5 * std::exp(signed_distance / alpha)) / alpha;
}

CompositeResult composite(const Eigen::VectorXd& densities, const Eigen::Matrix3Xd& colors,
                          const Eigen::VectorXd& intervals,
                          const Eigen::Matrix3Xd& canonical_points) {
  const Eigen::Index h_count = densities.size();
  if (h_count < 1 || colors.cols() != h_count || intervals.size() != h_count ||
      canonical_points.cols() != h_count)
    throw std::invalid_argument("composite: mismatched lengths");

  CompositeResult res;
  res.weights.resize(h_count);
  res.color.setZero();
  res.expected_point.setZero();
  double transmittance = 1.0;
  for (Eigen::Index h = 0; h < h_count; ++h) {
    const double rho = std::exp(-densities(h) * intervals(h));
    const double mu = transmittance * (1.0 - rho);
    res.weights(h) = mu;
    res.color += mu * colors.col(h);
    res.expected_point += mu * canonical_points.col(h);
    transmittance *= rho;
  }
  res.opacity = res.weights.sum();
  return res;
}

namespace {

RaySamples finalize(const Ray& ray, Eigen::VectorXd depths) {
  RaySamples s;
  const Eigen::Index n = depths.size();
  s.depths = std::move(depths);
  s.intervals.resize(n);
  for (Eigen::Index i = 0; i + 1 < n; ++i) s.intervals(i) = s.depths(i + 1) - s.depths(i);
  s.intervals(n - 1) = ray.far - s.depths(n - 1);
  if (s.intervals(n - 1) <= 0.0) s.intervals(n - 1) = 1e-12;
  s.points.resize(3, n);
  for (Eigen::Index i = 0; i < n; ++i)
    s.points.col(i) = ray.origin + s.depths(i) * ray.direction;
  return s;
}

}  // namespace

RaySamples sample_uniform(const Ray& ray, int count, RngStream* jitter) {
  if (count < 1) throw std::invalid_argument("sample_uniform: count must be >= 1");
  const double span = (ray.far - ray.near) / count;
  Eigen::VectorXd depths(count);
  for (int i = 0; i < count; ++i) {
    const double u = jitter ? jitter->uniform() : 0.5;
    depths(i) = ray.near + (i + u) * span;
  }
  return finalize(ray, std::move(depths));
}

RaySamples sample_importance(const Ray& ray, const RaySamples& coarse,
                             const Eigen::VectorXd& weights, int count, RngStream* jitter) {
  if (weights.size() != coarse.depths.size())
    throw std::invalid_argument("sample_importance: weight/depth count mismatch");
  if ((weights.array() < 0.0).any())
    throw std::invalid_argument("sample_importance: negative weights");

  const double total = weights.sum();
  if (total <= 0.0) {
    // Documented fallback: nothing to focus on yet.
    RaySamples uni = sample_uniform(ray, count, jitter);
    Eigen::VectorXd merged(coarse.depths.size() + count);
    merged << coarse.depths, uni.depths;
    std::sort(merged.data(), merged.data() + merged.size());
    return finalize(ray, std::move(merged));
  }

  // Bin h spans the midpoint edges around depths(h), closed by near/far, so
  // the piecewise-constant distribution covers the whole ray.
  const Eigen::Index bins = weights.size();
  Eigen::VectorXd edges(bins + 1);
  edges(0) = ray.near;
  for (Eigen::Index i = 1; i < bins; ++i)
    edges(i) = 0.5 * (coarse.depths(i - 1) + coarse.depths(i));
  edges(bins) = ray.far;

  Eigen::VectorXd cdf(bins + 1);
  cdf(0) = 0.0;
  for (Eigen::Index i = 0; i < bins; ++i) cdf(i + 1) = cdf(i) + weights(i) / total;
  cdf(bins) = 1.0;

  Eigen::VectorXd fresh(count);
  for (int i = 0; i < count; ++i) {
    const double u = jitter ? (i + jitter->uniform()) / count : (i + 0.5) / count;
    auto it = std::upper_bound(cdf.data(), cdf.data() + bins + 1, u);
    Eigen::Index h = std::min<Eigen::Index>(std::max<Eigen::Index>(it - cdf.data() - 1, 0), bins - 1);
    const double denom = cdf(h + 1) - cdf(h);
    const double frac = denom > 0.0 ? (u - cdf(h)) / denom : 0.5;
    fresh(i) = edges(h) + frac * (edges(h + 1) - edges(h));
  }

  Eigen::VectorXd merged(coarse.depths.size() + count);
  merged << coarse.depths, fresh;
  std::sort(merged.data(), merged.data() + merged.size());
  merged = merged.cwiseMax(ray.near).cwiseMin(ray.far);
  return finalize(ray, std::move(merged));
}

}  // namespace nrr
