// Copyright Contributors to the nrr Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include "nrr/rng.h"

namespace nrr {

struct Ray {
  Eigen::Vector3d origin;
  Eigen::Vector3d direction;  // unit
  double near = 0.0;
  double far = 0.0;
};

struct RaySamples {
  Eigen::VectorXd depths;     // ascending, within [near, far]
  Eigen::VectorXd intervals;  // > 0, last one reaches `far`
  Eigen::Matrix3Xd points;    // origin + depth * direction
};

struct CompositeResult {
  Eigen::Vector3d color;
  double opacity = 0.0;
  Eigen::VectorXd weights;
  Eigen::Vector3d expected_point;
};

// (x, sin(2^k x), cos(2^k x)) per input coordinate, raw coordinates first.
// Output length dim*(2*bands+1).
Eigen::VectorXd positional_encode(const Eigen::VectorXd& x, int bands);

// Laplace-CDF density: sigma = Phi_alpha(-d) / alpha. Strictly decreasing in d.
double sdf_to_density(double signed_distance, double alpha);

// Discrete compositing over one ray: per-segment transmittance
// rho_h = exp(-sigma_h * delta_h), visibility mu_h = prod_{g<h} rho_g (1 - rho_h).
CompositeResult composite(const Eigen::VectorXd& densities, const Eigen::Matrix3Xd& colors,
                          const Eigen::VectorXd& intervals, const Eigen::Matrix3Xd& canonical_points);

// Stratified depths over [near, far]; `jitter` draws one uniform per bin,
// nullptr takes bin centers.
RaySamples sample_uniform(const Ray& ray, int count, RngStream* jitter = nullptr);

// Inverse-CDF resampling over the piecewise-constant weight distribution of
// `coarse`; the new depths are merged with the coarse ones and re-sorted.
// All-zero weights fall back to uniform sampling.
RaySamples sample_importance(const Ray& ray, const RaySamples& coarse,
                             const Eigen::VectorXd& weights, int count,
                             RngStream* jitter = nullptr);

}  // namespace nrr
