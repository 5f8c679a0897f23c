// Copyright Contributors to the fgs Project
// SPDX-License-Identifier: Apache-2.0
//
// Procedural ground truth: random dense Gaussian scenes rendered from
// cameras on a sphere around the origin.
#pragma once

#include "fgs/renderer.hpp"
#include "fgs/scene.hpp"

#include <cstdint>
#include <vector>

namespace fgs {

struct SyntheticOptions {
    int gaussians      = 200;
    int train_views    = 20;
    int test_views     = 5;
    int width          = 64;
    int height         = 64;
    double extent      = 1.0;  // means uniform in [-extent, extent]^3
    double min_scale   = 0.08;
    double max_scale   = 0.25;
    double camera_distance = 4.0;
    double fov_x       = 0.9;
    int samples_per_gaussian = 12; // points drawn per Gaussian for points.ply
    std::uint64_t seed = 0;
};

/// Decoded Gaussians with random means, log-uniform scales, uniform random
/// rotations, random base colors, mild view dependence and opacity in
/// [0.5, 0.95].
ExpandedGaussians<float> random_dense_gaussians(const SyntheticOptions &options);

/// `count` cameras looking at the origin, spread over a sphere by a
/// golden-angle spiral with a random phase.
std::vector<Camera> orbit_cameras(int count, const SyntheticOptions &options, std::uint64_t seed);

/// Renders the Gaussians into train and test views and samples a colored
/// point cloud from them.
Scene make_synthetic_scene(const ExpandedGaussians<float> &gaussians, const SyntheticOptions &options,
                           const RenderSettings &settings = {});

/// Dense parameter count of `count` explicit Gaussians: position (3),
/// scale (3), rotation (4), SH (48) and opacity (1).
inline std::int64_t dense_parameter_count(std::int64_t count) { return count * 59; }

} // namespace fgs
