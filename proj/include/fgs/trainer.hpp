// Copyright Contributors to the fgs Project
// SPDX-License-Identifier: Apache-2.0
//
// Training loop: expand -> decode -> mask -> render -> loss -> backward ->
// Adam, one view per step.
#pragma once

#include "fgs/config.hpp"
#include "fgs/model.hpp"
#include "fgs/ply.hpp"
#include "fgs/renderer.hpp"
#include "fgs/scene.hpp"

#include <filesystem>
#include <functional>
#include <limits>
#include <span>
#include <vector>

namespace fgs {

struct MetricsRow {
    std::int64_t step   = 0;
    double loss         = 0;
    double l1           = 0;
    double dssim        = 0; // 1 - SSIM
    double mask_loss    = 0; // unweighted sum of sigmoid(M)
    double train_psnr   = 0; // on the view of this step
    double test_psnr    = std::numeric_limits<double>::quiet_NaN(); // NaN when not evaluated
    std::int64_t active_gaussians = 0;
    double wall_seconds = 0;
    double coordinate_grad_norm = 0;
};

struct TrainHooks {
    std::filesystem::path metrics_csv; // empty: no CSV
    std::filesystem::path checkpoint;  // receives the last good model on a numerical failure
    std::function<void(const MetricsRow &, const Model &)> on_log;
};

struct TrainResult {
    Model model;
    std::vector<MetricsRow> log;
};

RenderSettings render_settings_for(const TrainConfig &config);

/// Seeds blocks from `points` (histogram heuristic) or uniformly inside
/// [lower, upper] (random mode, needs block_budget > 0) and attaches a
/// freshly initialized decoder. Throws DataError when no block is seeded.
Model initialize_model(const TrainConfig &config, const PointCloud *points, const Eigen::Vector3d &lower,
                       const Eigen::Vector3d &upper);

/// Runs config.total_steps optimization steps. Coordinate arrays stop
/// updating at config.freeze_step(). Masks are added when enabled and
/// absent, and packed on return. With zero steps the model is returned
/// unchanged. A non-finite loss or gradient throws NumericalError after the
/// last good model has been written to hooks.checkpoint.
TrainResult train(Model model, std::span<const View> train_views, std::span<const View> test_views,
                  const TrainConfig &config, const TrainHooks &hooks = {});

struct EvalResult {
    double psnr      = 0;
    double ssim      = 0;
    double render_ms = 0; // mean per view, rendering only
    std::int64_t model_bytes    = 0;
    std::int64_t gaussian_count = 0; // after masking and pruning
};

/// Throws ShapeError when an image does not match its camera resolution.
EvalResult evaluate(const Model &model, std::span<const View> views, const RenderSettings &settings);

} // namespace fgs
