// Copyright Contributors to the fgs Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "fgs/types.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace fgs {

enum class InitMode : std::uint8_t { Histogram, Random };

struct TrainConfig {
    std::int64_t total_steps            = 30000;
    std::int64_t coordinate_freeze_step = -1; // -1: two thirds of total_steps
    double lr_factors                   = 0.02;
    double lr_decoder                   = 0.001;
    double lr_mask                      = 0.001;
    bool lr_decay                       = false; // exponential decay to lr * lr_decay_final
    double lr_decay_final               = 0.01;
    double lambda_dssim                 = 0.2;
    double lambda_mask                  = 1e-5;
    int resolution                      = 5;
    int feature_dim                     = 16;
    Scheme scheme                       = Scheme::CP;
    VmMode vm_mode                      = VmMode::PerTermProduct;
    int decoder_hidden                  = 128;
    std::uint64_t seed                  = 0;
    bool masks                          = true;
    double mask_init                    = 0.1;
    double mask_threshold               = 0.01;
    InitMode init                       = InitMode::Histogram;
    double init_interval                = 0.026;
    double init_lambda                  = 5.0;
    int block_budget                    = 0; // 0: every bin above the threshold
    std::int64_t log_interval           = 100;
    std::int64_t eval_interval          = 1000;
    double background                   = 0.0;

    std::int64_t freeze_step() const {
        return coordinate_freeze_step >= 0 ? coordinate_freeze_step : total_steps * 2 / 3;
    }

    /// Throws ShapeError when a field is out of range.
    void validate() const;

    /// Sets one field from its textual value; throws ShapeError for unknown
    /// keys or unparsable values.
    void set(std::string_view key, std::string_view value);

    /// key = value lines in a fixed order; parse_config(to_text()) round-trips.
    std::string to_text() const;
};

/// Parses "key = value" lines; '#' starts a comment, blank lines are skipped.
TrainConfig parse_config(std::string_view text, TrainConfig base = {});
TrainConfig load_config(const std::filesystem::path &path, TrainConfig base = {});

} // namespace fgs
