// Copyright Contributors to the fgs Project
// SPDX-License-Identifier: Apache-2.0
//
// Block seeding from a point cloud: the cloud's bounding box is widened about
// its center, cut into bins of roughly `interval` world units, and every bin
// holding more than `lambda` points receives ceil(count / N^3) blocks whose
// coordinates are spread evenly over the bin.
#pragma once

#include "fgs/factor_model.hpp"

#include <Eigen/Core>

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

namespace fgs {

struct BinIndex {
    int x = 0, y = 0, z = 0;
    auto operator<=>(const BinIndex &) const = default;
};

struct HistogramGrid {
    Eigen::Vector3d lower = Eigen::Vector3d::Zero(); // widened bounds
    Eigen::Vector3d upper = Eigen::Vector3d::Zero();
    Eigen::Vector3i bins  = Eigen::Vector3i::Ones();
    Eigen::Vector3d bin_size = Eigen::Vector3d::Ones();
    double interval       = 0.0;
    std::map<BinIndex, std::int64_t> counts;
    std::map<BinIndex, Eigen::Vector3d> color_sums; // only when colors were given

    std::int64_t total() const;
    BinIndex locate(const Eigen::Vector3d &p) const;
    Eigen::Vector3d bin_lower(const BinIndex &b) const;
};

inline constexpr double kDefaultInterval     = 0.026;
inline constexpr double kDefaultExpandFactor = 1.2;
inline constexpr double kDefaultLambda       = 5.0;

/// Throws DataError on an empty cloud or non-finite coordinates, ShapeError
/// on a non-positive interval.
HistogramGrid build_histogram(const RowMatrix<double> &points, double interval = kDefaultInterval,
                              double expand_factor = kDefaultExpandFactor,
                              const RowMatrix<double> *colors = nullptr);

struct SeedOptions {
    double lambda      = kDefaultLambda;
    int resolution     = 5;
    int feature_dim    = 16;
    std::uint64_t seed = 0;
};

/// Number of blocks seed_blocks would allocate for a bin holding `count` points.
std::int64_t blocks_for_bin(std::int64_t count, double lambda, int resolution);

template <typename T>
std::vector<FactorSetCP<T>> seed_blocks(const HistogramGrid &hist, const SeedOptions &options);

/// Seeds exactly `block_count` blocks (or all that exist if the cloud cannot
/// support that many): the interval is grown from fine to coarse until the
/// histogram yields enough blocks, then the densest bins are kept.
template <typename T>
std::vector<FactorSetCP<T>> seed_blocks_for_budget(const RowMatrix<double> &points, int block_count,
                                                   const SeedOptions &options);

/// Blocks with coordinates uniformly drawn inside the cloud's widened bounds.
template <typename T>
std::vector<FactorSetCP<T>> random_blocks(const Eigen::Vector3d &lower, const Eigen::Vector3d &upper,
                                          int block_count, const SeedOptions &options);

} // namespace fgs
