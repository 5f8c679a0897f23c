// Copyright Contributors to the fgs Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "fgs/types.hpp"

#include <filesystem>
#include <optional>

namespace fgs {

struct PointCloud {
    RowMatrix<double> positions;             // K x 3
    std::optional<RowMatrix<double>> colors; // K x 3 in [0, 1], when present
};

/// Reads the vertex element of an ASCII or binary (little/big endian) PLY
/// file. x/y/z are required; red/green/blue are picked up when present.
/// Throws DataError on malformed input.
PointCloud read_ply(const std::filesystem::path &path);

/// Writes binary little-endian PLY with float positions and, when present,
/// uchar colors.
void write_ply(const std::filesystem::path &path, const PointCloud &cloud);

} // namespace fgs
