// Copyright Contributors to the fgs Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <Eigen/Core>

#include <cstdint>

namespace fgs {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <typename T>
using Vec3 = Eigen::Matrix<T, 3, 1>;

inline constexpr int kScaleDims    = 3;
inline constexpr int kRotationDims = 4;
inline constexpr int kShBasis      = 16;
inline constexpr int kShCoeffs     = 48; // 16 basis functions x 3 channels
inline constexpr int kDecoderOut   = kShCoeffs + 1;

enum class Scheme : std::uint8_t { CP = 0, VM = 1 };

// How a VM block turns its plane/line factors into Gaussians.
//  PerTermProduct: three independent N^3 sets (xy x z, yz x x, xz x y), each
//                  with its own plane-by-line feature product.
//  SharedGridSum:  one N^3 set on the axis-coordinate grid whose feature is the
//                  sum of the three plane-by-line products.
enum class VmMode : std::uint8_t { PerTermProduct = 0, SharedGridSum = 1 };

inline int vm_term_count(VmMode mode) { return mode == VmMode::PerTermProduct ? 3 : 1; }

/// Flat (i, j, k) index with k fastest.
inline std::int64_t grid_index(int n, int i, int j, int k) {
    return (static_cast<std::int64_t>(i) * n + j) * n + k;
}

} // namespace fgs
