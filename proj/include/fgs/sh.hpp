// Copyright Contributors to the fgs Project
// SPDX-License-Identifier: Apache-2.0
//
// Degree-3 real spherical harmonics for view-dependent color.
//
// Coefficients are stored as 16 basis functions x 3 channels, index
// [basis * 3 + channel]. Color is clamp(0.5 + sum_k c_k Y_k(dir), 0, 1).
#pragma once

#include "fgs/types.hpp"

#include <array>
#include <span>

namespace fgs {

namespace sh_constants {
inline constexpr double C0   = 0.28209479177387814;
inline constexpr double C1   = 0.4886025119029199;
inline constexpr double C2[] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                                -1.0925484305920792, 0.5462742152960396};
inline constexpr double C3[] = {-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
                                0.3731763325901154,  -0.4570457994644658, 1.445305721320277,
                                -0.5900435899266435};
} // namespace sh_constants

/// The 16 basis polynomials evaluated at (x, y, z). No normalization check.
template <typename T>
std::array<T, kShBasis> sh_basis(const Vec3<T> &dir);

/// d Y_k / d(x, y, z) for each basis function, treating x, y, z as free.
template <typename T>
std::array<Vec3<T>, kShBasis> sh_basis_gradient(const Vec3<T> &dir);

/// Color at a unit direction. Directions off the unit sphere by at most 1e-3
/// are renormalized (with a one-time warning); larger deviations throw.
template <typename T>
Vec3<T> eval_sh_color(std::span<const T> sh, const Vec3<T> &view_dir);

/// Color without the direction check, for callers that already normalized.
template <typename T>
Vec3<T> eval_sh_color_raw(std::span<const T> sh, const Vec3<T> &dir);

template <typename T>
struct ShColorGrads {
    std::array<T, kShCoeffs> sh{};
    Vec3<T> dir = Vec3<T>::Zero(); // w.r.t. the raw direction components
};

/// Gradients of eval_sh_color_raw. Clamped channels pass no gradient.
template <typename T>
ShColorGrads<T> eval_sh_color_backward(std::span<const T> sh, const Vec3<T> &dir,
                                       const Vec3<T> &grad_rgb);

} // namespace fgs
