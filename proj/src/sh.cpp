// Copyright Contributors to the fgs Project
// SPDX-License-Identifier: Apache-2.0
//
#include "fgs/sh.hpp"

#include "fgs/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iostream>

namespace fgs {

using namespace sh_constants;

template <typename T>
std::array<T, kShBasis> sh_basis(const Vec3<T> &d) {
    const T x = d.x(), y = d.y(), z = d.z();
    const T xx = x * x, yy = y * y, zz = z * z;
    const T xy = x * y, yz = y * z, xz = x * z;
    return {T(C0),
            T(-C1) * y,
            T(C1) * z,
            T(-C1) * x,
            T(C2[0]) * xy,
            T(C2[1]) * yz,
            T(C2[2]) * (T(2) * zz - xx - yy),
            T(C2[3]) * xz,
            T(C2[4]) * (xx - yy),
            T(C3[0]) * y * (T(3) * xx - yy),
            T(C3[1]) * xy * z,
            T(C3[2]) * y * (T(4) * zz - xx - yy),
            T(C3[3]) * z * (T(2) * zz - T(3) * xx - T(3) * yy),
            T(C3[4]) * x * (T(4) * zz - xx - yy),
            T(C3[5]) * z * (xx - yy),
            T(C3[6]) * x * (xx - T(3) * yy)};
}

template <typename T>
std::array<Vec3<T>, kShBasis> sh_basis_gradient(const Vec3<T> &d) {
    const T x = d.x(), y = d.y(), z = d.z();
    const T xx = x * x, yy = y * y, zz = z * z;
    std::array<Vec3<T>, kShBasis> g;
    g[0]  = Vec3<T>::Zero();
    g[1]  = Vec3<T>(0, T(-C1), 0);
    g[2]  = Vec3<T>(0, 0, T(C1));
    g[3]  = Vec3<T>(T(-C1), 0, 0);
    g[4]  = T(C2[0]) * Vec3<T>(y, x, 0);
    g[5]  = T(C2[1]) * Vec3<T>(0, z, y);
    g[6]  = T(C2[2]) * Vec3<T>(-2 * x, -2 * y, 4 * z);
    g[7]  = T(C2[3]) * Vec3<T>(z, 0, x);
    g[8]  = T(C2[4]) * Vec3<T>(2 * x, -2 * y, 0);
    g[9]  = T(C3[0]) * Vec3<T>(6 * x * y, 3 * xx - 3 * yy, 0);
    g[10] = T(C3[1]) * Vec3<T>(y * z, x * z, x * y);
    g[11] = T(C3[2]) * Vec3<T>(-2 * x * y, 4 * zz - xx - 3 * yy, 8 * y * z);
    g[12] = T(C3[3]) * Vec3<T>(-6 * x * z, -6 * y * z, 6 * zz - 3 * xx - 3 * yy);
    g[13] = T(C3[4]) * Vec3<T>(4 * zz - 3 * xx - yy, -2 * x * y, 8 * x * z);
    g[14] = T(C3[5]) * Vec3<T>(2 * x * z, -2 * y * z, xx - yy);
    g[15] = T(C3[6]) * Vec3<T>(3 * xx - 3 * yy, -6 * x * y, 0);
    return g;
}

template <typename T>
Vec3<T> eval_sh_color_raw(std::span<const T> sh, const Vec3<T> &dir) {
    if (sh.size() != kShCoeffs) {
        throw ShapeError("expected 48 SH coefficients");
    }
    const auto basis = sh_basis(dir);
    Vec3<T> rgb(T(0.5), T(0.5), T(0.5));
    for (int k = 0; k < kShBasis; ++k) {
        for (int c = 0; c < 3; ++c) {
            rgb[c] += basis[k] * sh[k * 3 + c];
        }
    }
    for (int c = 0; c < 3; ++c) {
        rgb[c] = std::clamp(rgb[c], T(0), T(1));
    }
    return rgb;
}

template <typename T>
Vec3<T> eval_sh_color(std::span<const T> sh, const Vec3<T> &view_dir) {
    const T norm = view_dir.norm();
    const T dev  = std::abs(norm - T(1));
    if (dev <= T(1e-6)) {
        return eval_sh_color_raw(sh, view_dir);
    }
    if (!(dev <= T(1e-3))) {
        throw ShapeError("view direction is not unit length (norm " + std::to_string(norm) + ")");
    }
    static std::atomic<bool> warned{false};
    if (!warned.exchange(true)) {
        std::cerr << "fgs: warning: renormalizing a view direction with norm " << norm << "\n";
    }
    return eval_sh_color_raw(sh, Vec3<T>(view_dir / norm));
}

template <typename T>
ShColorGrads<T> eval_sh_color_backward(std::span<const T> sh, const Vec3<T> &dir,
                                       const Vec3<T> &grad_rgb) {
    if (sh.size() != kShCoeffs) {
        throw ShapeError("expected 48 SH coefficients");
    }
    const auto basis = sh_basis(dir);
    Vec3<T> raw(T(0.5), T(0.5), T(0.5));
    for (int k = 0; k < kShBasis; ++k) {
        for (int c = 0; c < 3; ++c) {
            raw[c] += basis[k] * sh[k * 3 + c];
        }
    }
    Vec3<T> g = grad_rgb;
    for (int c = 0; c < 3; ++c) {
        if (!(raw[c] > T(0) && raw[c] < T(1))) {
            g[c] = T(0);
        }
    }
    ShColorGrads<T> out;
    const auto dbasis = sh_basis_gradient(dir);
    for (int k = 0; k < kShBasis; ++k) {
        T weight = T(0);
        for (int c = 0; c < 3; ++c) {
            out.sh[k * 3 + c] = basis[k] * g[c];
            weight += sh[k * 3 + c] * g[c];
        }
        out.dir += dbasis[k] * weight;
    }
    return out;
}

#define FGS_INSTANTIATE(T)                                                                         \
    template std::array<T, kShBasis> sh_basis<T>(const Vec3<T> &);                                 \
    template std::array<Vec3<T>, kShBasis> sh_basis_gradient<T>(const Vec3<T> &);                  \
    template Vec3<T> eval_sh_color<T>(std::span<const T>, const Vec3<T> &);                        \
    template Vec3<T> eval_sh_color_raw<T>(std::span<const T>, const Vec3<T> &);                    \
    template ShColorGrads<T> eval_sh_color_backward<T>(std::span<const T>, const Vec3<T> &,        \
                                                       const Vec3<T> &);

FGS_INSTANTIATE(float)
FGS_INSTANTIATE(double)
#undef FGS_INSTANTIATE

} // namespace fgs
