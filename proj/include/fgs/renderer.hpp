// Copyright Contributors to the fgs Project
// SPDX-License-Identifier: Apache-2.0
//
// Tile-based splatting of anisotropic 3D Gaussians with an analytic
// backward pass.
//
// Forward: build each covariance from scale and rotation, project with the
// local affine (EWA) approximation, sort by camera depth and alpha-composite
// front to back per pixel. Pixels visit only the splats binned to their
// tile, and a splat is binned to every tile its support box touches, so the
// tiled result is identical to a per-pixel scan over all splats.
#pragma once

#include "fgs/camera.hpp"
#include "fgs/factor_model.hpp"
#include "fgs/image.hpp"
#include "fgs/types.hpp"

#include <array>
#include <optional>
#include <span>
#include <vector>

namespace fgs {

struct RenderSettings {
    double alpha_min         = 1.0 / 255.0; // splats below this alpha are skipped at a pixel
    double transmittance_min = 1e-4;        // compositing stops before T drops below this
    double support_sigma     = 3.0;         // kernel truncation radius; 0 means unbounded
    double dilation          = 0.3;         // added to the 2D covariance diagonal (pixels^2)
    double scale_floor       = 1e-6;        // scales are max(|s|, floor) before use
    int tile_size            = 16;
    Eigen::Vector3d background = Eigen::Vector3d::Zero();

    /// All cutoffs disabled; the image is then a smooth function of every input.
    static RenderSettings exact() {
        RenderSettings s;
        s.alpha_min         = 0.0;
        s.transmittance_min = 0.0;
        s.support_sigma     = 0.0;
        return s;
    }
};

template <typename T>
using Vec2 = Eigen::Matrix<T, 2, 1>;
template <typename T>
using Vec4 = Eigen::Matrix<T, 4, 1>;
template <typename T>
using Mat3 = Eigen::Matrix<T, 3, 3>;

/// A projected, shaded Gaussian ready for compositing.
template <typename T>
struct Splat {
    Vec2<T> mean = Vec2<T>::Zero();  // pixel coordinates
    std::array<T, 3> cov{};          // 2D covariance (xx, xy, yy), dilated
    std::array<T, 3> conic{};        // its inverse (xx, xy, yy)
    T depth = T(0);
    Vec3<T> color = Vec3<T>::Zero();
    T opacity = T(0);
    std::int64_t source = -1;        // index into the expanded Gaussians
};

template <typename T>
Mat3<T> quaternion_to_matrix(const Vec4<T> &unit_quat);

/// R diag(s)^2 R^T for a unit quaternion (w, x, y, z).
template <typename T>
Mat3<T> build_covariance(const Vec3<T> &scale, const Vec4<T> &unit_quat);

template <typename T>
struct CovarianceGrads {
    Vec3<T> scale = Vec3<T>::Zero();
    Vec4<T> quat  = Vec4<T>::Zero();
};

/// `grad_cov` holds dL/dSigma_ab for all nine entries.
template <typename T>
CovarianceGrads<T> build_covariance_backward(const Vec3<T> &scale, const Vec4<T> &unit_quat,
                                             const Mat3<T> &grad_cov);

template <typename T>
struct Projection {
    Vec2<T> mean = Vec2<T>::Zero();
    std::array<T, 3> cov{};
    std::array<T, 3> conic{};
    T depth = T(0);
};

/// Returns nullopt for points at or behind the near plane.
template <typename T>
std::optional<Projection<T>> project(const Vec3<T> &position, const Mat3<T> &cov, const Camera &camera,
                                     const RenderSettings &settings);

template <typename T>
struct ProjectionGrads {
    Vec3<T> position = Vec3<T>::Zero();
    Mat3<T> cov      = Mat3<T>::Zero();
};

template <typename T>
ProjectionGrads<T> project_backward(const Vec3<T> &position, const Mat3<T> &cov, const Camera &camera,
                                    const RenderSettings &settings, const Vec2<T> &grad_mean,
                                    const std::array<T, 3> &grad_conic);

/// Stable ascending order of depths. Throws NumericalError on NaN.
template <typename T>
std::vector<std::int32_t> sort_by_depth(std::span<const T> depths);

/// Per-pixel bookkeeping kept by the forward pass for the backward pass.
template <typename T>
struct RasterState {
    int width = 0, height = 0;
    int tile_size = 16, tiles_x = 0, tiles_y = 0;
    std::vector<std::int64_t> tile_offsets; // tiles_x * tiles_y + 1
    std::vector<std::int32_t> tile_entries; // splat indices, front to back within a tile
    std::vector<T> final_transmittance;     // per pixel
    std::vector<std::int32_t> stop_index;   // per pixel, entries of the tile list examined
};

template <typename T>
struct RasterOutput {
    Image<T> image;
    RasterState<T> state;
    double sort_ms  = 0.0;
    double blend_ms = 0.0;
};

/// Composites splats in depth order; the input order does not matter.
template <typename T>
RasterOutput<T> rasterize(std::span<const Splat<T>> splats, int width, int height,
                          const RenderSettings &settings);

template <typename T>
struct SplatGrads {
    RowMatrix<T> mean;  // S x 2
    RowMatrix<T> conic; // S x 3
    RowMatrix<T> color; // S x 3
    Vector<T> opacity;  // S
};

template <typename T>
SplatGrads<T> rasterize_backward(std::span<const Splat<T>> splats, const RenderSettings &settings,
                                 const RasterState<T> &state, const Image<T> &grad_image);

struct RenderStats {
    double project_ms = 0.0; // covariance, projection and SH shading
    double sort_ms    = 0.0;
    double blend_ms   = 0.0;
    std::int64_t visible = 0;

    double total_ms() const { return project_ms + sort_ms + blend_ms; }
};

template <typename T>
struct RenderResult {
    Image<T> image;
    std::vector<Splat<T>> splats;
    RasterState<T> state;
    RenderStats stats;
};

/// Renders decoded Gaussians. Colors come from degree-3 SH evaluated along
/// the unit direction from the camera center to each mean.
template <typename T>
RenderResult<T> render(const ExpandedGaussians<T> &gaussians, const Camera &camera,
                       const RenderSettings &settings);

template <typename T>
struct GaussianGrads {
    RowMatrix<T> positions; // M x 3
    RowMatrix<T> scales;    // M x 3, w.r.t. the raw (unsanitized) scales
    RowMatrix<T> rotations; // M x 4, w.r.t. the unit quaternions
    RowMatrix<T> sh;        // M x 48
    Vector<T> opacity;      // M
};

template <typename T>
GaussianGrads<T> render_backward(const ExpandedGaussians<T> &gaussians, const Camera &camera,
                                 const RenderSettings &settings, const RenderResult<T> &forward,
                                 const Image<T> &grad_image);

} // namespace fgs
