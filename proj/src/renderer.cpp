// Copyright Contributors to the fgs Project
// SPDX-License-Identifier: Apache-2.0
//
#include "fgs/renderer.hpp"

#include "fgs/errors.hpp"
#include "fgs/sh.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace fgs {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
    return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

void check_settings(const RenderSettings &s) {
    if (s.tile_size < 1) {
        throw ShapeError("tile size must be >= 1");
    }
    if (!(s.alpha_min >= 0.0) || !(s.transmittance_min >= 0.0) || !(s.support_sigma >= 0.0) ||
        !(s.dilation >= 0.0) || !(s.scale_floor > 0.0) || !s.background.allFinite()) {
        throw ShapeError("render settings out of range");
    }
}

struct PixelRange {
    int x0, x1, y0, y1; // inclusive
    bool empty() const { return x0 > x1 || y0 > y1; }
};

// Pixels whose centers fall inside the support box of the splat.
template <typename T>
PixelRange pixel_range(const Splat<T> &s, int width, int height, double support) {
    if (support <= 0.0) {
        return {0, width - 1, 0, height - 1};
    }
    const double rx = support * std::sqrt(static_cast<double>(s.cov[0]));
    const double ry = support * std::sqrt(static_cast<double>(s.cov[2]));
    const double mx = static_cast<double>(s.mean.x());
    const double my = static_cast<double>(s.mean.y());
    PixelRange r;
    r.x0 = static_cast<int>(std::max(0.0, std::ceil(mx - rx - 0.5)));
    r.x1 = static_cast<int>(std::min(width - 1.0, std::floor(mx + rx - 0.5)));
    r.y0 = static_cast<int>(std::max(0.0, std::ceil(my - ry - 0.5)));
    r.y1 = static_cast<int>(std::min(height - 1.0, std::floor(my + ry - 0.5)));
    if (!(mx - rx - 0.5 < width) || !(my - ry - 0.5 < height) || !(mx + rx - 0.5 >= 0.0) ||
        !(my + ry - 0.5 >= 0.0)) {
        r.x0 = 1;
        r.x1 = 0;
    }
    return r;
}

template <typename T>
T sanitize_scale(T s, T floor) {
    return std::max(std::abs(s), floor);
}

template <typename T>
T sanitize_scale_gradient(T s, T floor, T grad) {
    if (!(std::abs(s) > floor)) {
        return T(0);
    }
    return s > T(0) ? grad : -grad;
}

} // namespace

template <typename T>
Mat3<T> quaternion_to_matrix(const Vec4<T> &q) {
    const T w = q[0], x = q[1], y = q[2], z = q[3];
    Mat3<T> r;
    r << T(1) - T(2) * (y * y + z * z), T(2) * (x * y - w * z), T(2) * (x * z + w * y),
        T(2) * (x * y + w * z), T(1) - T(2) * (x * x + z * z), T(2) * (y * z - w * x),
        T(2) * (x * z - w * y), T(2) * (y * z + w * x), T(1) - T(2) * (x * x + y * y);
    return r;
}

template <typename T>
Mat3<T> build_covariance(const Vec3<T> &scale, const Vec4<T> &unit_quat) {
    const Mat3<T> m = quaternion_to_matrix(unit_quat) * scale.asDiagonal();
    return m * m.transpose();
}

template <typename T>
CovarianceGrads<T> build_covariance_backward(const Vec3<T> &scale, const Vec4<T> &q,
                                             const Mat3<T> &grad_cov) {
    const Mat3<T> r  = quaternion_to_matrix(q);
    const Mat3<T> m  = r * scale.asDiagonal();
    const Mat3<T> dm = (grad_cov + grad_cov.transpose()) * m;
    CovarianceGrads<T> out;
    for (int i = 0; i < 3; ++i) {
        out.scale[i] = dm.col(i).dot(r.col(i));
    }
    const Mat3<T> dr = dm * scale.asDiagonal();
    const T w = q[0], x = q[1], y = q[2], z = q[3];
    out.quat[0] = T(2) * z * (dr(1, 0) - dr(0, 1)) + T(2) * y * (dr(0, 2) - dr(2, 0)) +
                  T(2) * x * (dr(2, 1) - dr(1, 2));
    out.quat[1] = T(2) * y * (dr(0, 1) + dr(1, 0)) + T(2) * z * (dr(0, 2) + dr(2, 0)) +
                  T(2) * w * (dr(2, 1) - dr(1, 2)) - T(4) * x * (dr(1, 1) + dr(2, 2));
    out.quat[2] = T(2) * x * (dr(0, 1) + dr(1, 0)) + T(2) * w * (dr(0, 2) - dr(2, 0)) +
                  T(2) * z * (dr(1, 2) + dr(2, 1)) - T(4) * y * (dr(0, 0) + dr(2, 2));
    out.quat[3] = T(2) * w * (dr(1, 0) - dr(0, 1)) + T(2) * x * (dr(0, 2) + dr(2, 0)) +
                  T(2) * y * (dr(1, 2) + dr(2, 1)) - T(4) * z * (dr(0, 0) + dr(1, 1));
    return out;
}

namespace {

template <typename T>
struct ProjectionTerms {
    Vec3<T> t;
    Eigen::Matrix<T, 2, 3> j;
    Eigen::Matrix<T, 2, 3> m; // J * R
    Eigen::Matrix<T, 2, 2> cov2;
};

template <typename T>
ProjectionTerms<T> projection_terms(const Vec3<T> &p, const Mat3<T> &cov, const Camera &cam,
                                    const RenderSettings &s) {
    ProjectionTerms<T> pt;
    const Mat3<T> r = cam.rotation.cast<T>();
    pt.t            = r * p + cam.translation.cast<T>();
    const T fx = static_cast<T>(cam.fx), fy = static_cast<T>(cam.fy);
    const T iz  = T(1) / pt.t.z();
    const T iz2 = iz * iz;
    pt.j << fx * iz, T(0), -fx * pt.t.x() * iz2, T(0), fy * iz, -fy * pt.t.y() * iz2;
    pt.m    = pt.j * r;
    pt.cov2 = pt.m * cov * pt.m.transpose();
    pt.cov2(0, 0) += static_cast<T>(s.dilation);
    pt.cov2(1, 1) += static_cast<T>(s.dilation);
    return pt;
}

} // namespace

template <typename T>
std::optional<Projection<T>> project(const Vec3<T> &p, const Mat3<T> &cov, const Camera &cam,
                                     const RenderSettings &s) {
    const Vec3<T> t = cam.rotation.cast<T>() * p + cam.translation.cast<T>();
    if (!(t.z() > static_cast<T>(cam.near_plane))) {
        return std::nullopt;
    }
    const ProjectionTerms<T> pt = projection_terms(p, cov, cam, s);
    const T a = pt.cov2(0, 0), b = pt.cov2(0, 1), c = pt.cov2(1, 1);
    const T det = a * c - b * b;
    if (!(det > T(0))) {
        return std::nullopt;
    }
    Projection<T> out;
    out.mean  = Vec2<T>(static_cast<T>(cam.fx) * pt.t.x() / pt.t.z() + static_cast<T>(cam.cx),
                        static_cast<T>(cam.fy) * pt.t.y() / pt.t.z() + static_cast<T>(cam.cy));
    out.cov   = {a, b, c};
    out.conic = {c / det, -b / det, a / det};
    out.depth = pt.t.z();
    return out;
}

template <typename T>
ProjectionGrads<T> project_backward(const Vec3<T> &p, const Mat3<T> &cov, const Camera &cam,
                                    const RenderSettings &s, const Vec2<T> &grad_mean,
                                    const std::array<T, 3> &grad_conic) {
    const ProjectionTerms<T> pt = projection_terms(p, cov, cam, s);
    const Eigen::Matrix<T, 2, 2> q = pt.cov2.inverse();
    Eigen::Matrix<T, 2, 2> gq;
    gq << grad_conic[0], grad_conic[1] / T(2), grad_conic[1] / T(2), grad_conic[2];
    const Eigen::Matrix<T, 2, 2> dcov2 = -q * gq * q;
    const Eigen::Matrix<T, 2, 3> dm    = T(2) * dcov2 * pt.m * cov;

    ProjectionGrads<T> out;
    out.cov = pt.m.transpose() * dcov2 * pt.m;

    const Mat3<T> r                 = cam.rotation.cast<T>();
    const Eigen::Matrix<T, 2, 3> dj = dm * r.transpose();
    const T fx = static_cast<T>(cam.fx), fy = static_cast<T>(cam.fy);
    const T tx = pt.t.x(), ty = pt.t.y(), tz = pt.t.z();
    const T iz = T(1) / tz, iz2 = iz * iz, iz3 = iz2 * iz;
    Vec3<T> dt;
    dt.x() = grad_mean.x() * fx * iz - dj(0, 2) * fx * iz2;
    dt.y() = grad_mean.y() * fy * iz - dj(1, 2) * fy * iz2;
    dt.z() = -grad_mean.x() * fx * tx * iz2 - grad_mean.y() * fy * ty * iz2 - dj(0, 0) * fx * iz2 +
             dj(0, 2) * T(2) * fx * tx * iz3 - dj(1, 1) * fy * iz2 + dj(1, 2) * T(2) * fy * ty * iz3;
    out.position = r.transpose() * dt;
    return out;
}

template <typename T>
std::vector<std::int32_t> sort_by_depth(std::span<const T> depths) {
    std::vector<std::int32_t> order(depths.size());
    std::iota(order.begin(), order.end(), 0);
    for (const T d : depths) {
        if (std::isnan(d)) {
            throw NumericalError("NaN depth in splat sort");
        }
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](std::int32_t a, std::int32_t b) { return depths[a] < depths[b]; });
    return order;
}

template <typename T>
RasterOutput<T> rasterize(std::span<const Splat<T>> splats, int width, int height,
                          const RenderSettings &settings) {
    check_settings(settings);
    if (width < 1 || height < 1) {
        throw ShapeError("raster size must be positive");
    }
    RasterOutput<T> out;
    RasterState<T> &st = out.state;
    st.width           = width;
    st.height          = height;
    st.tile_size       = settings.tile_size;
    st.tiles_x         = (width + settings.tile_size - 1) / settings.tile_size;
    st.tiles_y         = (height + settings.tile_size - 1) / settings.tile_size;
    const int tiles    = st.tiles_x * st.tiles_y;
    const int ts       = settings.tile_size;

    auto t0 = Clock::now();
    std::vector<T> depths(splats.size());
    for (size_t i = 0; i < splats.size(); ++i) {
        depths[i] = splats[i].depth;
    }
    const std::vector<std::int32_t> order = sort_by_depth<T>(depths);

    // Bin in sorted order so each tile list is already front to back.
    std::vector<PixelRange> ranges(splats.size());
    std::vector<std::int64_t> counts(tiles + 1, 0);
    for (size_t i = 0; i < splats.size(); ++i) {
        ranges[i] = pixel_range(splats[i], width, height, settings.support_sigma);
        if (ranges[i].empty()) {
            continue;
        }
        for (int ty = ranges[i].y0 / ts; ty <= ranges[i].y1 / ts; ++ty) {
            for (int tx = ranges[i].x0 / ts; tx <= ranges[i].x1 / ts; ++tx) {
                ++counts[ty * st.tiles_x + tx + 1];
            }
        }
    }
    std::partial_sum(counts.begin(), counts.end(), counts.begin());
    st.tile_offsets = counts;
    st.tile_entries.resize(static_cast<size_t>(counts.back()));
    std::vector<std::int64_t> cursor(counts.begin(), counts.end() - 1);
    for (const std::int32_t idx : order) {
        const PixelRange &r = ranges[idx];
        if (r.empty()) {
            continue;
        }
        for (int ty = r.y0 / ts; ty <= r.y1 / ts; ++ty) {
            for (int tx = r.x0 / ts; tx <= r.x1 / ts; ++tx) {
                st.tile_entries[cursor[ty * st.tiles_x + tx]++] = idx;
            }
        }
    }
    out.sort_ms = elapsed_ms(t0);

    t0        = Clock::now();
    out.image = Image<T>(width, height);
    st.final_transmittance.assign(static_cast<size_t>(width) * height, T(1));
    st.stop_index.assign(static_cast<size_t>(width) * height, 0);
    const T alpha_min = static_cast<T>(settings.alpha_min);
    const T t_min     = static_cast<T>(settings.transmittance_min);
    const T support2  = static_cast<T>(settings.support_sigma * settings.support_sigma);
    const bool bounded = settings.support_sigma > 0.0;
    const Vec3<T> bg   = settings.background.cast<T>();

#pragma omp parallel for schedule(dynamic)
    for (int tile = 0; tile < tiles; ++tile) {
        const int tx = tile % st.tiles_x, ty = tile / st.tiles_x;
        const std::int64_t begin = st.tile_offsets[tile], end = st.tile_offsets[tile + 1];
        for (int y = ty * ts; y < std::min(height, (ty + 1) * ts); ++y) {
            for (int x = tx * ts; x < std::min(width, (tx + 1) * ts); ++x) {
                const T px = static_cast<T>(x) + T(0.5), py = static_cast<T>(y) + T(0.5);
                T trans   = T(1);
                Vec3<T> c = Vec3<T>::Zero();
                std::int64_t e = begin;
                for (; e < end; ++e) {
                    const Splat<T> &s = splats[st.tile_entries[e]];
                    const T dx = px - s.mean.x(), dy = py - s.mean.y();
                    const T power = s.conic[0] * dx * dx + T(2) * s.conic[1] * dx * dy + s.conic[2] * dy * dy;
                    if (bounded && power > support2) {
                        continue;
                    }
                    const T alpha = s.opacity * std::exp(T(-0.5) * power);
                    if (alpha < alpha_min) {
                        continue;
                    }
                    const T next = trans * (T(1) - alpha);
                    if (next < t_min) {
                        break;
                    }
                    c += s.color * (alpha * trans);
                    trans = next;
                }
                const size_t pix             = static_cast<size_t>(y) * width + x;
                st.final_transmittance[pix]  = trans;
                st.stop_index[pix]           = static_cast<std::int32_t>(e - begin);
                for (int ch = 0; ch < 3; ++ch) {
                    out.image.data[pix * 3 + ch] = c[ch] + trans * bg[ch];
                }
            }
        }
    }
    out.blend_ms = elapsed_ms(t0);
    return out;
}

template <typename T>
SplatGrads<T> rasterize_backward(std::span<const Splat<T>> splats, const RenderSettings &settings,
                                 const RasterState<T> &st, const Image<T> &grad_image) {
    check_settings(settings);
    if (grad_image.width != st.width || grad_image.height != st.height ||
        grad_image.data.size() != static_cast<size_t>(st.width) * st.height * 3) {
        throw ShapeError("gradient image does not match the rendered image");
    }
    const std::int64_t entries = static_cast<std::int64_t>(st.tile_entries.size());
    // Per tile-entry partials: mean(2), conic(3), color(3), opacity(1).
    constexpr int kStride = 9;
    std::vector<T> partial(static_cast<size_t>(entries) * kStride, T(0));

    const int ts       = st.tile_size;
    const int tiles    = st.tiles_x * st.tiles_y;
    const T alpha_min  = static_cast<T>(settings.alpha_min);
    const T support2   = static_cast<T>(settings.support_sigma * settings.support_sigma);
    const bool bounded = settings.support_sigma > 0.0;
    const Vec3<T> bg   = settings.background.cast<T>();

    struct Contribution {
        std::int64_t entry;
        T alpha, trans, gauss, dx, dy;
    };

#pragma omp parallel
    {
        std::vector<Contribution> list;
#pragma omp for schedule(dynamic)
        for (int tile = 0; tile < tiles; ++tile) {
            const int tx = tile % st.tiles_x, ty = tile / st.tiles_x;
            const std::int64_t begin = st.tile_offsets[tile];
            for (int y = ty * ts; y < std::min(st.height, (ty + 1) * ts); ++y) {
                for (int x = tx * ts; x < std::min(st.width, (tx + 1) * ts); ++x) {
                    const size_t pix = static_cast<size_t>(y) * st.width + x;
                    const Vec3<T> g(grad_image.data[pix * 3], grad_image.data[pix * 3 + 1],
                                    grad_image.data[pix * 3 + 2]);
                    const T px = static_cast<T>(x) + T(0.5), py = static_cast<T>(y) + T(0.5);
                    list.clear();
                    T trans = T(1);
                    for (std::int64_t e = begin; e < begin + st.stop_index[pix]; ++e) {
                        const Splat<T> &s = splats[st.tile_entries[e]];
                        const T dx = px - s.mean.x(), dy = py - s.mean.y();
                        const T power =
                            s.conic[0] * dx * dx + T(2) * s.conic[1] * dx * dy + s.conic[2] * dy * dy;
                        if (bounded && power > support2) {
                            continue;
                        }
                        const T gauss = std::exp(T(-0.5) * power);
                        const T alpha = s.opacity * gauss;
                        if (alpha < alpha_min) {
                            continue;
                        }
                        list.push_back({e, alpha, trans, gauss, dx, dy});
                        trans *= T(1) - alpha;
                    }
                    Vec3<T> suffix = bg * st.final_transmittance[pix];
                    for (auto it = list.rbegin(); it != list.rend(); ++it) {
                        const Splat<T> &s = splats[st.tile_entries[it->entry]];
                        T *out            = &partial[static_cast<size_t>(it->entry) * kStride];
                        const T w         = it->alpha * it->trans;
                        out[5] += w * g[0];
                        out[6] += w * g[1];
                        out[7] += w * g[2];
                        const T dalpha = it->trans * s.color.dot(g) - suffix.dot(g) / (T(1) - it->alpha);
                        suffix += s.color * w;
                        out[8] += it->gauss * dalpha;
                        const T dpower = -T(0.5) * it->alpha * dalpha;
                        const T dx = it->dx, dy = it->dy;
                        out[2] += dpower * dx * dx;
                        out[3] += dpower * T(2) * dx * dy;
                        out[4] += dpower * dy * dy;
                        out[0] -= dpower * T(2) * (s.conic[0] * dx + s.conic[1] * dy);
                        out[1] -= dpower * T(2) * (s.conic[1] * dx + s.conic[2] * dy);
                    }
                }
            }
        }
    }

    SplatGrads<T> grads;
    const Eigen::Index n = static_cast<Eigen::Index>(splats.size());
    grads.mean           = RowMatrix<T>::Zero(n, 2);
    grads.conic          = RowMatrix<T>::Zero(n, 3);
    grads.color          = RowMatrix<T>::Zero(n, 3);
    grads.opacity        = Vector<T>::Zero(n);
    for (std::int64_t e = 0; e < entries; ++e) {
        const std::int32_t idx = st.tile_entries[e];
        const T *p             = &partial[static_cast<size_t>(e) * kStride];
        grads.mean(idx, 0) += p[0];
        grads.mean(idx, 1) += p[1];
        for (int c = 0; c < 3; ++c) {
            grads.conic(idx, c) += p[2 + c];
            grads.color(idx, c) += p[5 + c];
        }
        grads.opacity[idx] += p[8];
    }
    return grads;
}

template <typename T>
RenderResult<T> render(const ExpandedGaussians<T> &g, const Camera &camera, const RenderSettings &settings) {
    check_settings(settings);
    camera.validate();
    if (!g.decoded()) {
        throw ShapeError("render needs decoded Gaussians (SH and opacity)");
    }
    RenderResult<T> res;
    auto t0             = Clock::now();
    const std::int64_t m = g.size();
    const Vec3<T> center = camera.center().cast<T>();
    const T floor        = static_cast<T>(settings.scale_floor);
    std::vector<Splat<T>> candidates(static_cast<size_t>(m));
    std::vector<char> keep(static_cast<size_t>(m), 0);

#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < m; ++i) {
        const Vec3<T> p = g.positions.row(i).transpose();
        const Vec3<T> scale(sanitize_scale(g.scales(i, 0), floor), sanitize_scale(g.scales(i, 1), floor),
                            sanitize_scale(g.scales(i, 2), floor));
        const Vec4<T> q   = g.rotations.row(i).transpose();
        const auto proj   = project(p, build_covariance(scale, q), camera, settings);
        if (!proj) {
            continue;
        }
        Splat<T> &s = candidates[i];
        s.mean      = proj->mean;
        s.cov       = proj->cov;
        s.conic     = proj->conic;
        s.depth     = proj->depth;
        if (pixel_range(s, camera.width, camera.height, settings.support_sigma).empty()) {
            continue;
        }
        const Vec3<T> dir = p - center;
        s.color   = eval_sh_color_raw<T>(std::span<const T>(g.sh.row(i).data(), kShCoeffs),
                                         Vec3<T>(dir / dir.norm()));
        s.opacity = g.opacity[i];
        s.source  = i;
        keep[i]   = 1;
    }
    for (std::int64_t i = 0; i < m; ++i) {
        if (keep[i]) {
            res.splats.push_back(candidates[i]);
        }
    }
    res.stats.project_ms = elapsed_ms(t0);
    res.stats.visible    = static_cast<std::int64_t>(res.splats.size());

    RasterOutput<T> raster = rasterize<T>(res.splats, camera.width, camera.height, settings);
    res.image              = std::move(raster.image);
    res.state              = std::move(raster.state);
    res.stats.sort_ms      = raster.sort_ms;
    res.stats.blend_ms     = raster.blend_ms;
    return res;
}

template <typename T>
GaussianGrads<T> render_backward(const ExpandedGaussians<T> &g, const Camera &camera,
                                 const RenderSettings &settings, const RenderResult<T> &fwd,
                                 const Image<T> &grad_image) {
    const SplatGrads<T> sg = rasterize_backward<T>(fwd.splats, settings, fwd.state, grad_image);
    const std::int64_t m   = g.size();
    GaussianGrads<T> out;
    out.positions = RowMatrix<T>::Zero(m, 3);
    out.scales    = RowMatrix<T>::Zero(m, 3);
    out.rotations = RowMatrix<T>::Zero(m, 4);
    out.sh        = RowMatrix<T>::Zero(m, kShCoeffs);
    out.opacity   = Vector<T>::Zero(m);
    const Vec3<T> center = camera.center().cast<T>();
    const T floor        = static_cast<T>(settings.scale_floor);
    const std::int64_t n = static_cast<std::int64_t>(fwd.splats.size());

#pragma omp parallel for schedule(static)
    for (std::int64_t s = 0; s < n; ++s) {
        const std::int64_t i = fwd.splats[s].source;
        out.opacity[i]       = sg.opacity[s];

        const Vec3<T> p   = g.positions.row(i).transpose();
        const Vec3<T> raw = p - center;
        const T dist      = raw.norm();
        const Vec3<T> dir = raw / dist;
        const ShColorGrads<T> cg = eval_sh_color_backward<T>(
            std::span<const T>(g.sh.row(i).data(), kShCoeffs), dir, Vec3<T>(sg.color.row(s).transpose()));
        for (int c = 0; c < kShCoeffs; ++c) {
            out.sh(i, c) = cg.sh[c];
        }
        const Vec3<T> dp_color = (cg.dir - dir * dir.dot(cg.dir)) / dist;

        const Vec3<T> raw_scale = g.scales.row(i).transpose();
        const Vec3<T> scale(sanitize_scale(raw_scale[0], floor), sanitize_scale(raw_scale[1], floor),
                            sanitize_scale(raw_scale[2], floor));
        const Vec4<T> q    = g.rotations.row(i).transpose();
        const Mat3<T> cov  = build_covariance(scale, q);
        const auto pg      = project_backward<T>(p, cov, camera, settings, Vec2<T>(sg.mean.row(s).transpose()),
                                                 {sg.conic(s, 0), sg.conic(s, 1), sg.conic(s, 2)});
        out.positions.row(i) = (pg.position + dp_color).transpose();
        const CovarianceGrads<T> covg = build_covariance_backward(scale, q, pg.cov);
        for (int a = 0; a < 3; ++a) {
            out.scales(i, a) = sanitize_scale_gradient(raw_scale[a], floor, covg.scale[a]);
        }
        out.rotations.row(i) = covg.quat.transpose();
    }
    return out;
}

#define FGS_INSTANTIATE(T)                                                                              \
    template Mat3<T> quaternion_to_matrix<T>(const Vec4<T> &);                                          \
    template Mat3<T> build_covariance<T>(const Vec3<T> &, const Vec4<T> &);                             \
    template CovarianceGrads<T> build_covariance_backward<T>(const Vec3<T> &, const Vec4<T> &,          \
                                                             const Mat3<T> &);                          \
    template std::optional<Projection<T>> project<T>(const Vec3<T> &, const Mat3<T> &, const Camera &,  \
                                                     const RenderSettings &);                           \
    template ProjectionGrads<T> project_backward<T>(const Vec3<T> &, const Mat3<T> &, const Camera &,   \
                                                    const RenderSettings &, const Vec2<T> &,            \
                                                    const std::array<T, 3> &);                          \
    template std::vector<std::int32_t> sort_by_depth<T>(std::span<const T>);                            \
    template RasterOutput<T> rasterize<T>(std::span<const Splat<T>>, int, int, const RenderSettings &); \
    template SplatGrads<T> rasterize_backward<T>(std::span<const Splat<T>>, const RenderSettings &,     \
                                                 const RasterState<T> &, const Image<T> &);             \
    template RenderResult<T> render<T>(const ExpandedGaussians<T> &, const Camera &,                    \
                                       const RenderSettings &);                                         \
    template GaussianGrads<T> render_backward<T>(const ExpandedGaussians<T> &, const Camera &,          \
                                                 const RenderSettings &, const RenderResult<T> &,       \
                                                 const Image<T> &);

FGS_INSTANTIATE(float)
FGS_INSTANTIATE(double)
#undef FGS_INSTANTIATE

} // namespace fgs
