// Copyright Contributors to the fgs Project
// SPDX-License-Identifier: Apache-2.0
//
#include "fgs/histogram.hpp"

#include "fgs/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace fgs {

std::int64_t HistogramGrid::total() const {
    std::int64_t t = 0;
    for (const auto &[bin, count] : counts) {
        t += count;
    }
    return t;
}

BinIndex HistogramGrid::locate(const Eigen::Vector3d &p) const {
    int idx[3];
    for (int a = 0; a < 3; ++a) {
        // Half-open bins; the last bin is closed on the right.
        const double rel = (p[a] - lower[a]) / bin_size[a];
        idx[a]           = std::clamp(static_cast<int>(std::floor(rel)), 0, bins[a] - 1);
    }
    return {idx[0], idx[1], idx[2]};
}

Eigen::Vector3d HistogramGrid::bin_lower(const BinIndex &b) const {
    return lower + Eigen::Vector3d(b.x * bin_size.x(), b.y * bin_size.y(), b.z * bin_size.z());
}

HistogramGrid build_histogram(const RowMatrix<double> &points, double interval,
                              double expand_factor, const RowMatrix<double> *colors) {
    if (points.rows() == 0) {
        throw DataError("cannot build a histogram from an empty point cloud");
    }
    if (points.cols() != 3) {
        throw ShapeError("points must be K x 3");
    }
    if (!points.allFinite()) {
        throw DataError("point cloud contains non-finite coordinates");
    }
    if (!(interval > 0.0) || !(expand_factor >= 1.0)) {
        throw ShapeError("histogram interval must be > 0 and expand factor >= 1");
    }
    if (colors != nullptr && (colors->rows() != points.rows() || colors->cols() != 3)) {
        throw ShapeError("colors must be K x 3 to match the points");
    }

    HistogramGrid h;
    h.interval                 = interval;
    const Eigen::Vector3d mn   = points.colwise().minCoeff().transpose();
    const Eigen::Vector3d mx   = points.colwise().maxCoeff().transpose();
    const Eigen::Vector3d mid  = 0.5 * (mn + mx);
    for (int a = 0; a < 3; ++a) {
        const double extent = expand_factor * (mx[a] - mn[a]);
        if (extent > 0.0) {
            h.bins[a]     = std::max(1, static_cast<int>(std::ceil(extent / interval)));
            h.bin_size[a] = extent / h.bins[a];
            h.lower[a]    = mid[a] - 0.5 * extent;
            h.upper[a]    = mid[a] + 0.5 * extent;
        } else {
            h.bins[a]     = 1;
            h.bin_size[a] = interval;
            h.lower[a]    = mid[a] - 0.5 * interval;
            h.upper[a]    = mid[a] + 0.5 * interval;
        }
    }
    for (Eigen::Index r = 0; r < points.rows(); ++r) {
        const BinIndex b = h.locate(points.row(r).transpose());
        ++h.counts[b];
        if (colors != nullptr) {
            auto [it, inserted] = h.color_sums.try_emplace(b, Eigen::Vector3d::Zero());
            it->second += colors->row(r).transpose();
        }
    }
    return h;
}

std::int64_t blocks_for_bin(std::int64_t count, double lambda, int resolution) {
    if (!(static_cast<double>(count) > lambda)) {
        return 0;
    }
    const std::int64_t n    = resolution;
    const std::int64_t cube = n * n * n;
    return (count + cube - 1) / cube;
}

namespace {

template <typename T>
void init_attributes(FactorSetCP<T> &b, double iso_scale, std::mt19937_64 &rng,
                     const Eigen::Vector3d *mean_color) {
    const int n = b.resolution();
    const int d = b.feature_dim();
    std::normal_distribution<double> jitter(0.0, 0.1);
    const T axis_scale = static_cast<T>(std::cbrt(iso_scale));
    b.sx.setConstant(axis_scale);
    b.sy.setConstant(axis_scale);
    b.sz.setConstant(axis_scale);
    for (RowMatrix<T> *q : {&b.qx, &b.qy, &b.qz}) {
        for (int r = 0; r < n; ++r) {
            (*q)(r, 0) = T(1);
            for (int c = 1; c < kRotationDims; ++c) {
                (*q)(r, c) = static_cast<T>(jitter(rng));
            }
        }
    }
    for (RowMatrix<T> *f : {&b.fx, &b.fy, &b.fz}) {
        for (int r = 0; r < n; ++r) {
            for (int c = 0; c < d; ++c) {
                (*f)(r, c) = static_cast<T>(1.0 + jitter(rng));
            }
        }
    }
    if (mean_color != nullptr) {
        for (int c = 0; c < std::min(3, d); ++c) {
            const T v = static_cast<T>(std::cbrt(std::max(1e-3, (*mean_color)[c])));
            b.fx.col(c).setConstant(v);
            b.fy.col(c).setConstant(v);
            b.fz.col(c).setConstant(v);
        }
    }
}

template <typename T>
FactorSetCP<T> block_in_bin(const HistogramGrid &h, const BinIndex &bin, const SeedOptions &opt,
                            std::mt19937_64 &rng, const Eigen::Vector3d *mean_color) {
    const int n               = opt.resolution;
    const Eigen::Vector3d low = h.bin_lower(bin);
    Vector<T> axis[3];
    for (int a = 0; a < 3; ++a) {
        axis[a].resize(n);
        const double step = h.bin_size[a] / n;
        for (int m = 0; m < n; ++m) {
            axis[a][m] = static_cast<T>(low[a] + (m + 0.5) * step);
        }
    }
    FactorSetCP<T> b(axis[0], axis[1], axis[2], opt.feature_dim);
    init_attributes(b, h.bin_size.mean() / (2.0 * n), rng, mean_color);
    return b;
}

void check_options(const SeedOptions &opt) {
    if (opt.resolution < 1 || opt.feature_dim < 1) {
        throw ShapeError("seed resolution and feature dim must be >= 1");
    }
    if (!(opt.lambda >= 0.0)) {
        throw ShapeError("seed threshold lambda must be >= 0");
    }
}

} // namespace

template <typename T>
std::vector<FactorSetCP<T>> seed_blocks(const HistogramGrid &hist, const SeedOptions &opt) {
    check_options(opt);
    std::mt19937_64 rng(opt.seed);
    std::vector<FactorSetCP<T>> out;
    for (const auto &[bin, count] : hist.counts) {
        const std::int64_t nblocks = blocks_for_bin(count, opt.lambda, opt.resolution);
        std::optional<Eigen::Vector3d> color;
        if (auto it = hist.color_sums.find(bin); it != hist.color_sums.end()) {
            color = it->second / static_cast<double>(count);
        }
        for (std::int64_t b = 0; b < nblocks; ++b) {
            out.push_back(block_in_bin<T>(hist, bin, opt, rng, color ? &*color : nullptr));
        }
    }
    return out;
}

template <typename T>
std::vector<FactorSetCP<T>> seed_blocks_for_budget(const RowMatrix<double> &points, int block_count,
                                                   const SeedOptions &opt) {
    check_options(opt);
    if (block_count < 1) {
        throw ShapeError("block budget must be at least 1");
    }
    if (points.rows() == 0) {
        throw DataError("cannot seed blocks from an empty point cloud");
    }
    const Eigen::Vector3d extent =
        (points.colwise().maxCoeff() - points.colwise().minCoeff()).transpose();
    const double diag = std::max(extent.norm(), 1e-9);

    HistogramGrid hist;
    for (int step = 0; step < 400; ++step) {
        const double interval = diag * 0.005 * std::pow(1.05, step);
        hist                  = build_histogram(points, interval);
        std::int64_t total    = 0;
        for (const auto &[bin, count] : hist.counts) {
            total += blocks_for_bin(count, opt.lambda, opt.resolution);
        }
        if (total >= block_count) {
            break;
        }
    }

    // Densest bins first (bin order breaks ties), then emit in bin order.
    std::vector<std::pair<BinIndex, std::int64_t>> bins(hist.counts.begin(), hist.counts.end());
    std::stable_sort(bins.begin(), bins.end(),
                     [](const auto &a, const auto &b) { return a.second > b.second; });
    std::map<BinIndex, std::int64_t> chosen;
    std::int64_t remaining = block_count;
    for (const auto &[bin, count] : bins) {
        const std::int64_t nb = std::min(remaining, blocks_for_bin(count, opt.lambda, opt.resolution));
        if (nb > 0) {
            chosen[bin] = nb;
            remaining -= nb;
        }
        if (remaining == 0) {
            break;
        }
    }
    if (chosen.empty()) {
        throw DataError("point cloud is too sparse to seed any block");
    }
    std::mt19937_64 rng(opt.seed);
    std::vector<FactorSetCP<T>> out;
    for (const auto &[bin, nb] : chosen) {
        for (std::int64_t b = 0; b < nb; ++b) {
            out.push_back(block_in_bin<T>(hist, bin, opt, rng, nullptr));
        }
    }
    return out;
}

template <typename T>
std::vector<FactorSetCP<T>> random_blocks(const Eigen::Vector3d &lower, const Eigen::Vector3d &upper,
                                          int block_count, const SeedOptions &opt) {
    check_options(opt);
    std::mt19937_64 rng(opt.seed);
    const int n = opt.resolution;
    std::vector<FactorSetCP<T>> out;
    const double iso = (upper - lower).mean() / (2.0 * n * std::cbrt(std::max(1, block_count)));
    for (int b = 0; b < block_count; ++b) {
        Vector<T> axis[3];
        for (int a = 0; a < 3; ++a) {
            std::uniform_real_distribution<double> u(lower[a], upper[a]);
            axis[a].resize(n);
            for (int m = 0; m < n; ++m) {
                axis[a][m] = static_cast<T>(u(rng));
            }
        }
        FactorSetCP<T> blk(axis[0], axis[1], axis[2], opt.feature_dim);
        init_attributes(blk, iso, rng, nullptr);
        out.push_back(std::move(blk));
    }
    return out;
}

#define FGS_INSTANTIATE(T)                                                                         \
    template std::vector<FactorSetCP<T>> seed_blocks<T>(const HistogramGrid &, const SeedOptions &); \
    template std::vector<FactorSetCP<T>> seed_blocks_for_budget<T>(const RowMatrix<double> &, int, \
                                                                   const SeedOptions &);           \
    template std::vector<FactorSetCP<T>> random_blocks<T>(                                         \
        const Eigen::Vector3d &, const Eigen::Vector3d &, int, const SeedOptions &);

FGS_INSTANTIATE(float)
FGS_INSTANTIATE(double)
#undef FGS_INSTANTIATE

} // namespace fgs
