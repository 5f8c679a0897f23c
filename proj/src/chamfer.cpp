// Copyright Contributors to the fgs Project
// SPDX-License-Identifier: Apache-2.0
//
#include "fgs/chamfer.hpp"

#include "fgs/adam.hpp"
#include "fgs/errors.hpp"
#include "fgs/histogram.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace fgs {

namespace {

double squared_distance(const RowMatrix<double> &pts, std::int64_t i, const Eigen::Vector3d &q) {
    const double dx = pts(i, 0) - q.x();
    const double dy = pts(i, 1) - q.y();
    const double dz = pts(i, 2) - q.z();
    return dx * dx + dy * dy + dz * dz;
}

void require_points(const RowMatrix<double> &p, const char *name) {
    if (p.rows() == 0) {
        throw ShapeError(std::string("chamfer distance needs a non-empty point set ") + name);
    }
    if (p.cols() != 3) {
        throw ShapeError(std::string("point set ") + name + " must be K x 3");
    }
}

} // namespace

GridIndex::GridIndex(const RowMatrix<double> &points) : points_(&points) {
    require_points(points, "for the index");
    const Eigen::Vector3d mn = points.colwise().minCoeff().transpose();
    const Eigen::Vector3d mx = points.colwise().maxCoeff().transpose();
    const double longest     = (mx - mn).maxCoeff();
    const double per_axis    = std::max(1.0, std::round(std::cbrt(static_cast<double>(points.rows()))));
    cell_                    = longest > 0.0 ? longest / per_axis : 1.0;
    origin_                  = mn;
    for (int a = 0; a < 3; ++a) {
        dims_[a] = static_cast<int>(std::floor((mx[a] - mn[a]) / cell_)) + 1;
    }
    const std::int64_t cells = static_cast<std::int64_t>(dims_[0]) * dims_[1] * dims_[2];
    std::vector<std::int64_t> cell_of_point(static_cast<std::size_t>(points.rows()));
    cell_start_.assign(static_cast<std::size_t>(cells + 1), 0);
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        const Eigen::Vector3i c = cell_of(points.row(i).transpose());
        const std::int64_t id   = (static_cast<std::int64_t>(c[0]) * dims_[1] + c[1]) * dims_[2] + c[2];
        cell_of_point[i]        = id;
        ++cell_start_[id + 1];
    }
    for (std::int64_t c = 0; c < cells; ++c) {
        cell_start_[c + 1] += cell_start_[c];
    }
    cell_items_.resize(static_cast<std::size_t>(points.rows()));
    std::vector<std::int64_t> fill(cell_start_.begin(), cell_start_.end() - 1);
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        cell_items_[fill[cell_of_point[i]]++] = i; // ascending index within a cell
    }
}

Eigen::Vector3i GridIndex::cell_of(const Eigen::Vector3d &p) const {
    Eigen::Vector3i c;
    for (int a = 0; a < 3; ++a) {
        const double rel = std::floor((p[a] - origin_[a]) / cell_);
        c[a]             = static_cast<int>(std::clamp(rel, 0.0, static_cast<double>(dims_[a] - 1)));
    }
    return c;
}

GridIndex::Hit GridIndex::nearest(const Eigen::Vector3d &q) const {
    const auto &pts         = *points_;
    const Eigen::Vector3i c = cell_of(q);
    const int max_r         = dims_.maxCoeff();
    Hit best;
    for (int r = 0; r <= max_r; ++r) {
        for (int x = std::max(0, c[0] - r); x <= std::min(dims_[0] - 1, c[0] + r); ++x) {
            for (int y = std::max(0, c[1] - r); y <= std::min(dims_[1] - 1, c[1] + r); ++y) {
                for (int z = std::max(0, c[2] - r); z <= std::min(dims_[2] - 1, c[2] + r); ++z) {
                    const int cheb = std::max({std::abs(x - c[0]), std::abs(y - c[1]), std::abs(z - c[2])});
                    if (cheb != r) {
                        continue;
                    }
                    const std::int64_t id = (static_cast<std::int64_t>(x) * dims_[1] + y) * dims_[2] + z;
                    for (std::int64_t s = cell_start_[id]; s < cell_start_[id + 1]; ++s) {
                        const std::int64_t i = cell_items_[s];
                        const double d2      = squared_distance(pts, i, q);
                        if (best.index < 0 || d2 < best.squared_distance ||
                            (d2 == best.squared_distance && i < best.index)) {
                            best = {i, d2};
                        }
                    }
                }
            }
        }
        // Cells at Chebyshev ring r + 1 or beyond are at least r * cell away.
        // Strict comparison keeps equidistant lower-index points reachable.
        const double bound = r * cell_;
        if (best.index >= 0 && best.squared_distance < bound * bound) {
            break;
        }
    }
    return best;
}

ChamferValueAndGrad chamfer_with_gradient(const RowMatrix<double> &a, const RowMatrix<double> &b) {
    require_points(a, "A");
    require_points(b, "B");
    const GridIndex index_b(b);
    const GridIndex index_a(a);
    const auto na = a.rows();
    const auto nb = b.rows();

    std::vector<GridIndex::Hit> a_to_b(static_cast<std::size_t>(na));
    std::vector<GridIndex::Hit> b_to_a(static_cast<std::size_t>(nb));
#pragma omp parallel for
    for (Eigen::Index i = 0; i < na; ++i) {
        a_to_b[i] = index_b.nearest(a.row(i).transpose());
    }
#pragma omp parallel for
    for (Eigen::Index j = 0; j < nb; ++j) {
        b_to_a[j] = index_a.nearest(b.row(j).transpose());
    }

    ChamferValueAndGrad out;
    out.grad_a = RowMatrix<double>::Zero(na, 3);
    double sum_a = 0.0;
    for (Eigen::Index i = 0; i < na; ++i) {
        sum_a += a_to_b[i].squared_distance;
        out.grad_a.row(i) += (2.0 / na) * (a.row(i) - b.row(a_to_b[i].index));
    }
    double sum_b = 0.0;
    for (Eigen::Index j = 0; j < nb; ++j) {
        sum_b += b_to_a[j].squared_distance;
        const auto i = b_to_a[j].index;
        out.grad_a.row(i) += (2.0 / nb) * (a.row(i) - b.row(j));
    }
    out.value = sum_a / static_cast<double>(na) + sum_b / static_cast<double>(nb);
    return out;
}

double chamfer_distance(const RowMatrix<double> &a, const RowMatrix<double> &b) {
    return chamfer_with_gradient(a, b).value;
}

ChamferFitResult fit_coordinates_chamfer(const RowMatrix<double> &target,
                                         std::vector<FactorSetCP<double>> blocks, int steps,
                                         double lr, double lr_final) {
    require_points(target, "target");
    if (blocks.empty()) {
        throw ShapeError("chamfer fitting needs at least one block");
    }
    if (steps < 0 || !(lr >= 0.0) || !(lr_final >= 0.0)) {
        throw ShapeError("chamfer fitting needs steps >= 0 and learning rates >= 0");
    }
    std::vector<std::array<AdamState<double>, 3>> states;
    for (const auto &b : blocks) {
        const auto n = static_cast<std::size_t>(b.resolution());
        states.push_back({AdamState<double>(n), AdamState<double>(n), AdamState<double>(n)});
    }

    ChamferFitResult result;
    auto evaluate = [&](bool with_grad, std::vector<FactorSetCP<double>> *grads) {
        const auto expanded = expand_multi_set<double>(blocks);
        auto vg             = chamfer_with_gradient(expanded.positions, target);
        if (!std::isfinite(vg.value)) {
            throw NumericalError("chamfer fitting diverged (loss " + std::to_string(vg.value) + ")");
        }
        if (with_grad) {
            auto eg      = ExpansionGrads<double>::zeros(expanded.size(), expanded.features.cols());
            eg.positions = std::move(vg.grad_a);
            *grads       = backprop_multi_set<double>(blocks, eg);
        }
        return vg.value;
    };

    for (int step = 0; step < steps; ++step) {
        std::vector<FactorSetCP<double>> grads;
        result.loss_curve.push_back(evaluate(true, &grads));
        const double step_lr =
            lr_final > 0.0 && lr > 0.0 && steps > 1 ? lr * std::pow(lr_final / lr, static_cast<double>(step) / (steps - 1)) : lr;
        for (std::size_t b = 0; b < blocks.size(); ++b) {
            Vector<double> *coords[3]      = {&blocks[b].px, &blocks[b].py, &blocks[b].pz};
            const Vector<double> *gc[3]    = {&grads[b].px, &grads[b].py, &grads[b].pz};
            for (int a = 0; a < 3; ++a) {
                adam_step<double>(std::span<double>(coords[a]->data(), coords[a]->size()),
                                  std::span<const double>(gc[a]->data(), gc[a]->size()),
                                  states[b][a], step_lr);
            }
        }
    }
    result.loss_curve.push_back(evaluate(false, nullptr));
    result.blocks = std::move(blocks);
    return result;
}

ChamferFitResult fit_coordinates_chamfer(const RowMatrix<double> &target, int block_count,
                                         int resolution, int steps, double lr, std::uint64_t seed,
                                         double lr_final) {
    SeedOptions opt;
    opt.resolution  = resolution;
    opt.feature_dim = 1;
    opt.seed        = seed;
    auto blocks     = seed_blocks_for_budget<double>(target, block_count, opt);
    return fit_coordinates_chamfer(target, std::move(blocks), steps, lr, lr_final);
}

} // namespace fgs
