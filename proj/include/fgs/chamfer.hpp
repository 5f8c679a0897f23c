// Copyright Contributors to the fgs Project
// SPDX-License-Identifier: Apache-2.0
//
// Symmetric squared Chamfer distance and the point-set fitter built on it.
#pragma once

#include "fgs/factor_model.hpp"

#include <cstdint>
#include <vector>

namespace fgs {

/// Exact nearest-neighbor queries over a uniform grid. Ties go to the
/// lowest point index.
class GridIndex {
  public:
    explicit GridIndex(const RowMatrix<double> &points);

    struct Hit {
        std::int64_t index = -1;
        double squared_distance = 0.0;
    };
    Hit nearest(const Eigen::Vector3d &query) const;

  private:
    const RowMatrix<double> *points_;
    Eigen::Vector3d origin_;
    double cell_ = 1.0;
    Eigen::Vector3i dims_;
    std::vector<std::int64_t> cell_start_; // CSR offsets, size = cells + 1
    std::vector<std::int64_t> cell_items_;

    Eigen::Vector3i cell_of(const Eigen::Vector3d &p) const;
};

/// mean_a min_b |a - b|^2 + mean_b min_a |a - b|^2. Throws ShapeError when
/// either set is empty.
double chamfer_distance(const RowMatrix<double> &a, const RowMatrix<double> &b);

struct ChamferValueAndGrad {
    double value = 0.0;
    RowMatrix<double> grad_a; // d value / d a
};

ChamferValueAndGrad chamfer_with_gradient(const RowMatrix<double> &a, const RowMatrix<double> &b);

struct ChamferFitResult {
    std::vector<FactorSetCP<double>> blocks;
    std::vector<double> loss_curve; // loss before each step, then the final loss
};

/// Adam on the block coordinates only, driven by the Chamfer distance
/// between the expanded points and `target`. Throws NumericalError if the
/// loss becomes non-finite. With lr_final > 0 the step size decays
/// exponentially from lr to lr_final over the run; 0 keeps it constant.
ChamferFitResult fit_coordinates_chamfer(const RowMatrix<double> &target,
                                         std::vector<FactorSetCP<double>> blocks, int steps,
                                         double lr, double lr_final = 0.0);

/// Seeds `block_count` blocks of resolution `resolution` on the target first.
ChamferFitResult fit_coordinates_chamfer(const RowMatrix<double> &target, int block_count,
                                         int resolution, int steps, double lr,
                                         std::uint64_t seed = 0, double lr_final = 0.0);

} // namespace fgs
