// Copyright Contributors to the fgs Project
// SPDX-License-Identifier: Apache-2.0
//
#include "oracles.hpp"

#include "fgs/errors.hpp"
#include "fgs/sh.hpp"

#include <gtest/gtest.h>

using namespace fgs;

namespace {

Eigen::Vector3d random_unit(std::mt19937_64 &rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::Vector3d v(n(rng), n(rng), n(rng));
    return v.normalized();
}

} // namespace

// The renderer's basis follows the usual graphics sign convention: odd-m
// terms of degree 1 and 3 carry an extra sign relative to the textbook real
// SH. Compare magnitudes per basis function and require one consistent sign
// per function across all directions.
TEST(Sh, BasisMatchesLegendreConstruction) {
    std::mt19937_64 rng(31);
    std::array<int, 16> sign{};
    for (int trial = 0; trial < 200; ++trial) {
        const Eigen::Vector3d d = random_unit(rng);
        const auto lib          = sh_basis<double>(d);
        const auto ref          = oracle::sh_basis(d);
        for (int k = 0; k < 16; ++k) {
            EXPECT_NEAR(std::abs(lib[k]), std::abs(ref[k]), 1e-12) << "basis " << k;
            if (std::abs(ref[k]) > 1e-6) {
                const int s = (lib[k] > 0) == (ref[k] > 0) ? 1 : -1;
                if (sign[k] == 0) {
                    sign[k] = s;
                }
                EXPECT_EQ(sign[k], s) << "basis " << k;
            }
        }
    }
}

TEST(Sh, DcOnlyColor) {
    std::array<double, kShCoeffs> sh{};
    sh[0] = 1.0;
    sh[1] = -1.0;
    sh[2] = 0.0;
    const Eigen::Vector3d c = eval_sh_color<double>(sh, Eigen::Vector3d(0, 0, 1));
    EXPECT_NEAR(c[0], 0.5 + sh_constants::C0, 1e-15);
    EXPECT_NEAR(c[1], 0.5 - sh_constants::C0, 1e-15);
    EXPECT_DOUBLE_EQ(c[2], 0.5);
}

TEST(Sh, ColorIsClamped) {
    std::array<double, kShCoeffs> sh{};
    sh[0] = 100.0;
    sh[1] = -100.0;
    const Eigen::Vector3d c = eval_sh_color<double>(sh, Eigen::Vector3d(1, 0, 0));
    EXPECT_EQ(c[0], 1.0);
    EXPECT_EQ(c[1], 0.0);
    const Eigen::Vector3d g(1, 1, 1);
    const auto grads = eval_sh_color_backward<double>(sh, Eigen::Vector3d(1, 0, 0), g);
    EXPECT_EQ(grads.sh[0], 0.0);
    EXPECT_EQ(grads.sh[1], 0.0);
    EXPECT_NE(grads.sh[2], 0.0);
}

TEST(Sh, DirectionChecks) {
    std::array<double, kShCoeffs> sh{};
    EXPECT_NO_THROW(eval_sh_color<double>(sh, Eigen::Vector3d(0, 0, 1.0005)));
    EXPECT_THROW(eval_sh_color<double>(sh, Eigen::Vector3d(0, 0, 1.01)), ShapeError);
    const std::vector<double> short_sh(10, 0.0);
    EXPECT_THROW(eval_sh_color<double>(short_sh, Eigen::Vector3d(0, 0, 1)), ShapeError);
}

TEST(Sh, BasisGradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(32);
    for (int trial = 0; trial < 10; ++trial) {
        Eigen::Vector3d d = random_unit(rng);
        const auto grad   = sh_basis_gradient<double>(d);
        for (int k = 0; k < 16; ++k) {
            for (int c = 0; c < 3; ++c) {
                const double num =
                    oracle::central_difference([&] { return sh_basis<double>(d)[k]; }, d[c], 1e-6);
                EXPECT_LT(oracle::rel_err(grad[k][c], num, 1e-6), 1e-4) << "basis " << k << " axis " << c;
            }
        }
    }
}

TEST(Sh, ColorBackwardMatchesFiniteDifferences) {
    std::mt19937_64 rng(33);
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<double> sh(kShCoeffs);
        std::uniform_real_distribution<double> u(-0.1, 0.1);
        for (double &v : sh) {
            v = u(rng);
        }
        Eigen::Vector3d d       = random_unit(rng);
        const Eigen::Vector3d g = random_unit(rng);
        const auto grads        = eval_sh_color_backward<double>(sh, d, g);
        auto loss               = [&] { return eval_sh_color_raw<double>(sh, d).dot(g); };
        for (int i = 0; i < kShCoeffs; ++i) {
            const double num = oracle::central_difference(loss, sh[i], 1e-6);
            EXPECT_LT(oracle::rel_err(grads.sh[i], num, 1e-6), 1e-4) << "coefficient " << i;
        }
        for (int c = 0; c < 3; ++c) {
            const double num = oracle::central_difference(loss, d[c], 1e-6);
            EXPECT_LT(oracle::rel_err(grads.dir[c], num, 1e-6), 1e-4) << "axis " << c;
        }
    }
}
