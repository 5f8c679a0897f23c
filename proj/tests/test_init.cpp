// Copyright Contributors to the fgs Project
// SPDX-License-Identifier: Apache-2.0
//
#include "oracles.hpp"

#include "fgs/chamfer.hpp"
#include "fgs/errors.hpp"
#include "fgs/histogram.hpp"
#include "fgs/ply.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

using namespace fgs;

namespace {

RowMatrix<double> random_cloud(int count, std::mt19937_64 &rng, double lo = -1.0, double hi = 1.0) {
    RowMatrix<double> p(count, 3);
    oracle::fill_random(p, rng, lo, hi);
    return p;
}

std::filesystem::path temp_path(const std::string &name) {
    return std::filesystem::temp_directory_path() / ("fgs_test_" + name);
}

} // namespace

TEST(Histogram, TotalsConservePointCount) {
    std::mt19937_64 rng(51);
    for (int trial = 0; trial < 20; ++trial) {
        const int count = 1 + trial * 137;
        const auto pts  = random_cloud(count, rng);
        const auto h    = build_histogram(pts, 0.05 + 0.02 * trial);
        EXPECT_EQ(h.total(), count);
    }
}

TEST(Histogram, CountsMatchBruteForceBinning) {
    std::mt19937_64 rng(52);
    const auto pts = random_cloud(3000, rng, -0.4, 0.7);
    const auto h   = build_histogram(pts, 0.1);
    for (int a = 0; a < 3; ++a) {
        EXPECT_LE(h.lower[a], pts.col(a).minCoeff());
        EXPECT_GE(h.upper[a], pts.col(a).maxCoeff());
        EXPECT_NEAR(h.bin_size[a] * h.bins[a], h.upper[a] - h.lower[a], 1e-12);
    }
    std::map<BinIndex, std::int64_t> brute;
    for (Eigen::Index r = 0; r < pts.rows(); ++r) {
        // Linear search for the bin whose half-open box holds the point.
        int idx[3];
        for (int a = 0; a < 3; ++a) {
            idx[a] = h.bins[a] - 1;
            for (int b = 0; b < h.bins[a]; ++b) {
                if (pts(r, a) < h.lower[a] + (b + 1) * h.bin_size[a]) {
                    idx[a] = b;
                    break;
                }
            }
        }
        ++brute[{idx[0], idx[1], idx[2]}];
    }
    EXPECT_EQ(h.counts, brute);
}

TEST(Histogram, RejectsBadInput) {
    EXPECT_THROW(build_histogram(RowMatrix<double>(0, 3)), DataError);
    RowMatrix<double> p = RowMatrix<double>::Zero(2, 3);
    EXPECT_THROW(build_histogram(p, 0.0), ShapeError);
    p(1, 2) = std::numeric_limits<double>::infinity();
    EXPECT_THROW(build_histogram(p), DataError);
}

TEST(Histogram, DegenerateAxisGetsOneBin) {
    RowMatrix<double> p(4, 3);
    p << 0, 0, 1, 1, 0, 1, 0, 1, 1, 1, 1, 1;
    const auto h = build_histogram(p, 0.5);
    EXPECT_EQ(h.bins[2], 1);
    EXPECT_EQ(h.total(), 4);
}

TEST(Histogram, BlockAllocationRule) {
    EXPECT_EQ(blocks_for_bin(0, 5, 3), 0);
    EXPECT_EQ(blocks_for_bin(5, 5, 3), 0);
    EXPECT_EQ(blocks_for_bin(6, 5, 3), 1);
    EXPECT_EQ(blocks_for_bin(27, 5, 3), 1);
    EXPECT_EQ(blocks_for_bin(28, 5, 3), 2);
    EXPECT_EQ(blocks_for_bin(60, 5, 3), 3);
    EXPECT_EQ(blocks_for_bin(126, 5, 5), 2);
    EXPECT_EQ(blocks_for_bin(1, 0, 1), 1);
}

TEST(Histogram, SeedBlocksFollowAllocationAndStayInBins) {
    std::mt19937_64 rng(53);
    const auto pts = random_cloud(4000, rng);
    const auto h   = build_histogram(pts, 0.25);
    SeedOptions opt;
    opt.resolution  = 3;
    opt.feature_dim = 4;
    const auto blocks = seed_blocks<double>(h, opt);
    std::int64_t expect = 0;
    for (const auto &[bin, count] : h.counts) {
        expect += blocks_for_bin(count, opt.lambda, opt.resolution);
    }
    ASSERT_EQ(static_cast<std::int64_t>(blocks.size()), expect);
    for (const auto &b : blocks) {
        EXPECT_EQ(b.resolution(), 3);
        EXPECT_EQ(b.feature_dim(), 4);
        const Eigen::Vector3d p(b.px[0], b.py[0], b.pz[0]);
        const BinIndex bin      = h.locate(p);
        const Eigen::Vector3d lo = h.bin_lower(bin);
        for (int m = 0; m < 3; ++m) {
            EXPECT_GE(b.px[m], lo.x());
            EXPECT_LT(b.px[m], lo.x() + h.bin_size.x());
            EXPECT_GE(b.pz[m], lo.z());
            EXPECT_LT(b.pz[m], lo.z() + h.bin_size.z());
        }
    }
}

TEST(Histogram, BudgetSeedingHitsExactCount) {
    std::mt19937_64 rng(54);
    const auto pts = random_cloud(2500, rng);
    SeedOptions opt;
    opt.resolution = 3;
    for (int budget : {1, 10, 30}) {
        const auto blocks = seed_blocks_for_budget<double>(pts, budget, opt);
        EXPECT_EQ(static_cast<int>(blocks.size()), budget);
    }
    EXPECT_THROW(seed_blocks_for_budget<double>(pts, 0, opt), ShapeError);
}

TEST(Chamfer, MatchesBruteForce) {
    std::mt19937_64 rng(55);
    for (int trial = 0; trial < 5; ++trial) {
        const auto a = random_cloud(50 + 30 * trial, rng);
        const auto b = random_cloud(80, rng, -0.5, 1.5);
        EXPECT_NEAR(chamfer_distance(a, b), oracle::brute_chamfer(a, b), 1e-12);
    }
    EXPECT_THROW(chamfer_distance(RowMatrix<double>(0, 3), random_cloud(3, rng)), ShapeError);
}

TEST(Chamfer, GridIndexFindsTrueNearest) {
    std::mt19937_64 rng(56);
    const auto pts = random_cloud(500, rng);
    const GridIndex index(pts);
    const auto queries = random_cloud(200, rng, -2.0, 2.0);
    for (Eigen::Index q = 0; q < queries.rows(); ++q) {
        double best = std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < pts.rows(); ++i) {
            best = std::min(best, (pts.row(i) - queries.row(q)).squaredNorm());
        }
        EXPECT_DOUBLE_EQ(index.nearest(queries.row(q).transpose()).squared_distance, best);
    }
}

TEST(Chamfer, GradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(57);
    auto a       = random_cloud(20, rng);
    const auto b = random_cloud(30, rng);
    const auto r = chamfer_with_gradient(a, b);
    EXPECT_NEAR(r.value, oracle::brute_chamfer(a, b), 1e-12);
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        const double num = oracle::central_difference([&] { return oracle::brute_chamfer(a, b); }, a.data()[i], 1e-7);
        EXPECT_LT(oracle::rel_err(r.grad_a.data()[i], num, 1e-6), 1e-4) << "entry " << i;
    }
}

TEST(Chamfer, FittingReducesLoss) {
    std::mt19937_64 rng(58);
    RowMatrix<double> target(600, 3);
    std::normal_distribution<double> n(0.0, 1.0);
    for (Eigen::Index r = 0; r < target.rows(); ++r) {
        Eigen::Vector3d v(n(rng), n(rng), n(rng));
        target.row(r) = v.normalized().transpose();
    }
    const auto fit = fit_coordinates_chamfer(target, 6, 3, 150, 0.01, 1);
    ASSERT_EQ(fit.blocks.size(), 6u);
    ASSERT_EQ(fit.loss_curve.size(), 151u);
    EXPECT_LT(fit.loss_curve.back(), 0.5 * fit.loss_curve.front());
}

TEST(Ply, BinaryRoundTrip) {
    std::mt19937_64 rng(59);
    PointCloud cloud;
    cloud.positions = random_cloud(100, rng);
    RowMatrix<double> colors(100, 3);
    for (Eigen::Index i = 0; i < colors.size(); ++i) {
        colors.data()[i] = static_cast<double>(rng() % 256) / 255.0;
    }
    cloud.colors    = colors;
    const auto path = temp_path("roundtrip.ply");
    write_ply(path, cloud);
    const auto back = read_ply(path);
    EXPECT_TRUE(back.positions.isApprox(cloud.positions, 1e-6));
    ASSERT_TRUE(back.colors.has_value());
    EXPECT_TRUE(back.colors->isApprox(*cloud.colors, 1e-12));
    std::filesystem::remove(path);
}

TEST(Ply, ReadsAsciiWithExtraProperties) {
    const auto path = temp_path("ascii.ply");
    std::ofstream(path) << "ply\nformat ascii 1.0\ncomment test\nelement vertex 2\n"
                           "property float x\nproperty float y\nproperty float z\n"
                           "property float nx\nproperty uchar red\nproperty uchar green\nproperty uchar blue\n"
                           "element face 0\nproperty list uchar int vertex_indices\nend_header\n"
                           "1 2 3 0 255 0 0\n-1 0.5 0 0 0 0 255\n";
    const auto cloud = read_ply(path);
    ASSERT_EQ(cloud.positions.rows(), 2);
    EXPECT_EQ(cloud.positions(1, 0), -1.0);
    EXPECT_EQ(cloud.positions(1, 1), 0.5);
    ASSERT_TRUE(cloud.colors.has_value());
    EXPECT_EQ((*cloud.colors)(0, 0), 1.0);
    EXPECT_EQ((*cloud.colors)(1, 2), 1.0);
    std::filesystem::remove(path);
}

TEST(Ply, MalformedInputThrowsDataError) {
    const auto path = temp_path("bad.ply");
    std::ofstream(path) << "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\n"
                           "property float z\nend_header\n1 2 3\n4 5\n";
    EXPECT_THROW(read_ply(path), DataError);
    std::ofstream(path) << "not a ply\n";
    EXPECT_THROW(read_ply(path), DataError);
    std::filesystem::remove(path);
    EXPECT_THROW(read_ply(temp_path("missing.ply")), DataError);
}
