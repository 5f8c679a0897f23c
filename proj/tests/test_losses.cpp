// Copyright Contributors to the fgs Project
// SPDX-License-Identifier: Apache-2.0
//
#include "oracles.hpp"

#include "fgs/adam.hpp"
#include "fgs/errors.hpp"
#include "fgs/losses.hpp"

#include <gtest/gtest.h>

using namespace fgs;

namespace {

Image<double> random_image(int w, int h, std::mt19937_64 &rng) {
    Image<double> img(w, h);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (double &v : img.data) {
        v = u(rng);
    }
    return img;
}

} // namespace

TEST(Losses, L1AndGradient) {
    Image<double> a(2, 1), b(2, 1);
    a.data = {0.0, 0.5, 1.0, 0.2, 0.2, 0.2};
    b.data = {0.5, 0.5, 0.0, 0.4, 0.1, 0.2};
    EXPECT_NEAR(l1_loss(a, b), (0.5 + 0 + 1 + 0.2 + 0.1 + 0) / 6.0, 1e-15);
    const auto g = l1_gradient(a, b);
    EXPECT_DOUBLE_EQ(g.data[0], -1.0 / 6);
    EXPECT_DOUBLE_EQ(g.data[1], 0.0);
    EXPECT_DOUBLE_EQ(g.data[2], 1.0 / 6);
}

TEST(Losses, SsimMatchesDirectWindow) {
    std::mt19937_64 rng(71);
    for (int trial = 0; trial < 3; ++trial) {
        const auto a = random_image(23 + trial, 17, rng);
        auto b       = a;
        for (double &v : b.data) {
            v = std::clamp(v + std::normal_distribution<double>(0.0, 0.1)(rng), 0.0, 1.0);
        }
        EXPECT_NEAR(ssim(a, b), oracle::reference_ssim(a, b), 1e-6);
    }
    const auto a = random_image(12, 12, rng);
    EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
}

TEST(Losses, SsimGradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(72);
    auto a       = random_image(14, 13, rng);
    const auto b = random_image(14, 13, rng);
    const auto g = ssim_gradient(a, b);
    for (size_t i = 0; i < a.data.size(); i += 7) {
        const double num = oracle::central_difference([&] { return ssim(a, b); }, a.data[i], 1e-6);
        EXPECT_LT(oracle::rel_err(g.data[i], num, 1e-7), 1e-4) << "entry " << i;
    }
}

TEST(Losses, PhotometricCombination) {
    std::mt19937_64 rng(73);
    auto a       = random_image(16, 16, rng);
    const auto b = random_image(16, 16, rng);
    const auto l = photometric_loss(a, b, 0.2);
    EXPECT_NEAR(l.value, 0.8 * l1_loss(a, b) + 0.2 * (1.0 - ssim(a, b)), 1e-14);
    EXPECT_EQ(l.l1, l1_loss(a, b));
    for (size_t i = 0; i < a.data.size(); i += 31) {
        const double num =
            oracle::central_difference([&] { return photometric_loss(a, b, 0.2, false).value; }, a.data[i], 1e-7);
        EXPECT_LT(oracle::rel_err(l.gradient.data[i], num, 1e-7), 1e-4) << "entry " << i;
    }
    EXPECT_TRUE(photometric_loss(a, b, 0.2, false).gradient.data.empty());
}

TEST(Losses, ShapeMismatchThrows) {
    const Image<double> a(4, 4), b(4, 5);
    EXPECT_THROW(l1_loss(a, b), ShapeError);
    EXPECT_THROW(ssim(a, b), ShapeError);
    EXPECT_THROW(psnr(a, b), ShapeError);
}

TEST(Losses, PsnrExamples) {
    const Image<double> black(8, 8, 0.0), grey(8, 8, 0.5);
    EXPECT_NEAR(psnr(black, grey), 10.0 * std::log10(4.0), 1e-12);
    EXPECT_EQ(psnr(grey, grey), 99.0);
    const Image<float> f1(4, 4, 0.1f), f2(4, 4, 0.2f);
    EXPECT_NEAR(psnr(f1, f2), 20.0, 1e-5);
}

TEST(Adam, MatchesHandComputation) {
    std::vector<double> p{1.0, -2.0};
    AdamState<double> st(2);
    const std::vector<double> g1{0.5, -0.1};
    adam_step<double>(p, g1, st, 0.1);
    // First step: m_hat = g, v_hat = g^2, update = lr * g / (|g| + eps).
    EXPECT_NEAR(p[0], 1.0 - 0.1 * 0.5 / (0.5 + 1e-8), 1e-15);
    EXPECT_NEAR(p[1], -2.0 + 0.1 * 0.1 / (0.1 + 1e-8), 1e-15);
    const std::vector<double> g2{0.2, 0.3};
    const double before = p[0];
    adam_step<double>(p, g2, st, 0.1);
    const double m = 0.9 * (0.1 * 0.5) + 0.1 * 0.2;
    const double v = 0.999 * (0.001 * 0.25) + 0.001 * 0.04;
    const double mh = m / (1 - 0.81), vh = v / (1 - 0.999 * 0.999);
    EXPECT_NEAR(p[0], before - 0.1 * mh / (std::sqrt(vh) + 1e-8), 1e-14);
    EXPECT_EQ(st.step, 2);
}

TEST(Adam, NonFiniteGradientThrowsWithoutSideEffects) {
    std::vector<double> p{1.0, 2.0};
    AdamState<double> st(2);
    const std::vector<double> g{0.1, std::numeric_limits<double>::infinity()};
    EXPECT_THROW(adam_step<double>(p, g, st, 0.1), NumericalError);
    EXPECT_EQ(p, (std::vector<double>{1.0, 2.0}));
    EXPECT_EQ(st.step, 0);
    const std::vector<double> short_g{0.1};
    EXPECT_THROW(adam_step<double>(p, short_g, st, 0.1), ShapeError);
}
