// Copyright Contributors to the fgs Project
// SPDX-License-Identifier: Apache-2.0
//
#include "oracles.hpp"

#include "fgs/decoder.hpp"
#include "fgs/errors.hpp"
#include "fgs/masking.hpp"
#include "fgs/renderer.hpp"

#include <gtest/gtest.h>

using namespace fgs;

TEST(Masking, PackIsLsbFirst) {
    const std::vector<std::uint8_t> bits{1, 0, 1, 0, 1, 0, 1, 0, 1};
    const auto packed = pack_bits(bits);
    ASSERT_EQ(packed.size(), 2u);
    EXPECT_EQ(packed[0], 0x55);
    EXPECT_EQ(packed[1], 0x01);
    EXPECT_EQ(unpack_bits(packed, 9), bits);
}

TEST(Masking, PackedSizeIsCeilOfBitsOverEight) {
    for (int n = 1; n <= 10; ++n) {
        const std::int64_t bits = static_cast<std::int64_t>(n) * n * n;
        EXPECT_EQ(BlockMask::trainable(n, 1).size(), bits);
        auto m = BlockMask::trainable(n, 1);
        m.freeze();
        EXPECT_EQ(static_cast<std::int64_t>(m.packed().size()), (bits + 7) / 8) << "N=" << n;
    }
    EXPECT_EQ(packed_byte_count(27), 4);
    EXPECT_EQ(BlockMask::trainable(3, 3).size(), 81);
}

TEST(Masking, UnpackRejectsWrongLength) {
    const std::vector<std::uint8_t> bytes(3, 0);
    EXPECT_THROW(unpack_bits(bytes, 27), ShapeError);
    EXPECT_THROW(BlockMask::frozen(3, 1, bytes), ShapeError);
}

TEST(Masking, RandomRoundTripIsExact) {
    std::mt19937_64 rng(41);
    std::bernoulli_distribution coin(0.5);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 1 + trial % 6;
        std::vector<std::uint8_t> bits(static_cast<size_t>(n * n * n));
        for (auto &b : bits) {
            b = coin(rng) ? 1 : 0;
        }
        const auto m = BlockMask::frozen(n, 1, pack_bits(bits));
        for (size_t i = 0; i < bits.size(); ++i) {
            ASSERT_EQ(m.bit(static_cast<std::int64_t>(i)), bits[i] != 0);
        }
        EXPECT_EQ(unpack_bits(m.packed(), m.size()), bits);
    }
}

TEST(Masking, BinarizeAndStraightThroughGradient) {
    EXPECT_EQ(binarize_ste(0.01f, 0.01f), 1.0f);
    EXPECT_EQ(binarize_ste(0.0099f, 0.01f), 0.0f);
    EXPECT_EQ(binarize_ste(0.5, 0.01), 1.0);
    EXPECT_DOUBLE_EQ(ste_gradient(0.0), 0.25);
    const double m = 1.3;
    const double s = 1.0 / (1.0 + std::exp(-m));
    EXPECT_NEAR(ste_gradient(m), s * (1 - s), 1e-15);
}

TEST(Masking, LossIsSumOfSigmoids) {
    const std::vector<double> zeros(4, 0.0);
    EXPECT_DOUBLE_EQ(mask_loss<double>(zeros), 2.0);
    std::vector<double> m{-2.0, 0.3, 5.0};
    double expect = 0.0;
    for (double v : m) {
        expect += 1.0 / (1.0 + std::exp(-v));
    }
    EXPECT_NEAR(mask_loss<double>(m), expect, 1e-15);
    std::vector<double> g(3);
    mask_loss_gradient<double>(m, g);
    for (size_t i = 0; i < m.size(); ++i) {
        const double num = oracle::central_difference([&] { return mask_loss<double>(m); }, m[i], 1e-6);
        EXPECT_LT(oracle::rel_err(g[i], num), 1e-7);
    }
}

TEST(Masking, FreezeKeepsBitsAboveThreshold) {
    auto m    = BlockMask::trainable(2, 1, 0.1f, 0.01f);
    auto vals = m.values();
    vals[0]   = -1.0f;
    vals[3]   = 0.01f;
    vals[5]   = 0.0f;
    EXPECT_EQ(m.active_count(), 6);
    m.freeze();
    EXPECT_TRUE(m.is_frozen());
    EXPECT_EQ(m.packed().size(), 1u);
    EXPECT_EQ(m.packed()[0], 0b11011110);
    EXPECT_THROW(m.values(), std::logic_error);
    m.set_bit(7, false);
    EXPECT_EQ(m.active_count(), 5);
}

namespace {

struct MaskedScene {
    ExpandedGaussians<double> gaussians;
    MaskSet masks;
};

MaskedScene masked_scene(std::uint64_t seed, double keep) {
    std::mt19937_64 rng(seed);
    std::vector<FactorSetCP<double>> blocks;
    for (int b = 0; b < 3; ++b) {
        auto blk = oracle::random_cp<double>(3, 4, rng);
        oracle::fill_random(blk.sx, rng, 0.3, 0.6);
        oracle::fill_random(blk.sy, rng, 0.3, 0.6);
        oracle::fill_random(blk.sz, rng, 0.3, 0.6);
        blocks.push_back(blk);
    }
    MaskedScene s;
    s.gaussians          = expand_multi_set<double>(blocks);
    const auto decoded   = decode(s.gaussians.features, DecoderParams<double>::cp_default(4, seed));
    s.gaussians.sh       = decoded.sh;
    s.gaussians.opacity  = decoded.opacity;
    std::bernoulli_distribution coin(keep);
    for (int b = 0; b < 3; ++b) {
        std::vector<std::uint8_t> bits(27);
        for (auto &v : bits) {
            v = coin(rng) ? 1 : 0;
        }
        s.masks.push_back(BlockMask::frozen(3, 1, pack_bits(bits)));
    }
    return s;
}

} // namespace

TEST(Masking, ApplyZeroesScalesAndOpacityOnly) {
    const auto s      = masked_scene(42, 0.5);
    const auto masked = apply_mask(s.gaussians, s.masks);
    const auto bits   = gather_mask_bits<double>(s.gaussians.origins, s.masks);
    for (std::int64_t g = 0; g < s.gaussians.size(); ++g) {
        EXPECT_EQ(masked.scales.row(g), (s.gaussians.scales.row(g) * bits[g]).eval());
        EXPECT_EQ(masked.opacity[g], s.gaussians.opacity[g] * bits[g]);
        EXPECT_EQ(masked.positions.row(g), s.gaussians.positions.row(g));
        EXPECT_EQ(masked.sh.row(g), s.gaussians.sh.row(g));
    }
}

TEST(Masking, PruneKeepsOrderAndMatchesBits) {
    const auto s      = masked_scene(43, 0.5);
    const auto pruned = prune(s.gaussians, s.masks, 0.0);
    const auto bits   = gather_mask_bits<double>(s.gaussians.origins, s.masks);
    EXPECT_EQ(pruned.size(), static_cast<std::int64_t>(bits.sum()));
    std::int64_t next = 0;
    for (std::int64_t g = 0; g < s.gaussians.size(); ++g) {
        if (bits[g] != 0.0) {
            EXPECT_EQ(pruned.origins[next], s.gaussians.origins[g]);
            EXPECT_EQ(pruned.positions.row(next), s.gaussians.positions.row(g));
            ++next;
        }
    }
}

TEST(Masking, PrunedRenderEqualsMaskedRender) {
    const auto s       = masked_scene(44, 0.5);
    const Camera cam   = Camera::look_at({0, -4, 1}, {0, 0, 0}, {0, 0, 1}, 0.9, 48, 40);
    const RenderSettings settings;
    const auto full    = render(apply_mask(s.gaussians, s.masks), cam, settings);
    const auto pruned  = render(prune(s.gaussians, s.masks, 0.0), cam, settings);
    EXPECT_GT(*std::max_element(full.image.data.begin(), full.image.data.end()), 0.1);
    EXPECT_EQ(full.image.data, pruned.image.data);
}

TEST(Masking, GatherRejectsBadOrigins) {
    const auto s = masked_scene(45, 0.5);
    auto origins = s.gaussians.origins;
    origins[0].block = 7;
    EXPECT_THROW(gather_mask_bits<double>(origins, s.masks), ShapeError);
    origins[0].block = 0;
    origins[0].i     = 3;
    EXPECT_THROW(gather_mask_bits<double>(origins, s.masks), ShapeError);
}
