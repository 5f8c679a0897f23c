// Copyright Contributors to the fgs Project
// SPDX-License-Identifier: Apache-2.0
//
// A complete factorized model (blocks, decoder, masks) and its on-disk form.
//
// Binary layout, little-endian, version 1:
//
//   char[4]  magic "F3GS"
//   u32      version
//   u8       scheme (0 CP, 1 VM)
//   u8       VM expansion mode (0 per-term product, 1 shared grid sum)
//   u8       mask state (0 none, 1 real-valued, 2 packed bits)
//   u8       reserved, 0
//   f32      mask threshold
//   u32      block count B
//   u32      feature width d
//   u32      decoder layer count L, then L x (u32 in, u32 out)
//   u32[B]   per-block resolution N_b
//   u32[B]   per-block mask entry count (0 without masks)
//   f32[]    per-block factor arrays, in the blocks' declared array order
//   f32[]    per-layer weight (out x in, row-major) then bias
//   masks    per block: f32 values (real) or ceil(count / 8) bytes (packed)
#pragma once

#include "fgs/decoder.hpp"
#include "fgs/factor_model.hpp"
#include "fgs/masking.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fgs {

struct Model {
    Scheme scheme  = Scheme::CP;
    VmMode vm_mode = VmMode::PerTermProduct;
    int feature_dim = 16;
    std::vector<FactorSetCP<float>> cp_blocks;
    std::vector<FactorSetVM<float>> vm_blocks;
    DecoderParams<float> decoder;
    MaskSet masks; // empty, or one per block

    std::int64_t block_count() const;
    int block_resolution(std::int64_t b) const;
    /// Gaussians the factors can represent (before masking).
    std::int64_t representable_gaussians() const;
    /// Throws ShapeError on any inconsistency between blocks, decoder and masks.
    void validate() const;

    /// Expands every block and runs the decoder; masks are not applied.
    ExpandedGaussians<float> expand_decoded() const;
    /// expand_decoded, then masks applied (if any) and, when `prune_masked`,
    /// masked-out and near-transparent Gaussians dropped.
    ExpandedGaussians<float> materialize(bool prune_masked = true) const;

    /// Adds trainable masks (one per block) with the given initial value.
    void add_masks(float init = kDefaultMaskInit, float tau = kDefaultMaskThreshold);
    void freeze_masks();
};

struct StorageReport {
    std::int64_t blocks                  = 0;
    std::int64_t stored_scalars          = 0; // factor arrays + decoder weights
    std::int64_t factor_scalars          = 0;
    std::int64_t coordinate_scalars      = 0;
    std::int64_t decoder_scalars         = 0;
    std::int64_t mask_entries            = 0;
    std::int64_t active_gaussians        = 0; // mask bits set (representable when unmasked)
    std::int64_t representable_gaussians = 0;
    double compression_ratio             = 0; // coordinate scalars / (3 x representable)
    std::int64_t bytes_on_disk           = 0;
};

StorageReport storage_report(const Model &model);

std::vector<std::uint8_t> serialize_model(const Model &model);
/// Throws DataError on malformed input.
Model deserialize_model(std::span<const std::uint8_t> bytes);

void save_model(const std::filesystem::path &path, const Model &model);
Model load_model(const std::filesystem::path &path);

/// Lossless JSON debug dump; model_from_json(model_to_json(m)) serializes
/// to the same bytes as m.
std::string model_to_json(const Model &model);
Model model_from_json(std::string_view text);

} // namespace fgs
