// Copyright Contributors to the fgs Project
// SPDX-License-Identifier: Apache-2.0
//
// Trainable binary masks over each block's (term, i, j, k) grid.
//
// While training, a block mask holds real values M; the forward pass uses
// H(M - tau) (with H(0) = 1) and the backward pass the sigmoid derivative
// of M (straight-through estimator). Once frozen, the mask is a packed
// bitfield in flattened (term, i, j, k) order, LSB-first within each byte.
#pragma once

#include "fgs/factor_model.hpp"

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

namespace fgs {

inline constexpr float kDefaultMaskInit      = 0.1f;
inline constexpr float kDefaultMaskThreshold = 0.01f;
inline constexpr double kDefaultPruneOpacity = 0.001;

inline std::int64_t packed_byte_count(std::int64_t bit_count) { return (bit_count + 7) / 8; }

/// Packs 0/1 values LSB-first; unused high bits of the last byte are zero.
std::vector<std::uint8_t> pack_bits(std::span<const std::uint8_t> bits);
/// Throws ShapeError when the byte count does not match ceil(bit_count / 8).
std::vector<std::uint8_t> unpack_bits(std::span<const std::uint8_t> bytes, std::int64_t bit_count);

/// Forward value of the straight-through binarization: 1 iff m >= tau.
template <typename T>
T binarize_ste(T m, T tau) {
    return (m - tau) >= T(0) ? T(1) : T(0);
}

/// Backward derivative of the straight-through binarization, sigma'(m).
template <typename T>
T ste_gradient(T m);

/// Sum of sigmoid(m) over all entries.
template <typename T>
T mask_loss(std::span<const T> m);

/// d mask_loss / d m, written into `out`.
template <typename T>
void mask_loss_gradient(std::span<const T> m, std::span<T> out);

class BlockMask {
  public:
    /// Real-valued mask, every entry initialized to `init`.
    static BlockMask trainable(int resolution, int terms, float init = kDefaultMaskInit,
                               float tau = kDefaultMaskThreshold);
    static BlockMask frozen(int resolution, int terms, std::vector<std::uint8_t> packed);

    int resolution() const { return resolution_; }
    int terms() const { return terms_; }
    float threshold() const { return tau_; }
    std::int64_t size() const;
    bool is_frozen() const { return std::holds_alternative<std::vector<std::uint8_t>>(state_); }

    /// Real mask values; throws std::logic_error once frozen.
    std::span<float> values();
    std::span<const float> values() const;
    /// Packed bits; throws std::logic_error while trainable.
    const std::vector<std::uint8_t> &packed() const;

    /// Binarized value at a flat (term, i, j, k) index, in either state.
    bool bit(std::int64_t index) const;
    void set_bit(std::int64_t index, bool on);
    std::int64_t active_count() const;

    /// Replaces the real values with their packed binarization.
    void freeze();

  private:
    BlockMask(int resolution, int terms, float tau) : resolution_(resolution), terms_(terms), tau_(tau) {}

    int resolution_ = 0;
    int terms_      = 1;
    float tau_      = kDefaultMaskThreshold;
    std::variant<std::vector<float>, std::vector<std::uint8_t>> state_;
};

using MaskSet = std::vector<BlockMask>;

inline std::int64_t mask_index(const BlockMask &mask, const GaussianOrigin &o) {
    const std::int64_t n = mask.resolution();
    return o.term * n * n * n + grid_index(mask.resolution(), o.i, o.j, o.k);
}

/// Binarized mask value for every expanded Gaussian.
template <typename T>
Vector<T> gather_mask_bits(std::span<const GaussianOrigin> origins, const MaskSet &masks);

/// Multiplies scales and opacity by the binarized mask. Requires a decoded
/// input; positions, rotations, features and SH are copied unchanged.
template <typename T>
ExpandedGaussians<T> apply_mask(const ExpandedGaussians<T> &expanded, const MaskSet &masks);

/// Drops Gaussians whose mask bit is 0 or whose opacity is below
/// `min_opacity`. Survivors keep their order and origins.
template <typename T>
ExpandedGaussians<T> prune(const ExpandedGaussians<T> &expanded, const MaskSet &masks,
                           double min_opacity = kDefaultPruneOpacity);

} // namespace fgs
