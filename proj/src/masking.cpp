// Copyright Contributors to the fgs Project
// SPDX-License-Identifier: Apache-2.0
//
#include "fgs/masking.hpp"

#include "fgs/decoder.hpp"
#include "fgs/errors.hpp"

#include <stdexcept>
#include <string>

namespace fgs {

std::vector<std::uint8_t> pack_bits(std::span<const std::uint8_t> bits) {
    std::vector<std::uint8_t> out(static_cast<std::size_t>(packed_byte_count(bits.size())), 0);
    for (std::size_t i = 0; i < bits.size(); ++i) {
        if (bits[i] != 0) {
            out[i >> 3] |= static_cast<std::uint8_t>(1u << (i & 7));
        }
    }
    return out;
}

std::vector<std::uint8_t> unpack_bits(std::span<const std::uint8_t> bytes, std::int64_t bit_count) {
    if (bit_count < 0 || static_cast<std::int64_t>(bytes.size()) != packed_byte_count(bit_count)) {
        throw ShapeError("packed mask has " + std::to_string(bytes.size()) + " bytes, expected " +
                         std::to_string(packed_byte_count(bit_count)));
    }
    std::vector<std::uint8_t> out(static_cast<std::size_t>(bit_count));
    for (std::int64_t i = 0; i < bit_count; ++i) {
        out[i] = (bytes[i >> 3] >> (i & 7)) & 1u;
    }
    return out;
}

template <typename T>
T ste_gradient(T m) {
    const T s = sigmoid(m);
    return s * (T(1) - s);
}

template <typename T>
T mask_loss(std::span<const T> m) {
    T total = T(0);
    for (const T v : m) {
        total += sigmoid(v);
    }
    return total;
}

template <typename T>
void mask_loss_gradient(std::span<const T> m, std::span<T> out) {
    if (out.size() != m.size()) {
        throw ShapeError("mask gradient buffer has the wrong size");
    }
    for (std::size_t i = 0; i < m.size(); ++i) {
        out[i] = ste_gradient(m[i]);
    }
}

// ---------------------------------------------------------------------------

BlockMask BlockMask::trainable(int resolution, int terms, float init, float tau) {
    if (resolution < 1 || terms < 1) {
        throw ShapeError("mask resolution and term count must be >= 1");
    }
    BlockMask m(resolution, terms, tau);
    const std::int64_t n = resolution;
    m.state_             = std::vector<float>(static_cast<std::size_t>(terms * n * n * n), init);
    return m;
}

BlockMask BlockMask::frozen(int resolution, int terms, std::vector<std::uint8_t> packed) {
    if (resolution < 1 || terms < 1) {
        throw ShapeError("mask resolution and term count must be >= 1");
    }
    BlockMask m(resolution, terms, kDefaultMaskThreshold);
    if (static_cast<std::int64_t>(packed.size()) != packed_byte_count(m.size())) {
        throw ShapeError("packed mask size does not match the block resolution");
    }
    m.state_ = std::move(packed);
    return m;
}

std::int64_t BlockMask::size() const {
    const std::int64_t n = resolution_;
    return terms_ * n * n * n;
}

std::span<float> BlockMask::values() {
    if (is_frozen()) {
        throw std::logic_error("mask is frozen; real values are gone");
    }
    return std::get<std::vector<float>>(state_);
}

std::span<const float> BlockMask::values() const {
    if (is_frozen()) {
        throw std::logic_error("mask is frozen; real values are gone");
    }
    return std::get<std::vector<float>>(state_);
}

const std::vector<std::uint8_t> &BlockMask::packed() const {
    if (!is_frozen()) {
        throw std::logic_error("mask is still trainable");
    }
    return std::get<std::vector<std::uint8_t>>(state_);
}

bool BlockMask::bit(std::int64_t index) const {
    if (const auto *bytes = std::get_if<std::vector<std::uint8_t>>(&state_)) {
        return ((*bytes)[index >> 3] >> (index & 7)) & 1u;
    }
    return binarize_ste(std::get<std::vector<float>>(state_)[index], tau_) != 0.0f;
}

void BlockMask::set_bit(std::int64_t index, bool on) {
    if (auto *bytes = std::get_if<std::vector<std::uint8_t>>(&state_)) {
        const auto flag = static_cast<std::uint8_t>(1u << (index & 7));
        if (on) {
            (*bytes)[index >> 3] |= flag;
        } else {
            (*bytes)[index >> 3] &= static_cast<std::uint8_t>(~flag);
        }
        return;
    }
    // Trainable masks get a value safely on the requested side of tau.
    std::get<std::vector<float>>(state_)[index] = on ? tau_ + 1.0f : tau_ - 1.0f;
}

std::int64_t BlockMask::active_count() const {
    std::int64_t count = 0;
    for (std::int64_t i = 0; i < size(); ++i) {
        count += bit(i) ? 1 : 0;
    }
    return count;
}

void BlockMask::freeze() {
    if (is_frozen()) {
        return;
    }
    const auto &vals = std::get<std::vector<float>>(state_);
    std::vector<std::uint8_t> bits(vals.size());
    for (std::size_t i = 0; i < vals.size(); ++i) {
        bits[i] = binarize_ste(vals[i], tau_) != 0.0f ? 1 : 0;
    }
    state_ = pack_bits(bits);
}

// ---------------------------------------------------------------------------

template <typename T>
Vector<T> gather_mask_bits(std::span<const GaussianOrigin> origins, const MaskSet &masks) {
    Vector<T> out(static_cast<Eigen::Index>(origins.size()));
    for (std::size_t g = 0; g < origins.size(); ++g) {
        const auto &o = origins[g];
        if (o.block < 0 || o.block >= static_cast<int>(masks.size())) {
            throw ShapeError("Gaussian origin refers to block " + std::to_string(o.block) +
                             " but only " + std::to_string(masks.size()) + " masks exist");
        }
        const auto &m = masks[o.block];
        const int n   = m.resolution();
        if (o.term < 0 || o.term >= m.terms() || o.i < 0 || o.i >= n || o.j < 0 || o.j >= n ||
            o.k < 0 || o.k >= n) {
            throw ShapeError("Gaussian origin lies outside its block mask");
        }
        out[static_cast<Eigen::Index>(g)] = m.bit(mask_index(m, o)) ? T(1) : T(0);
    }
    return out;
}

template <typename T>
ExpandedGaussians<T> apply_mask(const ExpandedGaussians<T> &expanded, const MaskSet &masks) {
    if (!expanded.decoded()) {
        throw ShapeError("apply_mask needs decoded Gaussians (opacity)");
    }
    const Vector<T> bits     = gather_mask_bits<T>(expanded.origins, masks);
    ExpandedGaussians<T> out = expanded;
    out.scales               = bits.asDiagonal() * expanded.scales;
    out.opacity              = expanded.opacity.cwiseProduct(bits);
    return out;
}

template <typename T>
ExpandedGaussians<T> prune(const ExpandedGaussians<T> &expanded, const MaskSet &masks,
                           double min_opacity) {
    if (!expanded.decoded()) {
        throw ShapeError("prune needs decoded Gaussians (opacity)");
    }
    const Vector<T> bits = gather_mask_bits<T>(expanded.origins, masks);
    std::vector<std::int64_t> keep;
    keep.reserve(static_cast<std::size_t>(expanded.size()));
    for (std::int64_t g = 0; g < expanded.size(); ++g) {
        if (bits[g] != T(0) && !(static_cast<double>(expanded.opacity[g]) < min_opacity)) {
            keep.push_back(g);
        }
    }
    ExpandedGaussians<T> out;
    out.resize(static_cast<std::int64_t>(keep.size()), static_cast<int>(expanded.features.cols()));
    out.sh.resize(static_cast<Eigen::Index>(keep.size()), kShCoeffs);
    out.opacity.resize(static_cast<Eigen::Index>(keep.size()));
    for (std::size_t r = 0; r < keep.size(); ++r) {
        out.copy_row(static_cast<std::int64_t>(r), expanded, keep[r]);
    }
    return out;
}

#define FGS_INSTANTIATE(T)                                                                         \
    template T ste_gradient<T>(T);                                                                 \
    template T mask_loss<T>(std::span<const T>);                                                   \
    template void mask_loss_gradient<T>(std::span<const T>, std::span<T>);                         \
    template Vector<T> gather_mask_bits<T>(std::span<const GaussianOrigin>, const MaskSet &);      \
    template ExpandedGaussians<T> apply_mask<T>(const ExpandedGaussians<T> &, const MaskSet &);    \
    template ExpandedGaussians<T> prune<T>(const ExpandedGaussians<T> &, const MaskSet &, double);

FGS_INSTANTIATE(float)
FGS_INSTANTIATE(double)
#undef FGS_INSTANTIATE

} // namespace fgs
