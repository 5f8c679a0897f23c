// Copyright Contributors to the fgs Project
// SPDX-License-Identifier: Apache-2.0
//
// Small MLP mapping latent Gaussian features to 48 SH coefficients plus one
// opacity logit. Hidden layers use ReLU; the logit goes through a sigmoid.
#pragma once

#include "fgs/types.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace fgs {

template <typename T>
struct DenseLayer {
    RowMatrix<T> weight; // out x in
    Vector<T> bias;      // out
};

template <typename T>
struct DecoderParams {
    std::vector<DenseLayer<T>> layers;

    /// Kaiming-uniform fan-in weights (bound sqrt(6 / fan_in)), zero biases.
    static DecoderParams init(int feature_dim, std::span<const int> hidden, std::uint64_t seed);
    /// d -> 128 -> 49.
    static DecoderParams cp_default(int feature_dim, std::uint64_t seed);
    /// d -> h -> h -> 49.
    static DecoderParams vm_default(int feature_dim, int hidden, std::uint64_t seed);
    static DecoderParams zeros_like(const DecoderParams &other);

    int input_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.front().weight.cols()); }
    std::int64_t parameter_count() const;
    void validate() const;

    template <typename U>
    DecoderParams<U> cast() const {
        DecoderParams<U> out;
        for (const auto &l : layers) {
            out.layers.push_back({l.weight.template cast<U>(), l.bias.template cast<U>()});
        }
        return out;
    }
};

template <typename T>
struct DecodeOutput {
    RowMatrix<T> sh;   // M x 48, laid out [basis * 3 + channel]
    Vector<T> opacity; // M, strictly inside (0, 1)
};

template <typename T>
struct DecoderGrads {
    RowMatrix<T> features;
    DecoderParams<T> params;
};

template <typename T>
DecodeOutput<T> decode(const RowMatrix<T> &features, const DecoderParams<T> &params);

/// Recomputes the forward pass and backpropagates through it.
template <typename T>
DecoderGrads<T> decoder_backward(const RowMatrix<T> &features, const DecoderParams<T> &params,
                                 const RowMatrix<T> &grad_sh, const Vector<T> &grad_opacity);

template <typename T>
T sigmoid(T x);

} // namespace fgs
