// Copyright Contributors to the fgs Project
// SPDX-License-Identifier: Apache-2.0
//
#include "fgs/decoder.hpp"

#include "fgs/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

namespace fgs {

template <typename T>
T sigmoid(T x) {
    if (x >= T(0)) {
        return T(1) / (T(1) + std::exp(-x));
    }
    const T e = std::exp(x);
    return e / (T(1) + e);
}

namespace {

// Keeps opacity strictly inside (0, 1) even where the sigmoid rounds.
template <typename T>
T clamp_open_unit(T v) {
    const T lo = std::numeric_limits<T>::min();
    const T hi = T(1) - std::numeric_limits<T>::epsilon() / T(2);
    return std::clamp(v, lo, hi);
}

template <typename T>
struct ForwardTape {
    std::vector<RowMatrix<T>> inputs;      // input of each layer
    std::vector<RowMatrix<T>> pre_activity; // Z of each layer
};

template <typename T>
ForwardTape<T> run_forward(const RowMatrix<T> &features, const DecoderParams<T> &params) {
    params.validate();
    if (features.cols() != params.input_dim()) {
        throw ShapeError("decoder expects feature width " + std::to_string(params.input_dim()) +
                         ", got " + std::to_string(features.cols()));
    }
    ForwardTape<T> tape;
    RowMatrix<T> h = features;
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        const auto &layer = params.layers[l];
        RowMatrix<T> z    = h * layer.weight.transpose();
        z.rowwise() += layer.bias.transpose();
        tape.inputs.push_back(std::move(h));
        if (l + 1 < params.layers.size()) {
            h = z.cwiseMax(T(0));
        }
        tape.pre_activity.push_back(std::move(z));
    }
    return tape;
}

} // namespace

template <typename T>
DecoderParams<T> DecoderParams<T>::init(int feature_dim, std::span<const int> hidden,
                                        std::uint64_t seed) {
    if (feature_dim < 1) {
        throw ShapeError("decoder feature dimension must be at least 1");
    }
    std::mt19937_64 rng(seed);
    DecoderParams p;
    int fan_in = feature_dim;
    auto add   = [&](int out) {
        const double bound = std::sqrt(6.0 / fan_in);
        std::uniform_real_distribution<double> dist(-bound, bound);
        DenseLayer<T> layer;
        layer.weight.resize(out, fan_in);
        for (int r = 0; r < out; ++r) {
            for (int c = 0; c < fan_in; ++c) {
                layer.weight(r, c) = static_cast<T>(dist(rng));
            }
        }
        layer.bias = Vector<T>::Zero(out);
        p.layers.push_back(std::move(layer));
        fan_in = out;
    };
    for (int h : hidden) {
        if (h < 1) {
            throw ShapeError("hidden layer width must be at least 1");
        }
        add(h);
    }
    add(kDecoderOut);
    return p;
}

template <typename T>
DecoderParams<T> DecoderParams<T>::cp_default(int feature_dim, std::uint64_t seed) {
    const int hidden[] = {128};
    return init(feature_dim, hidden, seed);
}

template <typename T>
DecoderParams<T> DecoderParams<T>::vm_default(int feature_dim, int hidden, std::uint64_t seed) {
    const int widths[] = {hidden, hidden};
    return init(feature_dim, widths, seed);
}

template <typename T>
DecoderParams<T> DecoderParams<T>::zeros_like(const DecoderParams &other) {
    DecoderParams p;
    for (const auto &l : other.layers) {
        p.layers.push_back({RowMatrix<T>::Zero(l.weight.rows(), l.weight.cols()),
                            Vector<T>::Zero(l.bias.size())});
    }
    return p;
}

template <typename T>
std::int64_t DecoderParams<T>::parameter_count() const {
    std::int64_t n = 0;
    for (const auto &l : layers) {
        n += l.weight.size() + l.bias.size();
    }
    return n;
}

template <typename T>
void DecoderParams<T>::validate() const {
    if (layers.empty()) {
        throw ShapeError("decoder has no layers");
    }
    for (std::size_t l = 0; l < layers.size(); ++l) {
        if (layers[l].bias.size() != layers[l].weight.rows()) {
            throw ShapeError("decoder layer " + std::to_string(l) + " bias/weight mismatch");
        }
        if (l > 0 && layers[l].weight.cols() != layers[l - 1].weight.rows()) {
            throw ShapeError("decoder layer " + std::to_string(l) + " input width mismatch");
        }
    }
    if (layers.back().weight.rows() != kDecoderOut) {
        throw ShapeError("decoder output width must be 49 (48 SH + 1 opacity logit)");
    }
}

template <typename T>
DecodeOutput<T> decode(const RowMatrix<T> &features, const DecoderParams<T> &params) {
    const auto tape      = run_forward(features, params);
    const RowMatrix<T> &z = tape.pre_activity.back();
    DecodeOutput<T> out;
    out.sh = z.leftCols(kShCoeffs);
    out.opacity.resize(z.rows());
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
        out.opacity[r] = clamp_open_unit(sigmoid(z(r, kShCoeffs)));
    }
    return out;
}

template <typename T>
DecoderGrads<T> decoder_backward(const RowMatrix<T> &features, const DecoderParams<T> &params,
                                 const RowMatrix<T> &grad_sh, const Vector<T> &grad_opacity) {
    const auto tape = run_forward(features, params);
    const auto m    = features.rows();
    if (grad_sh.rows() != m || grad_sh.cols() != kShCoeffs || grad_opacity.size() != m) {
        throw ShapeError("decoder upstream gradients do not match the batch");
    }
    DecoderGrads<T> g;
    g.params = DecoderParams<T>::zeros_like(params);

    RowMatrix<T> dz(m, kDecoderOut);
    dz.leftCols(kShCoeffs) = grad_sh;
    const RowMatrix<T> &z_out = tape.pre_activity.back();
    for (Eigen::Index r = 0; r < m; ++r) {
        const T s          = sigmoid(z_out(r, kShCoeffs));
        dz(r, kShCoeffs)   = grad_opacity[r] * s * (T(1) - s);
    }
    for (std::size_t l = params.layers.size(); l-- > 0;) {
        auto &gl           = g.params.layers[l];
        gl.weight          = dz.transpose() * tape.inputs[l];
        gl.bias            = dz.colwise().sum().transpose();
        RowMatrix<T> dh    = dz * params.layers[l].weight;
        if (l == 0) {
            g.features = std::move(dh);
        } else {
            const RowMatrix<T> &z_prev = tape.pre_activity[l - 1];
            dz = dh.cwiseProduct((z_prev.array() > T(0)).template cast<T>().matrix());
        }
    }
    return g;
}

#define FGS_INSTANTIATE(T)                                                                         \
    template T sigmoid<T>(T);                                                                      \
    template struct DecoderParams<T>;                                                              \
    template DecodeOutput<T> decode<T>(const RowMatrix<T> &, const DecoderParams<T> &);            \
    template DecoderGrads<T> decoder_backward<T>(const RowMatrix<T> &, const DecoderParams<T> &,   \
                                                 const RowMatrix<T> &, const Vector<T> &);

FGS_INSTANTIATE(float)
FGS_INSTANTIATE(double)
#undef FGS_INSTANTIATE

} // namespace fgs
