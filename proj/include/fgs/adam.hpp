// Copyright Contributors to the fgs Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "fgs/errors.hpp"

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace fgs {

struct AdamHyper {
    double beta1   = 0.9;
    double beta2   = 0.999;
    double epsilon = 1e-8;
};

/// First/second moment accumulators for one parameter tensor.
template <typename T>
struct AdamState {
    std::vector<T> first_moment;
    std::vector<T> second_moment;
    std::int64_t step = 0;

    explicit AdamState(std::size_t size = 0) : first_moment(size, T(0)), second_moment(size, T(0)) {}
};

/// One bias-corrected Adam update. Throws NumericalError on a non-finite
/// gradient before touching any state.
template <typename T>
void adam_step(std::span<T> params, std::span<const T> grads, AdamState<T> &state, double lr,
               const AdamHyper &hyper = {}) {
    if (grads.size() != params.size() || state.first_moment.size() != params.size() ||
        state.second_moment.size() != params.size()) {
        throw ShapeError("adam_step: parameter, gradient and moment sizes differ");
    }
    for (std::size_t i = 0; i < grads.size(); ++i) {
        if (!std::isfinite(grads[i])) {
            throw NumericalError("adam_step: non-finite gradient " + std::to_string(grads[i]) +
                                 " at element " + std::to_string(i) + " of " +
                                 std::to_string(grads.size()) + " (step " +
                                 std::to_string(state.step + 1) + ")");
        }
    }
    ++state.step;
    const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.step));
    const T b1       = static_cast<T>(hyper.beta1);
    const T b2       = static_cast<T>(hyper.beta2);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const T g              = grads[i];
        state.first_moment[i]  = b1 * state.first_moment[i] + (T(1) - b1) * g;
        state.second_moment[i] = b2 * state.second_moment[i] + (T(1) - b2) * g * g;
        const double m_hat     = static_cast<double>(state.first_moment[i]) / bc1;
        const double v_hat     = static_cast<double>(state.second_moment[i]) / bc2;
        params[i] -= static_cast<T>(lr * m_hat / (std::sqrt(v_hat) + hyper.epsilon));
    }
}

} // namespace fgs
