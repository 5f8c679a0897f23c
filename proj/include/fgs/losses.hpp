// Copyright Contributors to the fgs Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "fgs/image.hpp"

namespace fgs {

/// Mean absolute error over all pixels and channels.
template <typename T>
T l1_loss(const Image<T> &image, const Image<T> &target);

/// d(l1_loss)/d(image); zero where the two images agree.
template <typename T>
Image<T> l1_gradient(const Image<T> &image, const Image<T> &target);

/// Mean SSIM with an 11x11 Gaussian window (sigma 1.5), zero padding and
/// C1 = 0.01^2, C2 = 0.03^2, computed per channel.
template <typename T>
T ssim(const Image<T> &image, const Image<T> &target);

/// d(ssim)/d(image).
template <typename T>
Image<T> ssim_gradient(const Image<T> &image, const Image<T> &target);

/// 10 log10(1 / MSE) for images in [0, 1], capped at 99 dB.
template <typename T>
double psnr(const Image<T> &image, const Image<T> &target);

template <typename T>
struct PhotometricLoss {
    T value = T(0);
    T l1    = T(0);
    T ssim  = T(0);
    Image<T> gradient;
};

/// (1 - lambda) L1 + lambda (1 - SSIM) and its gradient w.r.t. `image`.
template <typename T>
PhotometricLoss<T> photometric_loss(const Image<T> &image, const Image<T> &target, double lambda_dssim,
                                    bool with_gradient = true);

} // namespace fgs
