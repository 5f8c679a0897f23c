// Copyright Contributors to the fgs Project
// SPDX-License-Identifier: Apache-2.0
//
#include "fgs/losses.hpp"

#include "fgs/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace fgs {

namespace {

constexpr int kWindow  = 11;
constexpr double kC1   = 0.01 * 0.01;
constexpr double kC2   = 0.03 * 0.03;

template <typename T>
void check_pair(const Image<T> &a, const Image<T> &b) {
    if (a.width != b.width || a.height != b.height || a.data.size() != b.data.size() ||
        a.data.size() != a.pixel_count() * 3 || a.data.empty()) {
        throw ShapeError("image sizes do not match");
    }
}

template <typename T>
std::array<T, kWindow> gaussian_window() {
    std::array<double, kWindow> w{};
    double sum = 0.0;
    for (int i = 0; i < kWindow; ++i) {
        const double x = i - kWindow / 2;
        w[i]           = std::exp(-x * x / (2.0 * 1.5 * 1.5));
        sum += w[i];
    }
    std::array<T, kWindow> out{};
    for (int i = 0; i < kWindow; ++i) {
        out[i] = static_cast<T>(w[i] / sum);
    }
    return out;
}

// Separable "same" convolution of a single-channel plane with zero padding.
template <typename T>
std::vector<T> blur(const std::vector<T> &src, int w, int h) {
    static const std::array<T, kWindow> win = gaussian_window<T>();
    constexpr int r                         = kWindow / 2;
    std::vector<T> tmp(src.size(), T(0)), out(src.size(), T(0));
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            T acc = T(0);
            for (int k = -r; k <= r; ++k) {
                const int xx = x + k;
                if (xx >= 0 && xx < w) {
                    acc += win[k + r] * src[static_cast<size_t>(y) * w + xx];
                }
            }
            tmp[static_cast<size_t>(y) * w + x] = acc;
        }
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            T acc = T(0);
            for (int k = -r; k <= r; ++k) {
                const int yy = y + k;
                if (yy >= 0 && yy < h) {
                    acc += win[k + r] * tmp[static_cast<size_t>(yy) * w + x];
                }
            }
            out[static_cast<size_t>(y) * w + x] = acc;
        }
    }
    return out;
}

template <typename T>
T ssim_impl(const Image<T> &a, const Image<T> &b, Image<T> *grad) {
    check_pair(a, b);
    const int w = a.width, h = a.height;
    const size_t n = a.pixel_count();
    const T c1 = static_cast<T>(kC1), c2 = static_cast<T>(kC2);
    const T inv_count = T(1) / static_cast<T>(n * 3);
    T total           = T(0);
    if (grad != nullptr) {
        *grad = Image<T>(w, h);
    }
    for (int c = 0; c < 3; ++c) {
        std::vector<T> x(n), y(n), xx(n), yy(n), xy(n);
        for (size_t p = 0; p < n; ++p) {
            x[p]  = a.data[p * 3 + c];
            y[p]  = b.data[p * 3 + c];
            xx[p] = x[p] * x[p];
            yy[p] = y[p] * y[p];
            xy[p] = x[p] * y[p];
        }
        const std::vector<T> mx = blur(x, w, h), my = blur(y, w, h);
        const std::vector<T> exx = blur(xx, w, h), eyy = blur(yy, w, h), exy = blur(xy, w, h);
        std::vector<T> ga, gb, gc;
        if (grad != nullptr) {
            ga.resize(n);
            gb.resize(n);
            gc.resize(n);
        }
        for (size_t p = 0; p < n; ++p) {
            const T vx = exx[p] - mx[p] * mx[p];
            const T vy = eyy[p] - my[p] * my[p];
            const T cv = exy[p] - mx[p] * my[p];
            const T n1 = T(2) * mx[p] * my[p] + c1;
            const T n2 = T(2) * cv + c2;
            const T d1 = mx[p] * mx[p] + my[p] * my[p] + c1;
            const T d2 = vx + vy + c2;
            const T s  = (n1 * n2) / (d1 * d2);
            total += s;
            if (grad != nullptr) {
                ga[p] = s * (T(2) * my[p] / n1 - T(2) * my[p] / n2 - T(2) * mx[p] / d1 + T(2) * mx[p] / d2) * inv_count;
                gb[p] = -s / d2 * inv_count;
                gc[p] = T(2) * s / n2 * inv_count;
            }
        }
        if (grad != nullptr) {
            // The window is symmetric, so the adjoint of the blur is the blur.
            const std::vector<T> ba = blur(ga, w, h), bb = blur(gb, w, h), bc = blur(gc, w, h);
            for (size_t p = 0; p < n; ++p) {
                grad->data[p * 3 + c] = ba[p] + T(2) * x[p] * bb[p] + y[p] * bc[p];
            }
        }
    }
    return total * inv_count;
}

} // namespace

template <typename T>
T l1_loss(const Image<T> &image, const Image<T> &target) {
    check_pair(image, target);
    T sum = T(0);
    for (size_t i = 0; i < image.data.size(); ++i) {
        sum += std::abs(image.data[i] - target.data[i]);
    }
    return sum / static_cast<T>(image.data.size());
}

template <typename T>
Image<T> l1_gradient(const Image<T> &image, const Image<T> &target) {
    check_pair(image, target);
    Image<T> g(image.width, image.height);
    const T scale = T(1) / static_cast<T>(image.data.size());
    for (size_t i = 0; i < image.data.size(); ++i) {
        const T d  = image.data[i] - target.data[i];
        g.data[i] = d > T(0) ? scale : (d < T(0) ? -scale : T(0));
    }
    return g;
}

template <typename T>
T ssim(const Image<T> &image, const Image<T> &target) {
    return ssim_impl<T>(image, target, nullptr);
}

template <typename T>
Image<T> ssim_gradient(const Image<T> &image, const Image<T> &target) {
    Image<T> g;
    ssim_impl<T>(image, target, &g);
    return g;
}

template <typename T>
double psnr(const Image<T> &image, const Image<T> &target) {
    check_pair(image, target);
    double mse = 0.0;
    for (size_t i = 0; i < image.data.size(); ++i) {
        const double d = static_cast<double>(image.data[i]) - static_cast<double>(target.data[i]);
        mse += d * d;
    }
    mse /= static_cast<double>(image.data.size());
    if (!(mse > 0.0)) {
        return 99.0;
    }
    return std::min(99.0, -10.0 * std::log10(mse));
}

template <typename T>
PhotometricLoss<T> photometric_loss(const Image<T> &image, const Image<T> &target, double lambda_dssim,
                                    bool with_gradient) {
    if (!(lambda_dssim >= 0.0 && lambda_dssim <= 1.0)) {
        throw ShapeError("lambda_dssim must lie in [0, 1]");
    }
    const T lam = static_cast<T>(lambda_dssim);
    PhotometricLoss<T> out;
    out.l1 = l1_loss(image, target);
    if (with_gradient) {
        Image<T> gs;
        out.ssim     = ssim_impl<T>(image, target, &gs);
        out.gradient = l1_gradient(image, target);
        for (size_t i = 0; i < gs.data.size(); ++i) {
            out.gradient.data[i] = (T(1) - lam) * out.gradient.data[i] - lam * gs.data[i];
        }
    } else {
        out.ssim = ssim(image, target);
    }
    out.value = (T(1) - lam) * out.l1 + lam * (T(1) - out.ssim);
    return out;
}

#define FGS_INSTANTIATE(T)                                                                         \
    template T l1_loss<T>(const Image<T> &, const Image<T> &);                                     \
    template Image<T> l1_gradient<T>(const Image<T> &, const Image<T> &);                          \
    template T ssim<T>(const Image<T> &, const Image<T> &);                                        \
    template Image<T> ssim_gradient<T>(const Image<T> &, const Image<T> &);                        \
    template double psnr<T>(const Image<T> &, const Image<T> &);                                   \
    template PhotometricLoss<T> photometric_loss<T>(const Image<T> &, const Image<T> &, double, bool);

FGS_INSTANTIATE(float)
FGS_INSTANTIATE(double)
#undef FGS_INSTANTIATE

} // namespace fgs
