// Copyright Contributors to the fgs Project
// SPDX-License-Identifier: Apache-2.0
//
// Independent reference implementations used only by the tests. They are
// written for clarity, not speed, and share no code with the library paths
// they check.
#pragma once

#include "fgs/factor_model.hpp"
#include "fgs/image.hpp"
#include "fgs/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <utility>
#include <vector>

namespace oracle {

using namespace fgs;

// --- expansion -------------------------------------------------------------

template <typename T>
struct FlatGaussians {
    std::vector<std::array<T, 3>> positions;
    std::vector<std::array<T, 3>> scales;
    std::vector<std::array<T, 4>> rotations;
    std::vector<std::vector<T>> features;
};

template <typename T>
std::array<T, 4> unit(std::array<T, 4> q) {
    const T n2 = q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3];
    if (!(n2 >= std::numeric_limits<T>::min())) {
        return {T(1), T(0), T(0), T(0)};
    }
    const T inv = T(1) / std::sqrt(n2);
    return {q[0] * inv, q[1] * inv, q[2] * inv, q[3] * inv};
}

template <typename T>
void push_attributes(FlatGaussians<T> &out, const RowMatrix<T> &sx, const RowMatrix<T> &sy, const RowMatrix<T> &sz,
                     const RowMatrix<T> &qx, const RowMatrix<T> &qy, const RowMatrix<T> &qz, int i, int j, int k) {
    out.scales.push_back({sx(i, 0) * sy(j, 0) * sz(k, 0), sx(i, 1) * sy(j, 1) * sz(k, 1), sx(i, 2) * sy(j, 2) * sz(k, 2)});
    std::array<T, 4> q;
    for (int c = 0; c < 4; ++c) {
        q[c] = qx(i, c) * qy(j, c) * qz(k, c);
    }
    out.rotations.push_back(unit(q));
}

template <typename T>
FlatGaussians<T> expand_cp(const FactorSetCP<T> &b) {
    FlatGaussians<T> out;
    const int n = b.resolution(), d = b.feature_dim();
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            for (int k = 0; k < n; ++k) {
                out.positions.push_back({b.px[i], b.py[j], b.pz[k]});
                push_attributes(out, b.sx, b.sy, b.sz, b.qx, b.qy, b.qz, i, j, k);
                std::vector<T> f(d);
                for (int c = 0; c < d; ++c) {
                    f[c] = b.fx(i, c) * b.fy(j, c) * b.fz(k, c);
                }
                out.features.push_back(f);
            }
        }
    }
    return out;
}

template <typename T>
FlatGaussians<T> expand_vm(const FactorSetVM<T> &b, VmMode mode) {
    FlatGaussians<T> out;
    const int n = b.resolution(), d = b.feature_dim();
    const int terms = mode == VmMode::PerTermProduct ? 3 : 1;
    for (int t = 0; t < terms; ++t) {
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                for (int k = 0; k < n; ++k) {
                    std::vector<T> f(d);
                    if (mode == VmMode::SharedGridSum) {
                        out.positions.push_back({b.px[i], b.py[j], b.pz[k]});
                        for (int c = 0; c < d; ++c) {
                            f[c] = b.fxy(i * n + j, c) * b.fz(k, c) + b.fyz(j * n + k, c) * b.fx(i, c) +
                                   b.fxz(i * n + k, c) * b.fy(j, c);
                        }
                    } else if (t == 0) {
                        out.positions.push_back({b.pxy(i * n + j, 0), b.pxy(i * n + j, 1), b.pz[k]});
                        for (int c = 0; c < d; ++c) {
                            f[c] = b.fxy(i * n + j, c) * b.fz(k, c);
                        }
                    } else if (t == 1) {
                        out.positions.push_back({b.px[i], b.pyz(j * n + k, 0), b.pyz(j * n + k, 1)});
                        for (int c = 0; c < d; ++c) {
                            f[c] = b.fyz(j * n + k, c) * b.fx(i, c);
                        }
                    } else {
                        out.positions.push_back({b.pxz(i * n + k, 0), b.py[j], b.pxz(i * n + k, 1)});
                        for (int c = 0; c < d; ++c) {
                            f[c] = b.fxz(i * n + k, c) * b.fy(j, c);
                        }
                    }
                    push_attributes(out, b.sx, b.sy, b.sz, b.qx, b.qy, b.qz, i, j, k);
                    out.features.push_back(f);
                }
            }
        }
    }
    return out;
}

template <typename T>
void fill_random(RowMatrix<T> &m, std::mt19937_64 &rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        m.data()[i] = static_cast<T>(u(rng));
    }
}

template <typename T>
void fill_random(Vector<T> &v, std::mt19937_64 &rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        v[i] = static_cast<T>(u(rng));
    }
}

template <typename T>
FactorSetCP<T> random_cp(int n, int d, std::mt19937_64 &rng) {
    FactorSetCP<T> b = FactorSetCP<T>::zeros(n, d);
    b.for_each_array([&](std::string_view, ArrayRole, auto &a) { fill_random(a, rng); });
    return b;
}

template <typename T>
FactorSetVM<T> random_vm(int n, int d, std::mt19937_64 &rng) {
    FactorSetVM<T> b = FactorSetVM<T>::zeros(n, d);
    b.for_each_array([&](std::string_view, ArrayRole, auto &a) { fill_random(a, rng); });
    return b;
}

// --- finite differences ----------------------------------------------------

/// Central difference of f at x along coordinate `i` of `x`.
inline double central_difference(const std::function<double()> &f, double &x, double h) {
    const double saved = x;
    x                  = saved + h;
    const double up    = f();
    x                  = saved - h;
    const double down  = f();
    x                  = saved;
    return (up - down) / (2.0 * h);
}

/// Relative error |a - n| / max(|a|, |n|, floor).
inline double rel_err(double analytic, double numeric, double floor = 1e-8) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// --- spherical harmonics ---------------------------------------------------

/// Real SH via associated Legendre functions (Condon-Shortley phase removed
/// from std::assoc_legendre, then reapplied), ordered k = l^2 + l + m.
inline std::array<double, 16> sh_basis(const Eigen::Vector3d &dir) {
    const double theta = std::acos(std::clamp(dir.z(), -1.0, 1.0));
    const double phi   = std::atan2(dir.y(), dir.x());
    std::array<double, 16> out{};
    for (int l = 0; l <= 3; ++l) {
        for (int m = -l; m <= l; ++m) {
            const int am  = std::abs(m);
            double fact   = 1.0;
            for (int t = l - am + 1; t <= l + am; ++t) {
                fact *= t;
            }
            const double k   = std::sqrt((2.0 * l + 1.0) / (4.0 * M_PI) / fact);
            const double plm = (am % 2 == 1 ? -1.0 : 1.0) * std::assoc_legendre(l, am, std::cos(theta));
            double v;
            if (m == 0) {
                v = k * plm;
            } else if (m > 0) {
                v = std::sqrt(2.0) * k * std::cos(m * phi) * plm;
            } else {
                v = std::sqrt(2.0) * k * std::sin(am * phi) * plm;
            }
            out[l * l + l + m] = v;
        }
    }
    return out;
}

// --- rasterization -----------------------------------------------------------

/// Per-pixel scan over every splat in (depth, index) order, with the same
/// cutoff rules as the library. No tiles, no binning.
template <typename T>
Image<T> naive_rasterize(const std::vector<Splat<T>> &splats, int width, int height, const RenderSettings &s) {
    std::vector<std::pair<T, int>> keyed;
    for (int i = 0; i < static_cast<int>(splats.size()); ++i) {
        keyed.push_back({splats[i].depth, i});
    }
    // Insertion sort: stable by construction.
    for (size_t a = 1; a < keyed.size(); ++a) {
        for (size_t b = a; b > 0 && keyed[b].first < keyed[b - 1].first; --b) {
            std::swap(keyed[b], keyed[b - 1]);
        }
    }
    Image<T> img(width, height);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            T trans = T(1);
            T c[3]  = {T(0), T(0), T(0)};
            for (const auto &[depth, idx] : keyed) {
                const Splat<T> &sp = splats[idx];
                const T dx = T(x) + T(0.5) - sp.mean.x(), dy = T(y) + T(0.5) - sp.mean.y();
                const T power = sp.conic[0] * dx * dx + T(2) * sp.conic[1] * dx * dy + sp.conic[2] * dy * dy;
                if (s.support_sigma > 0 && power > T(s.support_sigma * s.support_sigma)) {
                    continue;
                }
                const T alpha = sp.opacity * std::exp(T(-0.5) * power);
                if (alpha < T(s.alpha_min)) {
                    continue;
                }
                const T next = trans * (T(1) - alpha);
                if (next < T(s.transmittance_min)) {
                    break;
                }
                for (int ch = 0; ch < 3; ++ch) {
                    c[ch] += sp.color[ch] * (alpha * trans);
                }
                trans = next;
            }
            for (int ch = 0; ch < 3; ++ch) {
                img.at(x, y, ch) = c[ch] + trans * T(s.background[ch]);
            }
        }
    }
    return img;
}

// --- losses ----------------------------------------------------------------

/// Direct 11x11 window SSIM (2D weights, zero padding), per channel mean.
inline double reference_ssim(const Image<double> &a, const Image<double> &b) {
    double w1[11], sum = 0.0;
    for (int i = 0; i < 11; ++i) {
        w1[i] = std::exp(-(i - 5.0) * (i - 5.0) / (2.0 * 1.5 * 1.5));
        sum += w1[i];
    }
    for (double &v : w1) {
        v /= sum;
    }
    const double c1 = 1e-4, c2 = 9e-4;
    double total    = 0.0;
    for (int ch = 0; ch < 3; ++ch) {
        for (int y = 0; y < a.height; ++y) {
            for (int x = 0; x < a.width; ++x) {
                double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
                for (int v = -5; v <= 5; ++v) {
                    for (int u = -5; u <= 5; ++u) {
                        const int xx = x + u, yy = y + v;
                        if (xx < 0 || yy < 0 || xx >= a.width || yy >= a.height) {
                            continue;
                        }
                        const double w = w1[u + 5] * w1[v + 5];
                        const double p = a.at(xx, yy, ch), q = b.at(xx, yy, ch);
                        mx += w * p;
                        my += w * q;
                        sxx += w * p * p;
                        syy += w * q * q;
                        sxy += w * p * q;
                    }
                }
                const double vx = sxx - mx * mx, vy = syy - my * my, cv = sxy - mx * my;
                total += ((2 * mx * my + c1) * (2 * cv + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            }
        }
    }
    return total / (3.0 * a.width * a.height);
}

// --- point sets --------------------------------------------------------------

inline double brute_chamfer(const RowMatrix<double> &a, const RowMatrix<double> &b) {
    auto one_side = [](const RowMatrix<double> &p, const RowMatrix<double> &q) {
        double sum = 0.0;
        for (Eigen::Index i = 0; i < p.rows(); ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (Eigen::Index j = 0; j < q.rows(); ++j) {
                best = std::min(best, (p.row(i) - q.row(j)).squaredNorm());
            }
            sum += best;
        }
        return sum / static_cast<double>(p.rows());
    };
    return one_side(a, b) + one_side(b, a);
}

/// Farthest point sampling starting at index 0.
inline RowMatrix<double> farthest_point_sample(const RowMatrix<double> &pts, int count) {
    const Eigen::Index n = pts.rows();
    std::vector<double> dist(n, std::numeric_limits<double>::infinity());
    RowMatrix<double> out(count, 3);
    Eigen::Index current = 0;
    for (int s = 0; s < count; ++s) {
        out.row(s) = pts.row(current);
        Eigen::Index next = 0;
        double best       = -1.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            dist[i] = std::min(dist[i], (pts.row(i) - pts.row(current)).squaredNorm());
            if (dist[i] > best) {
                best = dist[i];
                next = i;
            }
        }
        current = next;
    }
    return out;
}

} // namespace oracle
