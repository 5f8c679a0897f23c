// Copyright Contributors to the fgs Project
// SPDX-License-Identifier: Apache-2.0
//
#include "oracles.hpp"

#include "fgs/errors.hpp"
#include "fgs/renderer.hpp"
#include "fgs/sh.hpp"

#include <Eigen/Geometry>
#include <gtest/gtest.h>

using namespace fgs;

namespace {

Eigen::Vector4d random_unit_quat(std::mt19937_64 &rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    return Eigen::Vector4d(n(rng), n(rng), n(rng), n(rng)).normalized();
}

Splat<double> make_splat(double x, double y, double depth, double sxx, double sxy, double syy,
                         Eigen::Vector3d color, double opacity) {
    Splat<double> s;
    s.mean          = {x, y};
    s.cov           = {sxx, sxy, syy};
    const double det = sxx * syy - sxy * sxy;
    s.conic         = {syy / det, -sxy / det, sxx / det};
    s.depth         = depth;
    s.color         = color;
    s.opacity       = opacity;
    return s;
}

std::vector<Splat<double>> random_splats(int count, int width, int height, std::mt19937_64 &rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Splat<double>> out;
    for (int i = 0; i < count; ++i) {
        const double a = 1.0 + 20.0 * u(rng), b = 1.0 + 20.0 * u(rng);
        const double c = (u(rng) - 0.5) * std::sqrt(a * b);
        out.push_back(make_splat(-4.0 + (width + 8.0) * u(rng), -4.0 + (height + 8.0) * u(rng), 1.0 + 5.0 * u(rng),
                                 a, c, b, Eigen::Vector3d(u(rng), u(rng), u(rng)), 0.05 + 0.9 * u(rng)));
        out.back().source = i;
    }
    return out;
}

// Decoded Gaussians in front of a look-at camera, small enough for FD.
ExpandedGaussians<double> random_gaussians(int count, std::mt19937_64 &rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    ExpandedGaussians<double> g;
    g.resize(count, 1);
    g.sh.resize(count, kShCoeffs);
    g.opacity.resize(count);
    for (int i = 0; i < count; ++i) {
        g.positions.row(i) = Eigen::RowVector3d(0.6 * u(rng), 0.6 * u(rng), 0.6 * u(rng));
        g.scales.row(i)    = Eigen::RowVector3d(0.25 + 0.1 * u(rng), 0.25 + 0.1 * u(rng), 0.25 + 0.1 * u(rng));
        g.rotations.row(i) = random_unit_quat(rng).transpose();
        for (int c = 0; c < kShCoeffs; ++c) {
            g.sh(i, c) = (c < 3 ? 0.4 : 0.08) * u(rng);
        }
        g.opacity[i] = 0.5 + 0.3 * u(rng);
        g.features(i, 0) = 0.0;
        g.origins[i]     = {0, 0, i, 0, 0};
    }
    return g;
}

Camera test_camera(int w = 16, int h = 16) {
    return Camera::look_at({0.3, -3.5, 1.0}, {0, 0, 0}, {0, 0, 1}, 0.7, w, h);
}

Image<double> random_weights(int w, int h, std::mt19937_64 &rng) {
    Image<double> img(w, h);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (double &v : img.data) {
        v = u(rng);
    }
    return img;
}

double weighted_sum(const Image<double> &img, const Image<double> &w) {
    double s = 0.0;
    for (size_t i = 0; i < img.data.size(); ++i) {
        s += img.data[i] * w.data[i];
    }
    return s;
}

} // namespace

TEST(Renderer, QuaternionMatrixIsRotation) {
    std::mt19937_64 rng(61);
    for (int t = 0; t < 20; ++t) {
        const Eigen::Matrix3d r = quaternion_to_matrix<double>(random_unit_quat(rng));
        EXPECT_TRUE((r * r.transpose()).isApprox(Eigen::Matrix3d::Identity(), 1e-12));
        EXPECT_NEAR(r.determinant(), 1.0, 1e-12);
    }
    const Eigen::Vector4d q(0.5, 0.5, 0.5, 0.5);
    const Eigen::Quaterniond ref(q[0], q[1], q[2], q[3]);
    EXPECT_TRUE(quaternion_to_matrix<double>(q).isApprox(ref.toRotationMatrix(), 1e-14));
}

TEST(Renderer, CovarianceOfAxisAlignedGaussian) {
    const Eigen::Matrix3d c = build_covariance<double>({0.5, 2.0, 3.0}, Eigen::Vector4d(1, 0, 0, 0));
    EXPECT_TRUE(c.isApprox(Eigen::Vector3d(0.25, 4.0, 9.0).asDiagonal().toDenseMatrix(), 1e-15));
}

TEST(Renderer, CovarianceBackwardMatchesFiniteDifferences) {
    std::mt19937_64 rng(62);
    Eigen::Vector3d s(0.3, -0.7, 1.1);
    Eigen::Vector4d q = random_unit_quat(rng);
    Eigen::Matrix3d w;
    for (int i = 0; i < 9; ++i) {
        w.data()[i] = std::uniform_real_distribution<double>(-1, 1)(rng);
    }
    const auto g = build_covariance_backward<double>(s, q, w);
    auto loss    = [&] { return build_covariance<double>(s, q).cwiseProduct(w).sum(); };
    for (int c = 0; c < 3; ++c) {
        EXPECT_LT(oracle::rel_err(g.scale[c], oracle::central_difference(loss, s[c], 1e-6)), 1e-6);
    }
    for (int c = 0; c < 4; ++c) {
        EXPECT_LT(oracle::rel_err(g.quat[c], oracle::central_difference(loss, q[c], 1e-6)), 1e-6);
    }
}

TEST(Renderer, ProjectionGeometry) {
    const Camera cam = Camera::look_at({0, -5, 0}, {0, 0, 0}, {0, 0, 1}, 0.8, 64, 48);
    const RenderSettings s;
    const auto p = project<double>(Eigen::Vector3d::Zero(), Eigen::Matrix3d::Identity() * 0.01, cam, s);
    ASSERT_TRUE(p.has_value());
    EXPECT_NEAR(p->mean.x(), 32.0, 1e-9);
    EXPECT_NEAR(p->mean.y(), 24.0, 1e-9);
    EXPECT_NEAR(p->depth, 5.0, 1e-12);
    // Isotropic covariance: fx^2 * var / z^2 plus dilation on the diagonal.
    EXPECT_NEAR(p->cov[0], cam.fx * cam.fx * 0.01 / 25.0 + 0.3, 1e-9);
    EXPECT_NEAR(p->cov[1], 0.0, 1e-12);
    EXPECT_NEAR(p->conic[0] * p->cov[0] + p->conic[1] * p->cov[1], 1.0, 1e-12);
    // +z up in the world is -y (up) in the image.
    const auto up = project<double>(Eigen::Vector3d(0, 0, 0.5), Eigen::Matrix3d::Identity() * 0.01, cam, s);
    EXPECT_LT(up->mean.y(), 24.0);
    EXPECT_FALSE(project<double>(Eigen::Vector3d(0, -5.005, 0), Eigen::Matrix3d::Identity(), cam, s).has_value());
    EXPECT_FALSE(project<double>(Eigen::Vector3d(0, -8, 0), Eigen::Matrix3d::Identity(), cam, s).has_value());
}

TEST(Renderer, ProjectionBackwardMatchesFiniteDifferences) {
    std::mt19937_64 rng(63);
    const Camera cam = test_camera(40, 30);
    const RenderSettings s;
    Eigen::Vector3d p(0.2, -0.1, 0.3);
    Eigen::Matrix3d cov = build_covariance<double>({0.2, 0.4, 0.3}, random_unit_quat(rng));
    const Eigen::Vector2d gm(0.7, -0.4);
    const std::array<double, 3> gc{0.3, -0.9, 0.5};
    auto loss = [&] {
        const auto pr = project<double>(p, cov, cam, s);
        return gm.dot(pr->mean) + gc[0] * pr->conic[0] + gc[1] * pr->conic[1] + gc[2] * pr->conic[2];
    };
    const auto g = project_backward<double>(p, cov, cam, s, gm, gc);
    for (int c = 0; c < 3; ++c) {
        EXPECT_LT(oracle::rel_err(g.position[c], oracle::central_difference(loss, p[c], 1e-6)), 1e-5) << c;
    }
    for (int a = 0; a < 3; ++a) {
        for (int b = a; b < 3; ++b) {
            // Perturb symmetrically; the analytic side sums both entries.
            double h        = 0.0;
            auto sym_loss   = [&] {
                Eigen::Matrix3d saved = cov;
                cov(a, b) += h;
                if (a != b) {
                    cov(b, a) += h;
                }
                const double v = loss();
                cov            = saved;
                return v;
            };
            const double num  = oracle::central_difference(sym_loss, h, 1e-7);
            const double expt = a == b ? g.cov(a, a) : g.cov(a, b) + g.cov(b, a);
            EXPECT_LT(oracle::rel_err(expt, num, 1e-6), 1e-5) << a << "," << b;
        }
    }
}

TEST(Renderer, SortIsStableAndRejectsNan) {
    const std::vector<double> d{3.0, 1.0, 3.0, 2.0, 1.0};
    EXPECT_EQ(sort_by_depth<double>(d), (std::vector<std::int32_t>{1, 4, 3, 0, 2}));
    const std::vector<float> bad{1.0f, std::nanf(""), 0.5f};
    EXPECT_THROW(sort_by_depth<float>(bad), NumericalError);
}

TEST(Renderer, TwoSplatClosedForm) {
    const Eigen::Vector3d c1(0.9, 0.2, 0.1), c2(0.1, 0.3, 0.8);
    const double a1 = 0.6, a2 = 0.7;
    RenderSettings s;
    s.background = {0.25, 0.5, 1.0};
    // Means on the pixel center give power 0, so alpha equals opacity there.
    const std::vector<Splat<double>> splats{make_splat(2.5, 1.5, 3.0, 2, 0, 2, c2, a2),
                                            make_splat(2.5, 1.5, 1.0, 2, 0, 2, c1, a1)};
    const auto out = rasterize<double>(splats, 5, 4, s);
    for (int ch = 0; ch < 3; ++ch) {
        const double expect = c1[ch] * a1 + c2[ch] * a2 * (1 - a1) + s.background[ch] * (1 - a1) * (1 - a2);
        EXPECT_NEAR(out.image.at(2, 1, ch), expect, 1e-6);
    }
}

TEST(Renderer, TiledMatchesNaiveScan) {
    std::mt19937_64 rng(64);
    for (int tile : {16, 8, 5}) {
        for (const RenderSettings base : {RenderSettings{}, RenderSettings::exact()}) {
            RenderSettings s = base;
            s.tile_size      = tile;
            s.background     = {0.1, 0.2, 0.3};
            const auto splats = random_splats(120, 37, 29, rng);
            const auto tiled  = rasterize<double>(splats, 37, 29, s);
            const auto naive  = oracle::naive_rasterize(splats, 37, 29, s);
            EXPECT_EQ(tiled.image.data, naive.data) << "tile " << tile;
        }
    }
}

TEST(Renderer, InputOrderDoesNotMatter) {
    std::mt19937_64 rng(65);
    auto splats      = random_splats(60, 32, 32, rng);
    const auto first = rasterize<double>(splats, 32, 32, RenderSettings{});
    std::shuffle(splats.begin(), splats.end(), rng);
    const auto second = rasterize<double>(splats, 32, 32, RenderSettings{});
    EXPECT_EQ(first.image.data, second.image.data);
}

TEST(Renderer, EmptySceneIsBackground) {
    RenderSettings s;
    s.background = {0.2, 0.4, 0.6};
    ExpandedGaussians<double> g;
    g.resize(0, 4);
    g.sh.resize(0, kShCoeffs);
    g.opacity.resize(0);
    const auto out = render(g, test_camera(), s);
    for (int y = 0; y < 16; ++y) {
        for (int x = 0; x < 16; ++x) {
            EXPECT_EQ(out.image.at(x, y, 2), 0.6);
        }
    }
}

TEST(Renderer, RejectsUndecodedInput) {
    std::mt19937_64 rng(66);
    auto g = random_gaussians(3, rng);
    g.sh.resize(0, kShCoeffs);
    EXPECT_THROW(render(g, test_camera(), RenderSettings{}), ShapeError);
}

TEST(Renderer, RasterBackwardMatchesFiniteDifferences) {
    std::mt19937_64 rng(67);
    const RenderSettings s = RenderSettings::exact();
    auto splats            = random_splats(8, 16, 16, rng);
    const auto w           = random_weights(16, 16, rng);
    const auto fwd         = rasterize<double>(splats, 16, 16, s);
    const auto g           = rasterize_backward<double>(splats, s, fwd.state, w);
    auto loss              = [&] { return weighted_sum(rasterize<double>(splats, 16, 16, s).image, w); };
    for (size_t i = 0; i < splats.size(); ++i) {
        auto &sp = splats[i];
        for (int c = 0; c < 2; ++c) {
            EXPECT_LT(oracle::rel_err(g.mean(i, c), oracle::central_difference(loss, sp.mean[c], 1e-5), 1e-6), 1e-3);
        }
        for (int c = 0; c < 3; ++c) {
            EXPECT_LT(oracle::rel_err(g.conic(i, c), oracle::central_difference(loss, sp.conic[c], 1e-6), 1e-6), 1e-3);
            EXPECT_LT(oracle::rel_err(g.color(i, c), oracle::central_difference(loss, sp.color[c], 1e-6), 1e-6), 1e-3);
        }
        EXPECT_LT(oracle::rel_err(g.opacity[i], oracle::central_difference(loss, sp.opacity, 1e-6), 1e-6), 1e-3);
    }
}

TEST(Renderer, RenderBackwardMatchesFiniteDifferences) {
    std::mt19937_64 rng(68);
    const RenderSettings s = RenderSettings::exact();
    const Camera cam       = test_camera();
    auto g                 = random_gaussians(6, rng);
    const auto w           = random_weights(16, 16, rng);
    const auto fwd         = render(g, cam, s);
    ASSERT_EQ(fwd.stats.visible, 6);
    const auto grads = render_backward(g, cam, s, fwd, w);
    auto loss        = [&] { return weighted_sum(render(g, cam, s).image, w); };
    auto check       = [&](RowMatrix<double> &param, const RowMatrix<double> &analytic, const char *what) {
        for (Eigen::Index i = 0; i < param.size(); ++i) {
            const double num = oracle::central_difference(loss, param.data()[i], 1e-6);
            EXPECT_LT(oracle::rel_err(analytic.data()[i], num, 1e-6), 1e-3) << what << " entry " << i;
        }
    };
    check(g.positions, grads.positions, "position");
    check(g.scales, grads.scales, "scale");
    check(g.rotations, grads.rotations, "rotation");
    check(g.sh, grads.sh, "sh");
    for (Eigen::Index i = 0; i < g.opacity.size(); ++i) {
        const double num = oracle::central_difference(loss, g.opacity[i], 1e-6);
        EXPECT_LT(oracle::rel_err(grads.opacity[i], num, 1e-6), 1e-3) << "opacity " << i;
    }
}

TEST(Renderer, NegativeScalesUseMagnitude) {
    std::mt19937_64 rng(69);
    auto g       = random_gaussians(4, rng);
    const auto a = render(g, test_camera(), RenderSettings{});
    g.scales     = -g.scales;
    const auto b = render(g, test_camera(), RenderSettings{});
    EXPECT_EQ(a.image.data, b.image.data);
}

TEST(Renderer, FloatAndDoubleAgree) {
    std::mt19937_64 rng(70);
    const auto g  = random_gaussians(8, rng);
    ExpandedGaussians<float> gf;
    gf.positions  = g.positions.cast<float>();
    gf.scales     = g.scales.cast<float>();
    gf.rotations  = g.rotations.cast<float>();
    gf.features   = g.features.cast<float>();
    gf.sh         = g.sh.cast<float>();
    gf.opacity    = g.opacity.cast<float>();
    gf.origins    = g.origins;
    const auto a  = render(g, test_camera(), RenderSettings{});
    const auto b  = render(gf, test_camera(), RenderSettings{});
    for (size_t i = 0; i < a.image.data.size(); ++i) {
        EXPECT_NEAR(a.image.data[i], b.image.data[i], 1e-4);
    }
}
