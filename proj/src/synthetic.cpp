// Copyright Contributors to the fgs Project
// SPDX-License-Identifier: Apache-2.0
//
#include "fgs/synthetic.hpp"

#include "fgs/errors.hpp"
#include "fgs/sh.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace fgs {

ExpandedGaussians<float> random_dense_gaussians(const SyntheticOptions &opt) {
    if (opt.gaussians < 1 || !(opt.extent > 0.0) || !(opt.min_scale > 0.0) || !(opt.max_scale >= opt.min_scale)) {
        throw ShapeError("invalid synthetic scene options");
    }
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> pos(-opt.extent, opt.extent);
    std::uniform_real_distribution<double> log_scale(std::log(opt.min_scale), std::log(opt.max_scale));
    std::uniform_real_distribution<double> color(0.1, 0.9);
    std::uniform_real_distribution<double> alpha(0.5, 0.95);
    std::normal_distribution<double> normal(0.0, 1.0);

    const std::int64_t n = opt.gaussians;
    ExpandedGaussians<float> g;
    g.resize(n, 1);
    g.sh      = RowMatrix<float>::Zero(n, kShCoeffs);
    g.opacity = Vector<float>::Zero(n);
    for (std::int64_t i = 0; i < n; ++i) {
        for (int a = 0; a < 3; ++a) {
            g.positions(i, a) = static_cast<float>(pos(rng));
        }
        for (int a = 0; a < 3; ++a) {
            g.scales(i, a) = static_cast<float>(std::exp(log_scale(rng)));
        }
        Eigen::Vector4d q(normal(rng), normal(rng), normal(rng), normal(rng));
        q.normalize();
        g.rotations.row(i) = q.cast<float>().transpose();
        for (int c = 0; c < 3; ++c) {
            g.sh(i, c) = static_cast<float>((color(rng) - 0.5) / sh_constants::C0);
        }
        for (int k = 3; k < kShCoeffs; ++k) {
            g.sh(i, k) = static_cast<float>(0.05 * normal(rng));
        }
        g.opacity[i] = static_cast<float>(alpha(rng));
        g.features(i, 0) = 0.0f;
    }
    return g;
}

std::vector<Camera> orbit_cameras(int count, const SyntheticOptions &opt, std::uint64_t seed) {
    if (count < 0) {
        throw ShapeError("camera count must be >= 0");
    }
    std::mt19937_64 rng(seed);
    const double phase  = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(rng);
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    std::vector<Camera> cams;
    for (int i = 0; i < count; ++i) {
        // Heights in (-0.8, 0.8) keep the up vector away from the view axis.
        const double z   = 0.8 * (1.0 - 2.0 * (i + 0.5) / count);
        const double r   = std::sqrt(1.0 - z * z);
        const double phi = phase + golden * i;
        const Eigen::Vector3d eye = opt.camera_distance * Eigen::Vector3d(r * std::cos(phi), r * std::sin(phi), z);
        cams.push_back(Camera::look_at(eye, Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitZ(), opt.fov_x, opt.width,
                                       opt.height));
    }
    return cams;
}

Scene make_synthetic_scene(const ExpandedGaussians<float> &g, const SyntheticOptions &opt,
                           const RenderSettings &settings) {
    Scene scene;
    auto render_views = [&](int count, std::uint64_t seed, const char *prefix) {
        std::vector<View> views;
        const std::vector<Camera> cams = orbit_cameras(count, opt, seed);
        for (size_t i = 0; i < cams.size(); ++i) {
            View v;
            v.name   = std::string(prefix) + std::to_string(i);
            v.camera = cams[i];
            v.image  = render(g, cams[i], settings).image;
            views.push_back(std::move(v));
        }
        return views;
    };
    scene.train = render_views(opt.train_views, opt.seed * 2 + 1, "train_");
    scene.test  = render_views(opt.test_views, opt.seed * 2 + 2, "test_");

    std::mt19937_64 rng(opt.seed + 7);
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::int64_t k = g.size() * opt.samples_per_gaussian;
    PointCloud pc;
    pc.positions.resize(k, 3);
    pc.colors = RowMatrix<double>(k, 3);
    std::int64_t row = 0;
    for (std::int64_t i = 0; i < g.size(); ++i) {
        const Mat3<double> r = quaternion_to_matrix<double>(g.rotations.row(i).cast<double>().transpose());
        const Eigen::Vector3d s = g.scales.row(i).cast<double>().transpose();
        Eigen::Vector3d rgb;
        for (int c = 0; c < 3; ++c) {
            rgb[c] = std::clamp(0.5 + sh_constants::C0 * g.sh(i, c), 0.0, 1.0);
        }
        for (int j = 0; j < opt.samples_per_gaussian; ++j, ++row) {
            const Eigen::Vector3d z(normal(rng), normal(rng), normal(rng));
            pc.positions.row(row) = (g.positions.row(i).cast<double>().transpose() + r * s.cwiseProduct(z)).transpose();
            pc.colors->row(row)   = rgb.transpose();
        }
    }
    scene.points = std::move(pc);
    return scene;
}

} // namespace fgs
