// Copyright Contributors to the fgs Project
// SPDX-License-Identifier: Apache-2.0
//
// fgs: command-line front end.
//
// Exit codes: 0 success, 2 bad arguments, 3 data error, 4 numerical failure.

#include "fgs/chamfer.hpp"
#include "fgs/config.hpp"
#include "fgs/errors.hpp"
#include "fgs/losses.hpp"
#include "fgs/manifest.hpp"
#include "fgs/model.hpp"
#include "fgs/ply.hpp"
#include "fgs/renderer.hpp"
#include "fgs/scene.hpp"
#include "fgs/synthetic.hpp"
#include "fgs/trainer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <iostream>
#include <optional>

namespace {

using namespace fgs;
namespace fs = std::filesystem;

constexpr int kExitBadArgs   = 2;
constexpr int kExitData      = 3;
constexpr int kExitNumerical = 4;

struct ConfigArgs {
    std::string config_file;
    std::vector<std::string> overrides;
    std::optional<std::string> scheme;
    std::optional<int> resolution;
    std::optional<int> feature_dim;
    std::optional<std::int64_t> steps;
    std::optional<std::uint64_t> seed;

    void add_to(CLI::App *app) {
        app->add_option("--config", config_file, "key = value config file");
        app->add_option("--set", overrides, "override a config key (key=value), repeatable");
        app->add_option("--scheme", scheme, "CP or VM");
        app->add_option("-N,--resolution", resolution, "block resolution");
        app->add_option("-d,--feature-dim", feature_dim, "latent feature width");
        app->add_option("--steps", steps, "total training steps");
        app->add_option("--seed", seed, "random seed");
    }

    TrainConfig resolve() const {
        TrainConfig cfg = config_file.empty() ? TrainConfig{} : load_config(config_file);
        for (const std::string &kv : overrides) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) {
                throw ShapeError("--set expects key=value, got '" + kv + "'");
            }
            cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
        }
        if (scheme) {
            cfg.set("scheme", *scheme);
        }
        if (resolution) {
            cfg.resolution = *resolution;
        }
        if (feature_dim) {
            cfg.feature_dim = *feature_dim;
        }
        if (steps) {
            cfg.total_steps = *steps;
        }
        if (seed) {
            cfg.seed = *seed;
        }
        cfg.validate();
        return cfg;
    }
};

void print_report(const StorageReport &r, bool as_json) {
    if (as_json) {
        nlohmann::json j{{"blocks", r.blocks},
                         {"stored_scalars", r.stored_scalars},
                         {"factor_scalars", r.factor_scalars},
                         {"coordinate_scalars", r.coordinate_scalars},
                         {"decoder_scalars", r.decoder_scalars},
                         {"mask_entries", r.mask_entries},
                         {"active_gaussians", r.active_gaussians},
                         {"representable_gaussians", r.representable_gaussians},
                         {"compression_ratio", r.compression_ratio},
                         {"bytes_on_disk", r.bytes_on_disk}};
        std::cout << j.dump(2) << '\n';
        return;
    }
    std::printf("blocks                   %lld\n", static_cast<long long>(r.blocks));
    std::printf("stored scalars           %lld (factors %lld, decoder %lld)\n", static_cast<long long>(r.stored_scalars),
                static_cast<long long>(r.factor_scalars), static_cast<long long>(r.decoder_scalars));
    std::printf("coordinate scalars       %lld\n", static_cast<long long>(r.coordinate_scalars));
    std::printf("representable Gaussians  %lld\n", static_cast<long long>(r.representable_gaussians));
    std::printf("active Gaussians         %lld\n", static_cast<long long>(r.active_gaussians));
    std::printf("compression ratio        %.9g\n", r.compression_ratio);
    std::printf("bytes on disk            %lld\n", static_cast<long long>(r.bytes_on_disk));
}

std::vector<std::string> arguments(int argc, char **argv) { return {argv + 1, argv + argc}; }

int run(int argc, char **argv) {
    CLI::App app{"Factorized Gaussian splatting toolkit"};
    app.require_subcommand(1);

    // init
    auto *init = app.add_subcommand("init", "seed a model from a point cloud or at random");
    ConfigArgs init_cfg;
    init_cfg.add_to(init);
    std::string init_points, init_scene, init_out, init_run;
    std::vector<double> init_bounds;
    init->add_option("--points", init_points, "PLY point cloud");
    init->add_option("--scene", init_scene, "scene directory (uses its points.ply)");
    init->add_option("--bounds", init_bounds, "x0 y0 z0 x1 y1 z1 for random init")->expected(6);
    init->add_option("-o,--out", init_out, "output model file")->required();
    init->add_option("--run-dir", init_run, "write a manifest here");

    // fit-points
    auto *fit = app.add_subcommand("fit-points", "fit factorized coordinates to a point cloud (chamfer)");
    std::string fit_in, fit_out, fit_run;
    int fit_blocks = 30, fit_n = 3, fit_steps = 1000;
    double fit_lr   = 0.01;
    std::uint64_t fit_seed = 0;
    fit->add_option("points", fit_in, "target PLY")->required();
    fit->add_option("--blocks", fit_blocks, "number of blocks")->check(CLI::PositiveNumber);
    fit->add_option("-N,--resolution", fit_n, "block resolution")->check(CLI::PositiveNumber);
    fit->add_option("--steps", fit_steps, "Adam steps")->check(CLI::NonNegativeNumber);
    fit->add_option("--lr", fit_lr, "learning rate")->check(CLI::PositiveNumber);
    fit->add_option("--seed", fit_seed, "random seed");
    fit->add_option("-o,--out", fit_out, "write the expanded points as PLY");
    fit->add_option("--run-dir", fit_run, "write a manifest and loss curve here");

    // train
    auto *tr = app.add_subcommand("train", "train a model on a scene");
    ConfigArgs tr_cfg;
    tr_cfg.add_to(tr);
    std::string tr_scene, tr_model, tr_run = "run";
    tr->add_option("--scene", tr_scene, "scene directory")->required();
    tr->add_option("--model", tr_model, "initial model (default: initialize from the scene)");
    tr->add_option("--run-dir", tr_run, "output directory")->capture_default_str();

    // render
    auto *rd = app.add_subcommand("render", "render a model from a camera");
    std::string rd_model, rd_camera, rd_out;
    std::optional<int> rd_width, rd_height;
    double rd_bg = 0.0;
    rd->add_option("model", rd_model, "model file")->required();
    rd->add_option("--camera", rd_camera, "camera JSON")->required();
    rd->add_option("-o,--out", rd_out, "output PNG")->required();
    rd->add_option("--width", rd_width, "override image width (focal scaled)");
    rd->add_option("--height", rd_height, "override image height (focal scaled)");
    rd->add_option("--background", rd_bg, "background gray level in [0, 1]");

    // evaluate
    auto *ev = app.add_subcommand("evaluate", "PSNR/SSIM/timing on a scene split");
    std::string ev_model, ev_scene, ev_split = "test";
    double ev_bg = 0.0;
    ev->add_option("model", ev_model, "model file")->required();
    ev->add_option("--scene", ev_scene, "scene directory")->required();
    ev->add_option("--split", ev_split, "train or test")->check(CLI::IsMember({"train", "test"}));
    ev->add_option("--background", ev_bg, "background gray level in [0, 1]");

    // prune
    auto *pr = app.add_subcommand("prune", "pack masks and clear near-transparent Gaussians");
    std::string pr_model, pr_out;
    double pr_min_opacity = kDefaultPruneOpacity;
    pr->add_option("model", pr_model, "model file")->required();
    pr->add_option("-o,--out", pr_out, "output model file")->required();
    pr->add_option("--min-opacity", pr_min_opacity, "opacity floor");

    // report
    auto *rp = app.add_subcommand("report", "storage accounting");
    std::string rp_model;
    bool rp_json = false;
    rp->add_option("model", rp_model, "model file")->required();
    rp->add_flag("--json", rp_json, "print JSON");

    // synth-scene
    auto *sy = app.add_subcommand("synth-scene", "write a random dense Gaussian scene");
    SyntheticOptions sy_opt;
    std::string sy_out;
    sy->add_option("-o,--out", sy_out, "output scene directory")->required();
    sy->add_option("--gaussians", sy_opt.gaussians, "Gaussian count")->check(CLI::PositiveNumber);
    sy->add_option("--train-views", sy_opt.train_views, "training views")->check(CLI::PositiveNumber);
    sy->add_option("--test-views", sy_opt.test_views, "test views")->check(CLI::NonNegativeNumber);
    sy->add_option("--width", sy_opt.width, "image width")->check(CLI::PositiveNumber);
    sy->add_option("--height", sy_opt.height, "image height")->check(CLI::PositiveNumber);
    sy->add_option("--seed", sy_opt.seed, "random seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        return kExitBadArgs;
    }

    if (*init) {
        const TrainConfig cfg = init_cfg.resolve();
        std::optional<PointCloud> points;
        if (!init_points.empty()) {
            points = read_ply(init_points);
        } else if (!init_scene.empty()) {
            if (!fs::exists(fs::path(init_scene) / "points.ply")) {
                throw DataError("scene has no points.ply");
            }
            points = read_ply(fs::path(init_scene) / "points.ply");
        }
        Eigen::Vector3d lower = Eigen::Vector3d::Constant(-1.0), upper = Eigen::Vector3d::Constant(1.0);
        if (init_bounds.size() == 6) {
            lower = Eigen::Vector3d(init_bounds[0], init_bounds[1], init_bounds[2]);
            upper = Eigen::Vector3d(init_bounds[3], init_bounds[4], init_bounds[5]);
        } else if (points) {
            lower = points->positions.colwise().minCoeff().transpose();
            upper = points->positions.colwise().maxCoeff().transpose();
        }
        const Model m = initialize_model(cfg, points ? &*points : nullptr, lower, upper);
        save_model(init_out, m);
        if (!init_run.empty()) {
            RunManifest man{"init", arguments(argc, argv), cfg.to_text(), cfg.seed, {}};
            if (!init_points.empty()) {
                man.inputs.push_back(init_points);
            }
            if (!init_scene.empty()) {
                man.inputs.push_back(init_scene);
            }
            write_manifest(init_run, man);
        }
        print_report(storage_report(m), false);
        return 0;
    }

    if (*fit) {
        const PointCloud target = read_ply(fit_in);
        const ChamferFitResult res =
            fit_coordinates_chamfer(target.positions, fit_blocks, fit_n, fit_steps, fit_lr, fit_seed);
        const ExpandedGaussians<double> g =
            expand_multi_set<double>(std::span<const FactorSetCP<double>>(res.blocks));
        std::printf("blocks %d  resolution %d  stored coordinate scalars %d  points %lld\n", fit_blocks, fit_n,
                    3 * fit_n * fit_blocks, static_cast<long long>(g.size()));
        std::printf("chamfer initial %.6g  final %.6g\n", res.loss_curve.front(), res.loss_curve.back());
        if (!fit_out.empty()) {
            PointCloud out;
            out.positions = g.positions;
            write_ply(fit_out, out);
        }
        if (!fit_run.empty()) {
            write_manifest(fit_run, {"fit-points", arguments(argc, argv), "", fit_seed, {fit_in}});
            std::FILE *f = std::fopen((fs::path(fit_run) / "loss.csv").c_str(), "w");
            if (f == nullptr) {
                throw DataError("cannot write loss.csv");
            }
            std::fprintf(f, "step,chamfer\n");
            for (size_t i = 0; i < res.loss_curve.size(); ++i) {
                std::fprintf(f, "%zu,%.17g\n", i, res.loss_curve[i]);
            }
            std::fclose(f);
        }
        return 0;
    }

    if (*tr) {
        const TrainConfig cfg = tr_cfg.resolve();
        const Scene scene     = load_scene(tr_scene, Eigen::Vector3d::Constant(cfg.background));
        Model model;
        if (!tr_model.empty()) {
            model = load_model(tr_model);
        } else {
            Eigen::Vector3d lower = Eigen::Vector3d::Constant(-1.0), upper = Eigen::Vector3d::Constant(1.0);
            if (scene.points) {
                lower = scene.points->positions.colwise().minCoeff().transpose();
                upper = scene.points->positions.colwise().maxCoeff().transpose();
            }
            model = initialize_model(cfg, scene.points ? &*scene.points : nullptr, lower, upper);
        }
        fs::create_directories(tr_run);
        RunManifest man{"train", arguments(argc, argv), cfg.to_text(), cfg.seed, {tr_scene}};
        if (!tr_model.empty()) {
            man.inputs.push_back(tr_model);
        }
        write_manifest(tr_run, man);
        {
            std::FILE *f = std::fopen((fs::path(tr_run) / "config.txt").c_str(), "w");
            if (f == nullptr) {
                throw DataError("cannot write config snapshot");
            }
            std::fputs(cfg.to_text().c_str(), f);
            std::fclose(f);
        }
        TrainHooks hooks;
        hooks.metrics_csv = fs::path(tr_run) / "metrics.csv";
        hooks.checkpoint  = fs::path(tr_run) / "last_good.f3gs";
        hooks.on_log      = [](const MetricsRow &r, const Model &) {
            std::printf("step %lld  loss %.5f  l1 %.5f  dssim %.5f  psnr %.2f", static_cast<long long>(r.step), r.loss,
                        r.l1, r.dssim, r.train_psnr);
            if (!std::isnan(r.test_psnr)) {
                std::printf("  test %.2f", r.test_psnr);
            }
            std::printf("  active %lld\n", static_cast<long long>(r.active_gaussians));
            std::fflush(stdout);
        };
        const TrainResult res = train(std::move(model), scene.train, scene.test, cfg, hooks);
        save_model(fs::path(tr_run) / "model.f3gs", res.model);
        print_report(storage_report(res.model), false);
        return 0;
    }

    if (*rd) {
        const Model model = load_model(rd_model);
        Camera cam        = load_camera_json(rd_camera);
        if (rd_width || rd_height) {
            const int w = rd_width.value_or(cam.width), h = rd_height.value_or(cam.height);
            if (w < 1 || h < 1) {
                throw ShapeError("image size must be positive");
            }
            const double sx = static_cast<double>(w) / cam.width, sy = static_cast<double>(h) / cam.height;
            cam.fx *= sx;
            cam.cx *= sx;
            cam.fy *= sy;
            cam.cy *= sy;
            cam.width  = w;
            cam.height = h;
        }
        RenderSettings settings;
        settings.background = Eigen::Vector3d::Constant(rd_bg);
        const RenderResult<float> res = render(model.materialize(true), cam, settings);
        save_png(rd_out, res.image);
        std::printf("%dx%d  %lld splats  %.2f ms\n", cam.width, cam.height, static_cast<long long>(res.stats.visible),
                    res.stats.total_ms());
        return 0;
    }

    if (*ev) {
        const Model model = load_model(ev_model);
        const Scene scene = load_scene(ev_scene, Eigen::Vector3d::Constant(ev_bg));
        const std::vector<View> &views = ev_split == "train" ? scene.train : scene.test;
        RenderSettings settings;
        settings.background  = Eigen::Vector3d::Constant(ev_bg);
        const EvalResult r   = evaluate(model, views, settings);
        nlohmann::json j{{"psnr", r.psnr},
                         {"ssim", r.ssim},
                         {"render_ms", r.render_ms},
                         {"model_bytes", r.model_bytes},
                         {"gaussian_count", r.gaussian_count},
                         {"views", views.size()}};
        std::cout << j.dump(2) << '\n';
        return 0;
    }

    if (*pr) {
        Model model = load_model(pr_model);
        if (model.masks.empty()) {
            model.add_masks(1.0f);
        }
        model.freeze_masks();
        const ExpandedGaussians<float> g = model.expand_decoded();
        std::int64_t cleared             = 0;
        for (std::int64_t i = 0; i < g.size(); ++i) {
            BlockMask &mk          = model.masks[g.origins[i].block];
            const std::int64_t idx = mask_index(mk, g.origins[i]);
            if (mk.bit(idx) && !(g.opacity[i] >= pr_min_opacity)) {
                mk.set_bit(idx, false);
                ++cleared;
            }
        }
        save_model(pr_out, model);
        const StorageReport r = storage_report(model);
        std::printf("cleared %lld low-opacity Gaussians; %lld of %lld remain active\n", static_cast<long long>(cleared),
                    static_cast<long long>(r.active_gaussians), static_cast<long long>(r.representable_gaussians));
        return 0;
    }

    if (*rp) {
        print_report(storage_report(load_model(rp_model)), rp_json);
        return 0;
    }

    if (*sy) {
        const ExpandedGaussians<float> g = random_dense_gaussians(sy_opt);
        save_scene(sy_out, make_synthetic_scene(g, sy_opt));
        std::printf("wrote %d train and %d test views of %d Gaussians to %s\n", sy_opt.train_views,
                    sy_opt.test_views, sy_opt.gaussians, sy_out.c_str());
        return 0;
    }
    return kExitBadArgs;
}

} // namespace

int main(int argc, char **argv) {
    try {
        return run(argc, argv);
    } catch (const fgs::NumericalError &e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return kExitNumerical;
    } catch (const fgs::DataError &e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kExitData;
    } catch (const std::filesystem::filesystem_error &e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kExitData;
    } catch (const std::invalid_argument &e) {
        std::fprintf(stderr, "bad arguments: %s\n", e.what());
        return kExitBadArgs;
    } catch (const std::exception &e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
