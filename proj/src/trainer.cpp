// Copyright Contributors to the fgs Project
// SPDX-License-Identifier: Apache-2.0
//
#include "fgs/trainer.hpp"

#include "fgs/adam.hpp"
#include "fgs/errors.hpp"
#include "fgs/histogram.hpp"
#include "fgs/losses.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

namespace fgs {

namespace {

using Clock = std::chrono::steady_clock;

template <typename Block>
void collect(Block &b, std::vector<std::span<float>> &out, std::vector<bool> &is_coordinate) {
    b.for_each_array([&](std::string_view, ArrayRole role, auto &a) {
        out.emplace_back(a.data(), static_cast<size_t>(a.size()));
        is_coordinate.push_back(role == ArrayRole::Coordinate);
    });
}

template <typename Block>
void collect_grads(const Block &b, std::vector<std::span<const float>> &out) {
    b.for_each_array([&](std::string_view, ArrayRole, const auto &a) {
        out.emplace_back(a.data(), static_cast<size_t>(a.size()));
    });
}

struct StepOutput {
    MetricsRow row;
    std::vector<std::span<const float>> grads;
    // Storage backing `grads`.
    std::vector<FactorSetCP<float>> cp_grads;
    std::vector<FactorSetVM<float>> vm_grads;
    DecoderParams<float> decoder_grads;
    std::vector<std::vector<float>> mask_grads;
};

StepOutput compute_step(const Model &model, const View &view, const TrainConfig &cfg,
                        const RenderSettings &settings) {
    StepOutput out;
    ExpandedGaussians<float> g =
        model.scheme == Scheme::CP
            ? expand_multi_set<float>(std::span<const FactorSetCP<float>>(model.cp_blocks))
            : expand_multi_set<float>(std::span<const FactorSetVM<float>>(model.vm_blocks), model.vm_mode);
    const DecodeOutput<float> dec = decode(g.features, model.decoder);
    const std::int64_t m          = g.size();

    ExpandedGaussians<float> rg;
    rg.positions = g.positions;
    rg.rotations = g.rotations;
    rg.scales    = g.scales;
    rg.sh        = dec.sh;
    rg.opacity   = dec.opacity;
    const bool masked = !model.masks.empty();
    Vector<float> bits = Vector<float>::Ones(m);
    if (masked) {
        bits = gather_mask_bits<float>(g.origins, model.masks);
        for (std::int64_t i = 0; i < m; ++i) {
            rg.scales.row(i) *= bits[i];
            rg.opacity[i] *= bits[i];
        }
    }

    const RenderResult<float> res  = render(rg, view.camera, settings);
    const PhotometricLoss<float> pl = photometric_loss(res.image, view.image, cfg.lambda_dssim);
    double mask_sum = 0.0;
    for (const BlockMask &mk : model.masks) {
        if (!mk.is_frozen()) {
            mask_sum += mask_loss<float>(mk.values());
        }
    }
    const double loss = static_cast<double>(pl.value) + cfg.lambda_mask * mask_sum;
    out.row.loss      = loss;
    out.row.l1        = pl.l1;
    out.row.dssim     = 1.0 - static_cast<double>(pl.ssim);
    out.row.mask_loss = mask_sum;
    out.row.train_psnr = psnr(res.image, view.image);
    if (!std::isfinite(loss)) {
        throw NumericalError("non-finite training loss " + std::to_string(loss));
    }

    const GaussianGrads<float> gr = render_backward(rg, view.camera, settings, res, pl.gradient);
    RowMatrix<float> dscales      = gr.scales;
    Vector<float> dopacity        = gr.opacity;
    if (masked) {
        out.mask_grads.resize(model.masks.size());
        for (size_t b = 0; b < model.masks.size(); ++b) {
            const BlockMask &mk = model.masks[b];
            if (mk.is_frozen()) {
                continue;
            }
            out.mask_grads[b].assign(static_cast<size_t>(mk.size()), 0.0f);
            mask_loss_gradient<float>(mk.values(), out.mask_grads[b]);
            for (float &v : out.mask_grads[b]) {
                v *= static_cast<float>(cfg.lambda_mask);
            }
        }
        for (std::int64_t i = 0; i < m; ++i) {
            const GaussianOrigin &o = g.origins[i];
            const BlockMask &mk     = model.masks[o.block];
            if (!mk.is_frozen()) {
                const std::int64_t idx = mask_index(mk, o);
                const float through    = gr.scales.row(i).dot(g.scales.row(i)) + gr.opacity[i] * dec.opacity[i];
                out.mask_grads[o.block][idx] += ste_gradient(mk.values()[idx]) * through;
            }
            dscales.row(i) *= bits[i];
            dopacity[i] *= bits[i];
        }
    }

    DecoderGrads<float> dg = decoder_backward(g.features, model.decoder, gr.sh, dopacity);
    ExpansionGrads<float> eg;
    eg.positions = gr.positions;
    eg.scales    = std::move(dscales);
    eg.rotations = gr.rotations;
    eg.features  = std::move(dg.features);
    if (model.scheme == Scheme::CP) {
        out.cp_grads = backprop_multi_set<float>(std::span<const FactorSetCP<float>>(model.cp_blocks), eg);
        for (const auto &b : out.cp_grads) {
            collect_grads(b, out.grads);
        }
    } else {
        out.vm_grads = backprop_multi_set<float>(std::span<const FactorSetVM<float>>(model.vm_blocks),
                                                 model.vm_mode, eg);
        for (const auto &b : out.vm_grads) {
            collect_grads(b, out.grads);
        }
    }
    out.decoder_grads = std::move(dg.params);
    for (const auto &l : out.decoder_grads.layers) {
        out.grads.emplace_back(l.weight.data(), static_cast<size_t>(l.weight.size()));
        out.grads.emplace_back(l.bias.data(), static_cast<size_t>(l.bias.size()));
    }
    for (size_t b = 0; b < out.mask_grads.size(); ++b) {
        if (!model.masks[b].is_frozen()) {
            out.grads.emplace_back(out.mask_grads[b]);
        }
    }
    return out;
}

void write_csv_header(std::ofstream &f) {
    f << "step,loss,l1,dssim,mask_loss,train_psnr,test_psnr,active_gaussians,wall_seconds,coordinate_grad_norm\n";
}

void write_csv_row(std::ofstream &f, const MetricsRow &r) {
    f << r.step << ',' << r.loss << ',' << r.l1 << ',' << r.dssim << ',' << r.mask_loss << ',' << r.train_psnr
      << ',';
    if (!std::isnan(r.test_psnr)) {
        f << r.test_psnr;
    }
    f << ',' << r.active_gaussians << ',' << r.wall_seconds << ',' << r.coordinate_grad_norm << '\n';
    f.flush();
}

std::int64_t active_count(const Model &model) {
    if (model.masks.empty()) {
        return model.representable_gaussians();
    }
    std::int64_t n = 0;
    for (const BlockMask &m : model.masks) {
        n += m.active_count();
    }
    return n;
}

} // namespace

RenderSettings render_settings_for(const TrainConfig &config) {
    RenderSettings s;
    s.background = Eigen::Vector3d::Constant(config.background);
    return s;
}

Model initialize_model(const TrainConfig &cfg, const PointCloud *points, const Eigen::Vector3d &lower,
                       const Eigen::Vector3d &upper) {
    cfg.validate();
    SeedOptions opt;
    opt.lambda      = cfg.init_lambda;
    opt.resolution  = cfg.resolution;
    opt.feature_dim = cfg.feature_dim;
    opt.seed        = cfg.seed;
    std::vector<FactorSetCP<float>> blocks;
    if (cfg.init == InitMode::Histogram) {
        if (points == nullptr || points->positions.rows() == 0) {
            throw DataError("histogram initialization needs a point cloud");
        }
        if (cfg.block_budget > 0) {
            blocks = seed_blocks_for_budget<float>(points->positions, cfg.block_budget, opt);
        } else {
            const HistogramGrid hist = build_histogram(points->positions, cfg.init_interval, 1.2,
                                                       points->colors ? &*points->colors : nullptr);
            blocks = seed_blocks<float>(hist, opt);
        }
    } else {
        if (cfg.block_budget < 1) {
            throw ShapeError("random initialization needs block_budget > 0");
        }
        blocks = random_blocks<float>(lower, upper, cfg.block_budget, opt);
    }
    if (blocks.empty()) {
        throw DataError("initialization produced no blocks; lower init_lambda or init_interval");
    }
    Model m;
    m.scheme      = cfg.scheme;
    m.vm_mode     = cfg.vm_mode;
    m.feature_dim = cfg.feature_dim;
    if (cfg.scheme == Scheme::CP) {
        m.cp_blocks = std::move(blocks);
        const int hidden[] = {cfg.decoder_hidden};
        m.decoder          = DecoderParams<float>::init(cfg.feature_dim, hidden, cfg.seed + 1);
    } else {
        for (const auto &b : blocks) {
            m.vm_blocks.push_back(FactorSetVM<float>::from_cp(b));
        }
        m.decoder = DecoderParams<float>::vm_default(cfg.feature_dim, cfg.decoder_hidden, cfg.seed + 1);
    }
    m.validate();
    return m;
}

TrainResult train(Model model, std::span<const View> train_views, std::span<const View> test_views,
                  const TrainConfig &cfg, const TrainHooks &hooks) {
    cfg.validate();
    model.validate();
    TrainResult result;
    if (cfg.total_steps == 0) {
        result.model = std::move(model);
        return result;
    }
    if (train_views.empty()) {
        throw DataError("no training views");
    }
    if (model.decoder.layers.empty()) {
        throw ShapeError("model has no decoder");
    }
    if (cfg.masks && model.masks.empty()) {
        model.add_masks(static_cast<float>(cfg.mask_init), static_cast<float>(cfg.mask_threshold));
    }
    const RenderSettings settings = render_settings_for(cfg);

    std::vector<std::span<float>> params;
    std::vector<bool> is_coordinate;
    std::vector<double> lr_base;
    if (model.scheme == Scheme::CP) {
        for (auto &b : model.cp_blocks) {
            collect(b, params, is_coordinate);
        }
    } else {
        for (auto &b : model.vm_blocks) {
            collect(b, params, is_coordinate);
        }
    }
    lr_base.assign(params.size(), cfg.lr_factors);
    for (auto &l : model.decoder.layers) {
        params.emplace_back(l.weight.data(), static_cast<size_t>(l.weight.size()));
        params.emplace_back(l.bias.data(), static_cast<size_t>(l.bias.size()));
        is_coordinate.insert(is_coordinate.end(), 2, false);
        lr_base.insert(lr_base.end(), 2, cfg.lr_decoder);
    }
    for (BlockMask &mk : model.masks) {
        if (!mk.is_frozen()) {
            params.push_back(mk.values());
            is_coordinate.push_back(false);
            lr_base.push_back(cfg.lr_mask);
        }
    }
    std::vector<AdamState<float>> states;
    states.reserve(params.size());
    for (const auto &p : params) {
        states.emplace_back(p.size());
    }

    std::ofstream csv;
    if (!hooks.metrics_csv.empty()) {
        csv.open(hooks.metrics_csv);
        if (!csv) {
            throw DataError("cannot write metrics file " + hooks.metrics_csv.string());
        }
        write_csv_header(csv);
    }

    std::mt19937_64 rng(cfg.seed);
    std::vector<size_t> order(train_views.size());
    size_t cursor           = order.size();
    const auto start        = Clock::now();
    const std::int64_t freeze = cfg.freeze_step();

    for (std::int64_t step = 1; step <= cfg.total_steps; ++step) {
        if (cursor == order.size()) {
            std::iota(order.begin(), order.end(), size_t{0});
            std::shuffle(order.begin(), order.end(), rng);
            cursor = 0;
        }
        const View &view = train_views[order[cursor++]];
        StepOutput so;
        try {
            so = compute_step(model, view, cfg, settings);
            for (const auto &g : so.grads) {
                for (const float v : g) {
                    if (!std::isfinite(v)) {
                        throw NumericalError("non-finite gradient at step " + std::to_string(step));
                    }
                }
            }
        } catch (const NumericalError &) {
            if (!hooks.checkpoint.empty()) {
                Model last_good = model;
                last_good.freeze_masks();
                save_model(hooks.checkpoint, last_good);
            }
            throw;
        }
        if (so.grads.size() != params.size()) {
            throw std::logic_error("gradient and parameter lists differ");
        }

        const double progress = static_cast<double>(step - 1) / static_cast<double>(cfg.total_steps);
        const double decay    = cfg.lr_decay ? std::pow(cfg.lr_decay_final, progress) : 1.0;
        double coord_norm2    = 0.0;
        // Coordinates stop at the freeze step: the update of step `freeze`
        // is the last one they receive.
        const bool coords_live = step <= freeze;
        for (size_t p = 0; p < params.size(); ++p) {
            if (is_coordinate[p]) {
                for (const float v : so.grads[p]) {
                    coord_norm2 += static_cast<double>(v) * v;
                }
                if (!coords_live) {
                    continue;
                }
            }
            adam_step<float>(params[p], so.grads[p], states[p], lr_base[p] * decay);
        }

        const bool log_now = step % cfg.log_interval == 0 || step == cfg.total_steps;
        const bool eval_now = !test_views.empty() && (step % cfg.eval_interval == 0 || step == cfg.total_steps);
        if (log_now || eval_now) {
            MetricsRow row           = so.row;
            row.step                 = step;
            row.active_gaussians     = active_count(model);
            row.coordinate_grad_norm = std::sqrt(coord_norm2);
            if (eval_now) {
                row.test_psnr = evaluate(model, test_views, settings).psnr;
            }
            row.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
            if (csv.is_open()) {
                write_csv_row(csv, row);
            }
            if (hooks.on_log) {
                hooks.on_log(row, model);
            }
            result.log.push_back(row);
        }
    }
    model.freeze_masks();
    result.model = std::move(model);
    return result;
}

EvalResult evaluate(const Model &model, std::span<const View> views, const RenderSettings &settings) {
    EvalResult r;
    if (views.empty()) {
        throw DataError("no evaluation views");
    }
    const ExpandedGaussians<float> g = model.materialize(true);
    r.gaussian_count                 = g.size();
    double psnr_sum = 0.0, ssim_sum = 0.0, ms = 0.0;
    for (const View &v : views) {
        if (v.image.width != v.camera.width || v.image.height != v.camera.height) {
            throw ShapeError("evaluation image " + v.name + " does not match its camera resolution");
        }
        const auto t0                  = Clock::now();
        const RenderResult<float> res  = render(g, v.camera, settings);
        ms += std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
        psnr_sum += psnr(res.image, v.image);
        ssim_sum += static_cast<double>(ssim(res.image, v.image));
    }
    const double n = static_cast<double>(views.size());
    r.psnr         = psnr_sum / n;
    r.ssim         = ssim_sum / n;
    r.render_ms    = ms / n;
    r.model_bytes  = storage_report(model).bytes_on_disk;
    return r;
}

} // namespace fgs
