// Copyright Contributors to the fgs Project
// SPDX-License-Identifier: Apache-2.0
//
#include "fgs/config.hpp"

#include "fgs/errors.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace fgs {

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename N>
N parse_number(std::string_view key, std::string_view v) {
    N out{};
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
        throw ShapeError("config key '" + std::string(key) + "': cannot parse '" + std::string(v) + "'");
    }
    return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
    if (v == "true" || v == "1" || v == "on" || v == "yes") {
        return true;
    }
    if (v == "false" || v == "0" || v == "off" || v == "no") {
        return false;
    }
    throw ShapeError("config key '" + std::string(key) + "': expected a boolean, got '" + std::string(v) + "'");
}

} // namespace

void TrainConfig::validate() const {
    auto fail = [](const std::string &msg) { throw ShapeError("invalid config: " + msg); };
    if (total_steps < 0) {
        fail("total_steps must be >= 0");
    }
    if (coordinate_freeze_step > total_steps) {
        fail("coordinate_freeze_step must not exceed total_steps");
    }
    if (!(lr_factors > 0.0) || !(lr_decoder > 0.0) || !(lr_mask > 0.0)) {
        fail("learning rates must be > 0");
    }
    if (!(lr_decay_final > 0.0 && lr_decay_final <= 1.0)) {
        fail("lr_decay_final must lie in (0, 1]");
    }
    if (!(lambda_dssim >= 0.0 && lambda_dssim <= 1.0)) {
        fail("lambda_dssim must lie in [0, 1]");
    }
    if (!(lambda_mask >= 0.0)) {
        fail("lambda_mask must be >= 0");
    }
    if (resolution < 1 || feature_dim < 1 || decoder_hidden < 1) {
        fail("resolution, feature_dim and decoder_hidden must be >= 1");
    }
    if (!(init_interval > 0.0) || !(init_lambda >= 0.0) || block_budget < 0) {
        fail("init_interval must be > 0, init_lambda >= 0, block_budget >= 0");
    }
    if (log_interval < 1 || eval_interval < 1) {
        fail("log_interval and eval_interval must be >= 1");
    }
    if (!(background >= 0.0 && background <= 1.0)) {
        fail("background must lie in [0, 1]");
    }
}

void TrainConfig::set(std::string_view key, std::string_view raw) {
    const std::string_view v = trim(raw);
    if (key == "total_steps") {
        total_steps = parse_number<std::int64_t>(key, v);
    } else if (key == "coordinate_freeze_step") {
        coordinate_freeze_step = parse_number<std::int64_t>(key, v);
    } else if (key == "lr_factors") {
        lr_factors = parse_number<double>(key, v);
    } else if (key == "lr_decoder") {
        lr_decoder = parse_number<double>(key, v);
    } else if (key == "lr_mask") {
        lr_mask = parse_number<double>(key, v);
    } else if (key == "lr_decay") {
        lr_decay = parse_bool(key, v);
    } else if (key == "lr_decay_final") {
        lr_decay_final = parse_number<double>(key, v);
    } else if (key == "lambda_dssim") {
        lambda_dssim = parse_number<double>(key, v);
    } else if (key == "lambda_mask") {
        lambda_mask = parse_number<double>(key, v);
    } else if (key == "resolution") {
        resolution = parse_number<int>(key, v);
    } else if (key == "feature_dim") {
        feature_dim = parse_number<int>(key, v);
    } else if (key == "scheme") {
        if (v == "CP" || v == "cp") {
            scheme = Scheme::CP;
        } else if (v == "VM" || v == "vm") {
            scheme = Scheme::VM;
        } else {
            throw ShapeError("config key 'scheme': expected CP or VM");
        }
    } else if (key == "vm_mode") {
        if (v == "per_term") {
            vm_mode = VmMode::PerTermProduct;
        } else if (v == "shared_sum") {
            vm_mode = VmMode::SharedGridSum;
        } else {
            throw ShapeError("config key 'vm_mode': expected per_term or shared_sum");
        }
    } else if (key == "decoder_hidden") {
        decoder_hidden = parse_number<int>(key, v);
    } else if (key == "seed") {
        seed = parse_number<std::uint64_t>(key, v);
    } else if (key == "masks") {
        masks = parse_bool(key, v);
    } else if (key == "mask_init") {
        mask_init = parse_number<double>(key, v);
    } else if (key == "mask_threshold") {
        mask_threshold = parse_number<double>(key, v);
    } else if (key == "init") {
        if (v == "histogram") {
            init = InitMode::Histogram;
        } else if (v == "random") {
            init = InitMode::Random;
        } else {
            throw ShapeError("config key 'init': expected histogram or random");
        }
    } else if (key == "init_interval") {
        init_interval = parse_number<double>(key, v);
    } else if (key == "init_lambda") {
        init_lambda = parse_number<double>(key, v);
    } else if (key == "block_budget") {
        block_budget = parse_number<int>(key, v);
    } else if (key == "log_interval") {
        log_interval = parse_number<std::int64_t>(key, v);
    } else if (key == "eval_interval") {
        eval_interval = parse_number<std::int64_t>(key, v);
    } else if (key == "background") {
        background = parse_number<double>(key, v);
    } else {
        throw ShapeError("unknown config key '" + std::string(key) + "'");
    }
}

std::string TrainConfig::to_text() const {
    std::ostringstream o;
    o.precision(17);
    o << "total_steps = " << total_steps << '\n'
      << "coordinate_freeze_step = " << coordinate_freeze_step << '\n'
      << "lr_factors = " << lr_factors << '\n'
      << "lr_decoder = " << lr_decoder << '\n'
      << "lr_mask = " << lr_mask << '\n'
      << "lr_decay = " << (lr_decay ? "true" : "false") << '\n'
      << "lr_decay_final = " << lr_decay_final << '\n'
      << "lambda_dssim = " << lambda_dssim << '\n'
      << "lambda_mask = " << lambda_mask << '\n'
      << "resolution = " << resolution << '\n'
      << "feature_dim = " << feature_dim << '\n'
      << "scheme = " << (scheme == Scheme::CP ? "CP" : "VM") << '\n'
      << "vm_mode = " << (vm_mode == VmMode::PerTermProduct ? "per_term" : "shared_sum") << '\n'
      << "decoder_hidden = " << decoder_hidden << '\n'
      << "seed = " << seed << '\n'
      << "masks = " << (masks ? "true" : "false") << '\n'
      << "mask_init = " << mask_init << '\n'
      << "mask_threshold = " << mask_threshold << '\n'
      << "init = " << (init == InitMode::Histogram ? "histogram" : "random") << '\n'
      << "init_interval = " << init_interval << '\n'
      << "init_lambda = " << init_lambda << '\n'
      << "block_budget = " << block_budget << '\n'
      << "log_interval = " << log_interval << '\n'
      << "eval_interval = " << eval_interval << '\n'
      << "background = " << background << '\n';
    return o.str();
}

TrainConfig parse_config(std::string_view text, TrainConfig base) {
    int line_no = 0;
    while (!text.empty()) {
        ++line_no;
        const auto nl         = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text                  = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (const auto hash = line.find('#'); hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ShapeError("config line " + std::to_string(line_no) + ": expected key = value");
        }
        base.set(trim(line.substr(0, eq)), line.substr(eq + 1));
    }
    base.validate();
    return base;
}

TrainConfig load_config(const std::filesystem::path &path, TrainConfig base) {
    std::ifstream f(path);
    if (!f) {
        throw DataError("cannot open config file " + path.string());
    }
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str(), base);
}

} // namespace fgs
