// Copyright Contributors to the fgs Project
// SPDX-License-Identifier: Apache-2.0
//
#include "fgs/scene.hpp"

#include "fgs/errors.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>

namespace fgs {

namespace {

using nlohmann::json;

json read_json(const std::filesystem::path &path) {
    std::ifstream f(path);
    if (!f) {
        throw DataError("cannot open " + path.string());
    }
    try {
        return json::parse(f);
    } catch (const json::exception &e) {
        throw DataError("malformed JSON in " + path.string() + ": " + e.what());
    }
}

void write_json(const std::filesystem::path &path, const json &j) {
    std::ofstream f(path);
    if (!f) {
        throw DataError("cannot write " + path.string());
    }
    f << j.dump(2) << '\n';
}

Eigen::Matrix4d matrix_from_json(const json &j) {
    if (!j.is_array() || j.size() < 3) {
        throw DataError("transform_matrix must be a 4x4 (or 3x4) array");
    }
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    for (size_t r = 0; r < j.size() && r < 4; ++r) {
        if (!j[r].is_array() || j[r].size() != 4) {
            throw DataError("transform_matrix rows must have 4 entries");
        }
        for (size_t c = 0; c < 4; ++c) {
            m(r, c) = j[r][c].get<double>();
        }
    }
    if (!m.allFinite()) {
        throw DataError("transform_matrix contains non-finite values");
    }
    return m;
}

json matrix_to_json(const Eigen::Matrix4d &m) {
    json out = json::array();
    for (int r = 0; r < 4; ++r) {
        out.push_back({m(r, 0), m(r, 1), m(r, 2), m(r, 3)});
    }
    return out;
}

std::vector<View> load_split(const std::filesystem::path &dir, const std::string &file,
                             const Eigen::Vector3d &background) {
    const std::filesystem::path path = dir / file;
    const json j                     = read_json(path);
    std::vector<View> views;
    try {
        const double angle = j.at("camera_angle_x").get<double>();
        for (const json &frame : j.at("frames")) {
            View v;
            v.name                   = frame.at("file_path").get<std::string>();
            std::filesystem::path im = dir / v.name;
            if (!im.has_extension()) {
                im += ".png";
            }
            v.image  = load_png(im, background);
            v.camera = Camera::from_nerf(matrix_from_json(frame.at("transform_matrix")), angle, v.image.width,
                                         v.image.height);
            if (frame.contains("fl_x")) {
                v.camera.fx = frame.at("fl_x").get<double>();
                v.camera.fy = frame.value("fl_y", v.camera.fx);
            }
            v.camera.validate();
            views.push_back(std::move(v));
        }
    } catch (const json::exception &e) {
        throw DataError("malformed " + path.string() + ": " + e.what());
    } catch (const ShapeError &e) {
        throw DataError("bad camera in " + path.string() + ": " + e.what());
    }
    return views;
}

void save_split(const std::filesystem::path &dir, const std::string &file, const std::string &prefix,
                const std::vector<View> &views) {
    json frames = json::array();
    double angle = views.empty() ? 0.6911112070083618 : views.front().camera.fov_x();
    for (size_t i = 0; i < views.size(); ++i) {
        char name[64];
        std::snprintf(name, sizeof(name), "images/%s_%03zu", prefix.c_str(), i);
        save_png(dir / (std::string(name) + ".png"), views[i].image);
        frames.push_back({{"file_path", name},
                          {"transform_matrix", matrix_to_json(views[i].camera.nerf_camera_to_world())}});
    }
    write_json(dir / file, {{"camera_angle_x", angle}, {"frames", frames}});
}

} // namespace

Scene load_scene(const std::filesystem::path &dir, const Eigen::Vector3d &background) {
    if (!std::filesystem::is_directory(dir)) {
        throw DataError("scene directory not found: " + dir.string());
    }
    Scene s;
    s.train = load_split(dir, "transforms_train.json", background);
    if (std::filesystem::exists(dir / "transforms_test.json")) {
        s.test = load_split(dir, "transforms_test.json", background);
    }
    if (s.train.empty()) {
        throw DataError("scene has no training views");
    }
    if (std::filesystem::exists(dir / "points.ply")) {
        s.points = read_ply(dir / "points.ply");
    }
    return s;
}

void save_scene(const std::filesystem::path &dir, const Scene &scene) {
    std::filesystem::create_directories(dir / "images");
    save_split(dir, "transforms_train.json", "train", scene.train);
    save_split(dir, "transforms_test.json", "test", scene.test);
    if (scene.points) {
        write_ply(dir / "points.ply", *scene.points);
    }
}

Camera load_camera_json(const std::filesystem::path &path) {
    const json j = read_json(path);
    try {
        Camera cam = Camera::from_nerf(matrix_from_json(j.at("transform_matrix")), j.at("camera_angle_x").get<double>(),
                                       j.at("width").get<int>(), j.at("height").get<int>());
        cam.validate();
        return cam;
    } catch (const json::exception &e) {
        throw DataError("malformed camera file " + path.string() + ": " + e.what());
    } catch (const ShapeError &e) {
        throw DataError("bad camera in " + path.string() + ": " + e.what());
    }
}

void save_camera_json(const std::filesystem::path &path, const Camera &camera) {
    write_json(path, {{"camera_angle_x", camera.fov_x()},
                      {"width", camera.width},
                      {"height", camera.height},
                      {"transform_matrix", matrix_to_json(camera.nerf_camera_to_world())}});
}

} // namespace fgs
