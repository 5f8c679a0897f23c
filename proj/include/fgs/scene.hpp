// Copyright Contributors to the fgs Project
// SPDX-License-Identifier: Apache-2.0
//
// Scene directories in the NeRF-synthetic layout:
//
//   transforms_train.json, transforms_test.json   camera_angle_x + frames
//   images referenced by each frame's file_path   (".png" appended if absent)
//   points.ply                                    optional initial point cloud
#pragma once

#include "fgs/camera.hpp"
#include "fgs/image.hpp"
#include "fgs/ply.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace fgs {

struct View {
    std::string name;
    Camera camera;
    Image<float> image;
};

struct Scene {
    std::vector<View> train;
    std::vector<View> test;
    std::optional<PointCloud> points;
};

/// Throws DataError for missing files, malformed JSON or images whose size
/// disagrees with the frame's camera.
Scene load_scene(const std::filesystem::path &dir,
                 const Eigen::Vector3d &background = Eigen::Vector3d::Zero());

/// Writes images under images/ and both transforms files.
void save_scene(const std::filesystem::path &dir, const Scene &scene);

/// Single-camera JSON: {"camera_angle_x", "width", "height", "transform_matrix"}
/// with the same pose convention as scene frames.
Camera load_camera_json(const std::filesystem::path &path);
void save_camera_json(const std::filesystem::path &path, const Camera &camera);

} // namespace fgs
