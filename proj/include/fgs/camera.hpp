// Copyright Contributors to the fgs Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <Eigen/Core>

namespace fgs {

/// Pinhole camera, OpenCV axes (x right, y down, z forward). Pixel (u, v)
/// has its center at (u + 0.5, v + 0.5).
struct Camera {
    Eigen::Matrix3d rotation    = Eigen::Matrix3d::Identity(); // world -> camera
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();
    double fx = 1.0, fy = 1.0;
    double cx = 0.0, cy = 0.0;
    int width = 1, height = 1;
    double near_plane = 0.01;

    Eigen::Vector3d center() const { return -rotation.transpose() * translation; }

    /// Throws ShapeError unless fx, fy > 0, the size is positive and the
    /// rotation is orthonormal within 1e-6.
    void validate() const;

    /// Camera at `eye` looking at `target`; `fov_x` in radians.
    static Camera look_at(const Eigen::Vector3d &eye, const Eigen::Vector3d &target,
                          const Eigen::Vector3d &up, double fov_x, int width, int height);

    /// NeRF-synthetic convention: camera-to-world with OpenGL axes
    /// (y up, z backward) and focal length from the horizontal field of view.
    static Camera from_nerf(const Eigen::Matrix4d &camera_to_world, double camera_angle_x, int width,
                            int height);

    /// Inverse of from_nerf's pose conversion.
    Eigen::Matrix4d nerf_camera_to_world() const;

    double fov_x() const;
};

} // namespace fgs
