// Copyright Contributors to the fgs Project
// SPDX-License-Identifier: Apache-2.0
//
#include "fgs/camera.hpp"

#include "fgs/errors.hpp"

#include <Eigen/Geometry>

#include <cmath>

namespace fgs {

void Camera::validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) {
        throw ShapeError("camera focal lengths must be positive");
    }
    if (width < 1 || height < 1) {
        throw ShapeError("camera image size must be positive");
    }
    if (!((rotation * rotation.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <= 1e-6)) {
        throw ShapeError("camera rotation is not orthonormal");
    }
    if (!translation.allFinite() || !(near_plane > 0.0)) {
        throw ShapeError("camera translation must be finite and the near plane positive");
    }
}

Camera Camera::look_at(const Eigen::Vector3d &eye, const Eigen::Vector3d &target,
                       const Eigen::Vector3d &up, double fov_x, int width, int height) {
    const Eigen::Vector3d forward = (target - eye).normalized();
    const Eigen::Vector3d right   = forward.cross(up).normalized();
    const Eigen::Vector3d down    = forward.cross(right);
    Camera cam;
    cam.rotation.row(0) = right.transpose();
    cam.rotation.row(1) = down.transpose();
    cam.rotation.row(2) = forward.transpose();
    cam.translation     = -cam.rotation * eye;
    cam.width           = width;
    cam.height          = height;
    cam.fx = cam.fy = 0.5 * width / std::tan(0.5 * fov_x);
    cam.cx          = 0.5 * width;
    cam.cy          = 0.5 * height;
    return cam;
}

Camera Camera::from_nerf(const Eigen::Matrix4d &c2w, double camera_angle_x, int width, int height) {
    Eigen::Matrix3d r_c2w = c2w.topLeftCorner<3, 3>();
    r_c2w.col(1) *= -1.0;
    r_c2w.col(2) *= -1.0;
    Camera cam;
    cam.rotation    = r_c2w.transpose();
    cam.translation = -cam.rotation * c2w.topRightCorner<3, 1>();
    cam.width       = width;
    cam.height      = height;
    cam.fx = cam.fy = 0.5 * width / std::tan(0.5 * camera_angle_x);
    cam.cx          = 0.5 * width;
    cam.cy          = 0.5 * height;
    return cam;
}

Eigen::Matrix4d Camera::nerf_camera_to_world() const {
    Eigen::Matrix4d c2w          = Eigen::Matrix4d::Identity();
    Eigen::Matrix3d r_c2w        = rotation.transpose();
    r_c2w.col(1) *= -1.0;
    r_c2w.col(2) *= -1.0;
    c2w.topLeftCorner<3, 3>()    = r_c2w;
    c2w.topRightCorner<3, 1>()   = center();
    return c2w;
}

double Camera::fov_x() const { return 2.0 * std::atan(0.5 * width / fx); }

} // namespace fgs
