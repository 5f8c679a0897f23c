// Copyright Contributors to the fgs Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <vector>

namespace fgs {

/// Interleaved RGB image, row-major, values nominally in [0, 1].
template <typename T>
struct Image {
    int width  = 0;
    int height = 0;
    std::vector<T> data; // height * width * 3

    Image() = default;
    Image(int w, int h, T value = T(0)) : width(w), height(h), data(static_cast<size_t>(w) * h * 3, value) {}

    size_t pixel_count() const { return static_cast<size_t>(width) * height; }
    T &at(int x, int y, int c) { return data[(static_cast<size_t>(y) * width + x) * 3 + c]; }
    const T &at(int x, int y, int c) const { return data[(static_cast<size_t>(y) * width + x) * 3 + c]; }

    template <typename U>
    Image<U> cast() const {
        Image<U> out;
        out.width  = width;
        out.height = height;
        out.data.assign(data.begin(), data.end());
        return out;
    }
};

/// Reads an 8- or 16-bit PNG. Gray and palette images are expanded to RGB;
/// an alpha channel is composited over `background`. Throws DataError.
Image<float> load_png(const std::filesystem::path &path,
                      const Eigen::Vector3d &background = Eigen::Vector3d::Zero());

/// Writes 8-bit RGB, clamping to [0, 1] and rounding to nearest.
void save_png(const std::filesystem::path &path, const Image<float> &image);

} // namespace fgs
