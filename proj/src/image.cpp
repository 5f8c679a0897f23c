// Copyright Contributors to the fgs Project
// SPDX-License-Identifier: Apache-2.0
//
#include "fgs/image.hpp"

#include "fgs/errors.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

namespace fgs {

namespace {

struct FileCloser {
    void operator()(std::FILE *f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

} // namespace

Image<float> load_png(const std::filesystem::path &path, const Eigen::Vector3d &background) {
    FilePtr file(std::fopen(path.c_str(), "rb"));
    if (!file) {
        throw DataError("cannot open image " + path.string());
    }
    png_byte sig[8];
    if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
        throw DataError("not a PNG file: " + path.string());
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info  = png ? png_create_info_struct(png) : nullptr;
    if (png == nullptr || info == nullptr) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("libpng initialization failed");
    }
    Image<float> out;
    std::vector<png_byte> buffer;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("corrupt PNG file: " + path.string());
    }
    png_init_io(png, file.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    const int color_type = png_get_color_type(png, info);
    if (color_type == PNG_COLOR_TYPE_PALETTE) {
        png_set_palette_to_rgb(png);
    }
    if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) {
        png_set_gray_to_rgb(png);
    }
    if (png_get_bit_depth(png, info) < 8) {
        png_set_packing(png);
        if (color_type == PNG_COLOR_TYPE_GRAY) {
            png_set_expand_gray_1_2_4_to_8(png);
        }
    }
    if (png_get_valid(png, info, PNG_INFO_tRNS)) {
        png_set_tRNS_to_alpha(png);
    }
    png_set_strip_16(png);
    png_read_update_info(png, info);

    const int w        = static_cast<int>(png_get_image_width(png, info));
    const int h        = static_cast<int>(png_get_image_height(png, info));
    const int channels = png_get_channels(png, info);
    const size_t pitch = png_get_rowbytes(png, info);
    buffer.resize(pitch * h);
    rows.resize(h);
    for (int y = 0; y < h; ++y) {
        rows[y] = buffer.data() + pitch * y;
    }
    png_read_image(png, rows.data());
    png_destroy_read_struct(&png, &info, nullptr);

    out = Image<float>(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const png_byte *px = rows[y] + static_cast<size_t>(x) * channels;
            const float alpha  = channels == 4 ? px[3] / 255.0f : 1.0f;
            for (int c = 0; c < 3; ++c) {
                out.at(x, y, c) = px[c] / 255.0f * alpha + static_cast<float>(background[c]) * (1.0f - alpha);
            }
        }
    }
    return out;
}

void save_png(const std::filesystem::path &path, const Image<float> &image) {
    if (image.width < 1 || image.height < 1 || image.data.size() != image.pixel_count() * 3) {
        throw ShapeError("cannot save an empty or malformed image");
    }
    FilePtr file(std::fopen(path.c_str(), "wb"));
    if (!file) {
        throw DataError("cannot write image " + path.string());
    }
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info  = png ? png_create_info_struct(png) : nullptr;
    if (png == nullptr || info == nullptr) {
        png_destroy_write_struct(&png, &info);
        throw DataError("libpng initialization failed");
    }
    std::vector<png_byte> row(static_cast<size_t>(image.width) * 3);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw DataError("failed writing PNG " + path.string());
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, image.width, image.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width * 3; ++x) {
            const float v = image.data[static_cast<size_t>(y) * image.width * 3 + x];
            row[x]        = static_cast<png_byte>(std::lround(std::clamp(std::isfinite(v) ? v : 0.0f, 0.0f, 1.0f) * 255.0f));
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

} // namespace fgs
