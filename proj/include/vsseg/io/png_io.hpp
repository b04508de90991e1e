#pragma once

#include <png.h>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "vsseg/errors.hpp"
#include "vsseg/tensor.hpp"

// Grayscale PNG input/output on top of libpng. Datasets are directories of
// 8- or 16-bit grayscale frames; plots are written as 8-bit RGB.

namespace vsseg::io {

struct GrayImage {
    std::size_t height = 0;
    std::size_t width = 0;
    int bit_depth = 8;                  // 8 or 16
    std::vector<std::uint16_t> pixels;  // row-major, native values
};

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace detail

inline GrayImage read_gray_png(const std::filesystem::path& path) {
    detail::FilePtr fp(std::fopen(path.string().c_str(), "rb"));
    if (!fp) throw IoError("cannot open " + path.string());

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("failed to decode " + path.string());
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    const int color_type = png_get_color_type(png, info);
    const int bit_depth = png_get_bit_depth(png, info);
    if (color_type != PNG_COLOR_TYPE_GRAY || (bit_depth != 8 && bit_depth != 16)) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError(path.string() + ": expected 8- or 16-bit grayscale PNG");
    }
    if (bit_depth == 16) png_set_swap(png);  // PNG stores 16-bit big-endian

    GrayImage img;
    img.height = png_get_image_height(png, info);
    img.width = png_get_image_width(png, info);
    img.bit_depth = bit_depth;
    img.pixels.resize(img.height * img.width);

    std::vector<std::uint8_t> row(img.width * (bit_depth / 8));
    for (std::size_t y = 0; y < img.height; ++y) {
        png_read_row(png, row.data(), nullptr);
        if (bit_depth == 8) {
            for (std::size_t x = 0; x < img.width; ++x)
                img.pixels[y * img.width + x] = row[x];
        } else {
            const auto* row16 = reinterpret_cast<const std::uint16_t*>(row.data());
            for (std::size_t x = 0; x < img.width; ++x)
                img.pixels[y * img.width + x] = row16[x];
        }
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

inline void write_gray_png(const std::filesystem::path& path, const GrayImage& img) {
    detail::FilePtr fp(std::fopen(path.string().c_str(), "wb"));
    if (!fp) throw IoError("cannot open " + path.string() + " for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("failed to encode " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
                 static_cast<png_uint_32>(img.height), img.bit_depth, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    if (img.bit_depth == 16) png_set_swap(png);

    std::vector<std::uint8_t> row(img.width * (img.bit_depth / 8));
    for (std::size_t y = 0; y < img.height; ++y) {
        if (img.bit_depth == 8) {
            for (std::size_t x = 0; x < img.width; ++x)
                row[x] = static_cast<std::uint8_t>(img.pixels[y * img.width + x] & 0xff);
        } else {
            auto* row16 = reinterpret_cast<std::uint16_t*>(row.data());
            for (std::size_t x = 0; x < img.width; ++x)
                row16[x] = img.pixels[y * img.width + x];
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

inline void write_gray8_png(const std::filesystem::path& path,
                            const TensorT<std::uint8_t>& plane) {
    GrayImage img;
    img.height = plane.dim(0);
    img.width = plane.dim(1);
    img.bit_depth = 8;
    img.pixels.assign(plane.data.begin(), plane.data.end());
    write_gray_png(path, img);
}

// 8-bit RGB writer for plots and overlays. `rgb` is [3, H, W].
inline void write_rgb_png(const std::filesystem::path& path, const TensorT<std::uint8_t>& rgb) {
    detail::FilePtr fp(std::fopen(path.string().c_str(), "wb"));
    if (!fp) throw IoError("cannot open " + path.string() + " for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("failed to encode " + path.string());
    }
    const std::size_t h = rgb.dim(1), w = rgb.dim(2);
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<std::uint8_t> row(w * 3);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            row[3 * x + 0] = rgb.at(0, y, x);
            row[3 * x + 1] = rgb.at(1, y, x);
            row[3 * x + 2] = rgb.at(2, y, x);
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace vsseg::io
