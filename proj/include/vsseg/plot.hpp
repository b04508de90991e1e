#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "vsseg/core.hpp"
#include "vsseg/io/png_io.hpp"

// Static rendering of metric curves and segmentation overlays to PNG.

namespace vsseg::plot {

using Rgb = TensorT<std::uint8_t>;  // [3, H, W]

inline Rgb blank_canvas(std::size_t h, std::size_t w, std::uint8_t value = 255) {
    return Rgb({3, h, w}, value);
}

inline void put_pixel(Rgb& img, long y, long x, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    if (y < 0 || x < 0 || y >= static_cast<long>(img.dim(1)) || x >= static_cast<long>(img.dim(2)))
        return;
    img.at(0, y, x) = r;
    img.at(1, y, x) = g;
    img.at(2, y, x) = b;
}

inline void draw_line(Rgb& img, double y0, double x0, double y1, double x1, std::uint8_t r,
                      std::uint8_t g, std::uint8_t b) {
    const double steps = std::max(std::abs(y1 - y0), std::abs(x1 - x0)) * 2 + 1;
    for (double s = 0; s <= steps; ++s) {
        const double t = s / steps;
        put_pixel(img, std::lround(y0 + t * (y1 - y0)), std::lround(x0 + t * (x1 - x0)), r, g, b);
    }
}

// Polyline chart of one or more named series over epochs; y-range [0, max].
inline Rgb render_curves(const std::vector<std::pair<std::string, std::vector<double>>>& series,
                         std::size_t h = 240, std::size_t w = 360) {
    Rgb img = blank_canvas(h, w);
    const long margin = 24;
    const long plot_h = static_cast<long>(h) - 2 * margin;
    const long plot_w = static_cast<long>(w) - 2 * margin;
    // axes
    draw_line(img, margin, margin, h - margin, margin, 0, 0, 0);
    draw_line(img, h - margin, margin, h - margin, w - margin, 0, 0, 0);

    double y_max = 1e-9;
    std::size_t n = 0;
    for (const auto& [name, values] : series) {
        for (double v : values) y_max = std::max(y_max, v);
        n = std::max(n, values.size());
    }
    if (n < 2) return img;

    const std::uint8_t palette[4][3] = {{200, 40, 40}, {40, 90, 200}, {30, 140, 60}, {150, 60, 160}};
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& values = series[k].second;
        const auto* color = palette[k % 4];
        for (std::size_t i = 1; i < values.size(); ++i) {
            const double x0 = margin + plot_w * static_cast<double>(i - 1) / (n - 1);
            const double x1 = margin + plot_w * static_cast<double>(i) / (n - 1);
            const double y0 = h - margin - plot_h * (values[i - 1] / y_max);
            const double y1 = h - margin - plot_h * (values[i] / y_max);
            draw_line(img, y0, x0, y1, x1, color[0], color[1], color[2]);
        }
    }
    return img;
}

// Segmentation overlay on the temporal-minimum projection: white = true
// positive, green = false positive, red = false negative, gray = background.
inline Rgb render_overlay(const DsaSequence& seq, const VesselMask& pred, const VesselMask& gt) {
    const std::size_t h = seq.height(), w = seq.width(), f = seq.num_frames();
    float lo = seq.frames[0], hi = seq.frames[0];
    for (float v : seq.frames.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const float span = hi - lo < 1e-6f ? 1.0f : hi - lo;

    Rgb img = blank_canvas(h, w, 0);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            float mn = seq.frames.at(0, y, x);
            for (std::size_t t = 1; t < f; ++t) mn = std::min(mn, seq.frames.at(t, y, x));
            const auto gray = static_cast<std::uint8_t>(255.0f * (mn - lo) / span);
            const bool p = pred.pixels.at(y, x) != 0;
            const bool g = gt.pixels.at(y, x) != 0;
            if (p && g) put_pixel(img, y, x, 255, 255, 255);
            else if (p && !g) put_pixel(img, y, x, 40, 200, 60);
            else if (!p && g) put_pixel(img, y, x, 220, 40, 40);
            else put_pixel(img, y, x, gray, gray, gray);
        }
    return img;
}

}  // namespace vsseg::plot
