#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "vsseg/core.hpp"
#include "vsseg/rng.hpp"

// Weak/strong augmentation pipelines and the random patch sampler shared by
// every trainer. All transforms are pure functions of (input, rng draws) and
// bit-reproducible for a fixed seed.

namespace vsseg::augment {

struct PatchSample {
    Tensor seq_patch;                   // [F, h, w]
    TensorT<std::uint8_t> label_patch;  // [h, w]; VesselMask or ScribbleMask values
    enum class Source { labeled, pseudo_labeled } source = Source::labeled;
};

struct WeakConfig {
    double hflip_prob = 0.5;
    double vflip_prob = 0.5;
    bool rot90 = true;
};

struct StrongConfig {
    double prob = 0.5;  // independent fire probability per transform
    int cutout_min = 8;
    int cutout_max = 24;
    double noise_sigma = 0.1;
    double blur_sigma_min = 0.5;
    double blur_sigma_max = 1.5;
    double elastic_alpha = 20.0;
    double elastic_sigma = 4.0;
    double contrast_min = 0.7;
    double contrast_max = 1.4;
    bool enable_cutout = true;
    bool enable_elastic = true;
};

// ---------------------------------------------------------------------------
// Patch sampling
// ---------------------------------------------------------------------------

inline PatchSample sample_patch(const DsaSequence& seq, const TensorT<std::uint8_t>& label,
                                std::size_t patch, Rng& rng,
                                PatchSample::Source source = PatchSample::Source::labeled) {
    const std::size_t h = seq.height(), w = seq.width(), f = seq.num_frames();
    if (patch > h || patch > w)
        throw PatchTooLarge("patch " + std::to_string(patch) + " on " + std::to_string(h) + "x" +
                            std::to_string(w));
    if (label.dim(0) != h || label.dim(1) != w) throw ShapeMismatch("sample_patch label");

    const auto y0 = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(h - patch)));
    const auto x0 = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(w - patch)));

    PatchSample out;
    out.source = source;
    out.seq_patch = Tensor({f, patch, patch});
    out.label_patch = TensorT<std::uint8_t>({patch, patch});
    for (std::size_t t = 0; t < f; ++t)
        for (std::size_t y = 0; y < patch; ++y) {
            const float* src = seq.frames.ptr() + (t * h + y0 + y) * w + x0;
            std::copy_n(src, patch, out.seq_patch.ptr() + (t * patch + y) * patch);
        }
    for (std::size_t y = 0; y < patch; ++y)
        std::copy_n(label.ptr() + (y0 + y) * w + x0, patch, out.label_patch.ptr() + y * patch);
    return out;
}

// ---------------------------------------------------------------------------
// Plane transforms (square planes)
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
void hflip_plane(T* p, std::size_t n) {
    for (std::size_t y = 0; y < n; ++y)
        for (std::size_t x = 0; x < n / 2; ++x) std::swap(p[y * n + x], p[y * n + (n - 1 - x)]);
}

template <typename T>
void vflip_plane(T* p, std::size_t n) {
    for (std::size_t y = 0; y < n / 2; ++y)
        for (std::size_t x = 0; x < n; ++x) std::swap(p[y * n + x], p[(n - 1 - y) * n + x]);
}

// Counter-clockwise quarter turns.
template <typename T>
void rot90_plane(T* p, std::size_t n, int quarter_turns) {
    quarter_turns &= 3;
    if (!quarter_turns) return;
    std::vector<T> tmp(p, p + n * n);
    for (std::size_t y = 0; y < n; ++y)
        for (std::size_t x = 0; x < n; ++x) {
            std::size_t sy = y, sx = x;
            switch (quarter_turns) {
                case 1: sy = x, sx = n - 1 - y; break;
                case 2: sy = n - 1 - y, sx = n - 1 - x; break;
                case 3: sy = n - 1 - x, sx = y; break;
            }
            p[y * n + x] = tmp[sy * n + sx];
        }
}

inline std::vector<float> gaussian_kernel(double sigma) {
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<float> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
        k[i + radius] = static_cast<float>(v);
        sum += v;
    }
    for (auto& v : k) v = static_cast<float>(v / sum);
    return k;
}

// Separable gaussian blur with replicated borders.
inline void blur_plane(float* p, std::size_t n, const std::vector<float>& kernel) {
    const int radius = static_cast<int>(kernel.size() / 2);
    std::vector<float> tmp(n * n);
    for (std::size_t y = 0; y < n; ++y)
        for (std::size_t x = 0; x < n; ++x) {
            float acc = 0.f;
            for (int i = -radius; i <= radius; ++i) {
                const auto xi = static_cast<std::size_t>(
                    std::clamp<long>(static_cast<long>(x) + i, 0, static_cast<long>(n) - 1));
                acc += kernel[i + radius] * p[y * n + xi];
            }
            tmp[y * n + x] = acc;
        }
    for (std::size_t y = 0; y < n; ++y)
        for (std::size_t x = 0; x < n; ++x) {
            float acc = 0.f;
            for (int i = -radius; i <= radius; ++i) {
                const auto yi = static_cast<std::size_t>(
                    std::clamp<long>(static_cast<long>(y) + i, 0, static_cast<long>(n) - 1));
                acc += kernel[i + radius] * tmp[yi * n + x];
            }
            p[y * n + x] = acc;
        }
}

inline float bilinear_at(const float* p, std::size_t n, double y, double x) {
    y = std::clamp(y, 0.0, static_cast<double>(n - 1));
    x = std::clamp(x, 0.0, static_cast<double>(n - 1));
    const auto y0 = static_cast<std::size_t>(y);
    const auto x0 = static_cast<std::size_t>(x);
    const std::size_t y1 = std::min(y0 + 1, n - 1);
    const std::size_t x1 = std::min(x0 + 1, n - 1);
    const double fy = y - static_cast<double>(y0);
    const double fx = x - static_cast<double>(x0);
    const double top = p[y0 * n + x0] * (1 - fx) + p[y0 * n + x1] * fx;
    const double bot = p[y1 * n + x0] * (1 - fx) + p[y1 * n + x1] * fx;
    return static_cast<float>(top * (1 - fy) + bot * fy);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Weak augmentation: flips and quarter rotations, identical on every frame
// and the label.
// ---------------------------------------------------------------------------

inline PatchSample weak_augment(PatchSample p, const WeakConfig& cfg, Rng& rng) {
    const std::size_t n = p.label_patch.dim(0);
    const std::size_t f = p.seq_patch.dim(0);
    const bool hflip = rng.coin(cfg.hflip_prob);
    const bool vflip = rng.coin(cfg.vflip_prob);
    const int quarter_turns = cfg.rot90 ? static_cast<int>(rng.uniform_int(0, 3)) : 0;

    for (std::size_t t = 0; t < f; ++t) {
        float* plane = p.seq_patch.ptr() + t * n * n;
        if (hflip) detail::hflip_plane(plane, n);
        if (vflip) detail::vflip_plane(plane, n);
        detail::rot90_plane(plane, n, quarter_turns);
    }
    if (hflip) detail::hflip_plane(p.label_patch.ptr(), n);
    if (vflip) detail::vflip_plane(p.label_patch.ptr(), n);
    detail::rot90_plane(p.label_patch.ptr(), n, quarter_turns);
    return p;
}

// ---------------------------------------------------------------------------
// Strong augmentation. Applied in order: cutout, noise, blur, elastic,
// per-frame contrast. Only the elastic deformation is geometric and moves
// the label (nearest-neighbor); everything else touches frames alone.
// ---------------------------------------------------------------------------

inline PatchSample strong_augment(PatchSample p, const StrongConfig& cfg, Rng& rng) {
    const std::size_t n = p.label_patch.dim(0);
    const std::size_t f = p.seq_patch.dim(0);

    if (cfg.enable_cutout && rng.coin(cfg.prob)) {  // cutout
        const auto side = static_cast<std::size_t>(
            std::min<std::int64_t>(rng.uniform_int(cfg.cutout_min, cfg.cutout_max),
                                   static_cast<std::int64_t>(n)));
        const auto cy = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n - side)));
        const auto cx = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n - side)));
        for (std::size_t t = 0; t < f; ++t)
            for (std::size_t y = cy; y < cy + side; ++y)
                std::fill_n(p.seq_patch.ptr() + (t * n + y) * n + cx, side, 0.f);
    }

    if (rng.coin(cfg.prob)) {  // white gaussian noise
        for (auto& v : p.seq_patch.data) v += static_cast<float>(rng.normal(0.0, cfg.noise_sigma));
    }

    if (rng.coin(cfg.prob)) {  // gaussian blur
        const double sigma = rng.uniform(cfg.blur_sigma_min, cfg.blur_sigma_max);
        const auto kernel = detail::gaussian_kernel(sigma);
        for (std::size_t t = 0; t < f; ++t) detail::blur_plane(p.seq_patch.ptr() + t * n * n, n, kernel);
    }

    if (cfg.enable_elastic && rng.coin(cfg.prob)) {  // elastic deformation
        std::vector<float> dy(n * n), dx(n * n);
        for (auto& v : dy) v = static_cast<float>(rng.uniform(-1.0, 1.0));
        for (auto& v : dx) v = static_cast<float>(rng.uniform(-1.0, 1.0));
        const auto kernel = detail::gaussian_kernel(cfg.elastic_sigma);
        detail::blur_plane(dy.data(), n, kernel);
        detail::blur_plane(dx.data(), n, kernel);
        for (auto& v : dy) v *= static_cast<float>(cfg.elastic_alpha);
        for (auto& v : dx) v *= static_cast<float>(cfg.elastic_alpha);

        Tensor warped_frames = p.seq_patch;
        for (std::size_t t = 0; t < f; ++t) {
            const float* src = p.seq_patch.ptr() + t * n * n;
            float* dst = warped_frames.ptr() + t * n * n;
            for (std::size_t y = 0; y < n; ++y)
                for (std::size_t x = 0; x < n; ++x)
                    dst[y * n + x] = detail::bilinear_at(src, n, y + dy[y * n + x], x + dx[y * n + x]);
        }
        p.seq_patch = std::move(warped_frames);

        TensorT<std::uint8_t> warped_label = p.label_patch;
        for (std::size_t y = 0; y < n; ++y)
            for (std::size_t x = 0; x < n; ++x) {
                const auto sy = static_cast<std::size_t>(std::clamp<long>(
                    std::lround(y + dy[y * n + x]), 0, static_cast<long>(n) - 1));
                const auto sx = static_cast<std::size_t>(std::clamp<long>(
                    std::lround(x + dx[y * n + x]), 0, static_cast<long>(n) - 1));
                warped_label[y * n + x] = p.label_patch[sy * n + sx];
            }
        p.label_patch = std::move(warped_label);
    }

    if (rng.coin(cfg.prob)) {  // per-frame contrast
        for (std::size_t t = 0; t < f; ++t) {
            const auto factor = static_cast<float>(rng.uniform(cfg.contrast_min, cfg.contrast_max));
            float* plane = p.seq_patch.ptr() + t * n * n;
            for (std::size_t i = 0; i < n * n; ++i) plane[i] *= factor;
        }
    }
    return p;
}

}  // namespace vsseg::augment
