#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "vsseg/core.hpp"
#include "vsseg/rng.hpp"

// Synthetic DSA sequence generator. Grows a random binary vessel tree with
// widths shrinking by depth; the contrast front fills branches of depth
// <= t*depth_max/F at frame t, so thin distal branches appear only in late
// frames. Vessels are dark on a light background.

namespace vsseg::tools {

struct SynthSpec {
    std::size_t size = 64;
    std::size_t frames = 8;
    int tree_depth = 5;
    double noise = 6.0;              // additive gaussian sigma (raw units)
    double background = 200.0;
    double vessel_intensity = 60.0;
    double min_vessel_fraction = 0.02;
    double max_vessel_fraction = 0.15;
};

namespace detail {

struct BranchTip {
    double x, y, angle, width;
    int depth;
};

// Stamps branches into a per-pixel depth map (0 = background, otherwise the
// smallest depth of any branch covering the pixel).
inline void grow_tree(const SynthSpec& spec, double width_scale, Rng& rng,
                      std::vector<int>& depth_map) {
    const auto size = static_cast<double>(spec.size);
    const long n = static_cast<long>(spec.size);
    std::fill(depth_map.begin(), depth_map.end(), 0);

    std::vector<BranchTip> stack;
    stack.push_back({size * rng.uniform(0.35, 0.65), size * 0.04,
                     1.5707963267948966 + rng.uniform(-0.25, 0.25),
                     std::max(2.0, size / 14.0 * width_scale), 1});

    while (!stack.empty()) {
        BranchTip tip = stack.back();
        stack.pop_back();
        const double length = size * rng.uniform(0.16, 0.26);
        double x = tip.x, y = tip.y, angle = tip.angle;
        const double radius = tip.width / 2.0;
        const int ir = static_cast<int>(std::ceil(radius));
        for (double s = 0.0; s < length; s += 0.5) {
            angle += rng.uniform(-0.05, 0.05);
            x += 0.5 * std::cos(angle);
            y += 0.5 * std::sin(angle);
            if (x < 1 || y < 1 || x > size - 2 || y > size - 2) break;
            const long cx = std::lround(x), cy = std::lround(y);
            for (long dy = -ir; dy <= ir; ++dy)
                for (long dx = -ir; dx <= ir; ++dx) {
                    if (static_cast<double>(dy * dy + dx * dx) > radius * radius) continue;
                    const long py = cy + dy, px = cx + dx;
                    if (py < 0 || px < 0 || py >= n || px >= n) continue;
                    int& cell = depth_map[static_cast<std::size_t>(py) * n + px];
                    if (cell == 0 || cell > tip.depth) cell = tip.depth;
                }
        }
        if (tip.depth < spec.tree_depth && tip.width * 0.75 >= 1.0 && x > 2 && y > 2 &&
            x < size - 3 && y < size - 3) {
            const double spread = rng.uniform(0.3, 0.7);
            stack.push_back({x, y, angle - spread, tip.width * rng.uniform(0.62, 0.78), tip.depth + 1});
            stack.push_back({x, y, angle + spread, tip.width * rng.uniform(0.62, 0.78), tip.depth + 1});
        }
    }
}

}  // namespace detail

inline std::pair<DsaSequence, VesselMask> synthesize_sequence(const SynthSpec& spec, Rng& rng) {
    if (spec.frames < 2) throw Error("synthesize_sequence: frames must be >= 2");
    const std::size_t n = spec.size;
    std::vector<int> depth_map(n * n, 0);

    double width_scale = 1.0;
    double fraction = 0.0;
    for (int attempt = 0; attempt < 40; ++attempt) {
        detail::grow_tree(spec, width_scale, rng, depth_map);
        std::size_t vessel = 0;
        for (int d : depth_map) vessel += d > 0;
        fraction = static_cast<double>(vessel) / static_cast<double>(n * n);
        if (fraction >= spec.min_vessel_fraction && fraction <= spec.max_vessel_fraction) break;
        width_scale *= fraction < spec.min_vessel_fraction ? 1.2 : 0.85;
        if (attempt == 39)
            throw Error("synthesize_sequence: vessel fraction " + std::to_string(fraction) +
                        " outside configured band");
    }

    DsaSequence seq;
    seq.view = View::synthetic;
    seq.frame_rate_fps = 4.0;
    seq.frames = Tensor({spec.frames, n, n});
    for (std::size_t t = 0; t < spec.frames; ++t) {
        // contrast front: frame t (1-based) fills depth <= t*depth_max/F
        const double fill_depth = static_cast<double>(t + 1) *
                                  static_cast<double>(spec.tree_depth) /
                                  static_cast<double>(spec.frames);
        float* frame = seq.frames.ptr() + t * n * n;
        for (std::size_t i = 0; i < n * n; ++i) {
            const bool filled = depth_map[i] > 0 && static_cast<double>(depth_map[i]) <= fill_depth;
            double v = filled ? spec.vessel_intensity : spec.background;
            if (spec.noise > 0.0) v += rng.normal(0.0, spec.noise);
            frame[i] = static_cast<float>(std::clamp(v, 0.0, 255.0));
        }
    }

    VesselMask mask{TensorT<std::uint8_t>({n, n})};
    for (std::size_t i = 0; i < n * n; ++i) mask.pixels[i] = depth_map[i] > 0 ? 1 : 0;
    return {std::move(seq), std::move(mask)};
}

}  // namespace vsseg::tools
