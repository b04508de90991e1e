#pragma once

#include <cstdint>
#include <vector>

#include "vsseg/core.hpp"
#include "vsseg/rng.hpp"

// Morphological thinning and the RDFA scribble generator: skeletonize the
// vessel and background classes independently, then randomly prune whole
// skeleton branch segments until at most keep_fraction of each skeleton
// survives.

namespace vsseg::tools {

using Plane = TensorT<std::uint8_t>;

namespace detail {

inline bool at(const Plane& p, long y, long x) {
    if (y < 0 || x < 0 || y >= static_cast<long>(p.dim(0)) || x >= static_cast<long>(p.dim(1)))
        return false;
    return p[static_cast<std::size_t>(y) * p.dim(1) + static_cast<std::size_t>(x)] != 0;
}

}  // namespace detail

// Zhang-Suen thinning; reduces a binary region to 8-connected, mostly
// 1-pixel-wide curves.
inline Plane thin(const Plane& input) {
    Plane img = input;
    const long h = static_cast<long>(img.dim(0)), w = static_cast<long>(img.dim(1));
    std::vector<std::size_t> to_delete;
    bool changed = true;
    while (changed) {
        changed = false;
        for (int phase = 0; phase < 2; ++phase) {
            to_delete.clear();
            for (long y = 0; y < h; ++y) {
                for (long x = 0; x < w; ++x) {
                    if (!detail::at(img, y, x)) continue;
                    // clockwise neighbors from north: p2..p9
                    const bool p2 = detail::at(img, y - 1, x);
                    const bool p3 = detail::at(img, y - 1, x + 1);
                    const bool p4 = detail::at(img, y, x + 1);
                    const bool p5 = detail::at(img, y + 1, x + 1);
                    const bool p6 = detail::at(img, y + 1, x);
                    const bool p7 = detail::at(img, y + 1, x - 1);
                    const bool p8 = detail::at(img, y, x - 1);
                    const bool p9 = detail::at(img, y - 1, x - 1);
                    const int b = p2 + p3 + p4 + p5 + p6 + p7 + p8 + p9;
                    if (b < 2 || b > 6) continue;
                    const bool seq[9] = {p2, p3, p4, p5, p6, p7, p8, p9, p2};
                    int a = 0;
                    for (int i = 0; i < 8; ++i) a += (!seq[i] && seq[i + 1]);
                    if (a != 1) continue;
                    if (phase == 0) {
                        if ((p2 && p4 && p6) || (p4 && p6 && p8)) continue;
                    } else {
                        if ((p2 && p4 && p8) || (p2 && p6 && p8)) continue;
                    }
                    to_delete.push_back(static_cast<std::size_t>(y) * w + x);
                }
            }
            for (std::size_t i : to_delete) img[i] = 0;
            changed = changed || !to_delete.empty();
        }
    }
    return img;
}

// Binary dilation with a euclidean disk.
inline Plane dilate(const Plane& input, int radius) {
    const long h = static_cast<long>(input.dim(0)), w = static_cast<long>(input.dim(1));
    std::vector<std::pair<int, int>> offsets;
    for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx)
            if (dy * dy + dx * dx <= radius * radius) offsets.emplace_back(dy, dx);
    Plane out(input.shape, 0);
    for (long y = 0; y < h; ++y)
        for (long x = 0; x < w; ++x) {
            if (!detail::at(input, y, x)) continue;
            for (auto [dy, dx] : offsets) {
                const long ny = y + dy, nx = x + dx;
                if (ny >= 0 && nx >= 0 && ny < h && nx < w)
                    out[static_cast<std::size_t>(ny) * w + nx] = 1;
            }
        }
    return out;
}

namespace detail {

inline int skeleton_neighbors(const Plane& skel, long y, long x) {
    int n = 0;
    for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
            if ((dy || dx) && at(skel, y + dy, x + dx)) ++n;
    return n;
}

// Branch segments = 8-connected components of the skeleton minus junction
// pixels (pixels with 3+ skeleton neighbors).
inline std::vector<std::vector<std::size_t>> branch_segments(const Plane& skel) {
    const long h = static_cast<long>(skel.dim(0)), w = static_cast<long>(skel.dim(1));
    Plane arcs = skel;
    for (long y = 0; y < h; ++y)
        for (long x = 0; x < w; ++x)
            if (at(skel, y, x) && skeleton_neighbors(skel, y, x) >= 3)
                arcs[static_cast<std::size_t>(y) * w + x] = 0;

    std::vector<std::vector<std::size_t>> segments;
    std::vector<std::uint8_t> seen(skel.numel(), 0);
    std::vector<std::size_t> stack;
    for (std::size_t start = 0; start < arcs.numel(); ++start) {
        if (arcs[start] == 0 || seen[start]) continue;
        segments.emplace_back();
        seen[start] = 1;
        stack.assign(1, start);
        while (!stack.empty()) {
            const std::size_t cur = stack.back();
            stack.pop_back();
            segments.back().push_back(cur);
            const long y = static_cast<long>(cur / w), x = static_cast<long>(cur % w);
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    if (!dy && !dx) continue;
                    const long ny = y + dy, nx = x + dx;
                    if (ny < 0 || nx < 0 || ny >= h || nx >= w) continue;
                    const auto ni = static_cast<std::size_t>(ny) * w + nx;
                    if (arcs[ni] != 0 && !seen[ni]) {
                        seen[ni] = 1;
                        stack.push_back(ni);
                    }
                }
        }
    }
    return segments;
}

// Removes whole branch segments (then individual pixels if needed) until at
// most keep_fraction of the skeleton pixels survive.
inline void prune_skeleton(Plane& skel, double keep_fraction, Rng& rng) {
    std::size_t count = 0;
    for (auto v : skel.data) count += v != 0;
    if (count == 0) return;
    const auto target = static_cast<std::size_t>(keep_fraction * static_cast<double>(count));

    auto segments = branch_segments(skel);
    for (std::size_t i = segments.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
        std::swap(segments[i - 1], segments[j]);
    }
    for (const auto& seg : segments) {
        if (count <= target) break;
        for (std::size_t i : seg) skel[i] = 0;
        count -= seg.size();
    }
    if (count > target) {
        std::vector<std::size_t> rest;
        for (std::size_t i = 0; i < skel.numel(); ++i)
            if (skel[i]) rest.push_back(i);
        for (std::size_t i = rest.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
            std::swap(rest[i - 1], rest[j]);
        }
        for (std::size_t i : rest) {
            if (count <= target) break;
            skel[i] = 0;
            --count;
        }
    }
}

}  // namespace detail

// Scribbles by skeletonizing and randomly pruning each class of the full
// annotation. Background strokes come from the skeleton of the complement of
// the 3-px-dilated vessel mask, so they stay clear of vessel borders.
inline ScribbleMask generate_rdfa(const VesselMask& full, double keep_fraction, Rng& rng) {
    if (!(keep_fraction > 0.0 && keep_fraction <= 1.0))
        throw Error("generate_rdfa: keep_fraction must be in (0, 1]");
    Plane vessel_skel = thin(full.pixels);

    Plane bg_region(full.pixels.shape, 0);
    const Plane grown = dilate(full.pixels, 3);
    for (std::size_t i = 0; i < grown.numel(); ++i) bg_region[i] = grown[i] ? 0 : 1;
    Plane bg_skel = thin(bg_region);

    detail::prune_skeleton(vessel_skel, keep_fraction, rng);
    detail::prune_skeleton(bg_skel, keep_fraction, rng);

    ScribbleMask out{Plane(full.pixels.shape, kUnannotated)};
    for (std::size_t i = 0; i < out.pixels.numel(); ++i) {
        if (vessel_skel[i]) out.pixels[i] = 1;
        else if (bg_skel[i]) out.pixels[i] = 0;
    }
    return out;
}

}  // namespace vsseg::tools
