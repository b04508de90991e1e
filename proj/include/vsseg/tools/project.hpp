#pragma once

#include <algorithm>
#include <string>

#include "vsseg/core.hpp"

// Temporal projections / input variants: subsets of the sequence (first,
// last, first+last) and density projections (mean = AIP, min = MIP; vessels
// are dark in DSA, hence minimum).

namespace vsseg::tools {

enum class ProjectionMode { first, last, first_last, mean, min, full };

inline ProjectionMode projection_mode_from(const std::string& name) {
    if (name == "first") return ProjectionMode::first;
    if (name == "last") return ProjectionMode::last;
    if (name == "first_last") return ProjectionMode::first_last;
    if (name == "mean") return ProjectionMode::mean;
    if (name == "min") return ProjectionMode::min;
    if (name == "full") return ProjectionMode::full;
    throw ConfigError("unknown projection mode: " + name);
}

inline DsaSequence project(const DsaSequence& seq, ProjectionMode mode) {
    const std::size_t f = seq.num_frames(), h = seq.height(), w = seq.width();
    const std::size_t plane = h * w;
    DsaSequence out;
    out.id = seq.id;
    out.view = seq.view;
    out.frame_rate_fps = seq.frame_rate_fps;

    switch (mode) {
        case ProjectionMode::full:
            out.frames = seq.frames;
            break;
        case ProjectionMode::first:
            out.frames = Tensor({1, h, w});
            std::copy_n(seq.frames.ptr(), plane, out.frames.ptr());
            break;
        case ProjectionMode::last:
            out.frames = Tensor({1, h, w});
            std::copy_n(seq.frames.ptr() + (f - 1) * plane, plane, out.frames.ptr());
            break;
        case ProjectionMode::first_last:
            out.frames = Tensor({2, h, w});
            std::copy_n(seq.frames.ptr(), plane, out.frames.ptr());
            std::copy_n(seq.frames.ptr() + (f - 1) * plane, plane, out.frames.ptr() + plane);
            break;
        case ProjectionMode::mean: {
            out.frames = Tensor({1, h, w});
            for (std::size_t i = 0; i < plane; ++i) {
                double acc = 0.0;
                for (std::size_t t = 0; t < f; ++t) acc += seq.frames[t * plane + i];
                out.frames[i] = static_cast<float>(acc / static_cast<double>(f));
            }
            break;
        }
        case ProjectionMode::min: {
            out.frames = Tensor({1, h, w});
            for (std::size_t i = 0; i < plane; ++i) {
                float best = seq.frames[i];
                for (std::size_t t = 1; t < f; ++t) best = std::min(best, seq.frames[t * plane + i]);
                out.frames[i] = best;
            }
            break;
        }
    }
    return out;
}

}  // namespace vsseg::tools
