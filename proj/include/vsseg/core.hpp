#pragma once

#include <cstdint>
#include <string>

#include "vsseg/errors.hpp"
#include "vsseg/tensor.hpp"

namespace vsseg {

enum class View : std::uint8_t { anteroposterior = 0, lateral = 1, synthetic = 2 };

// An ordered stack of co-registered grayscale frames: the 2D+Time input.
// Intensities are raw until zscore_normalize is applied.
struct DsaSequence {
    std::string id;
    Tensor frames;  // [F, H, W]
    View view = View::synthetic;
    double frame_rate_fps = 4.0;

    std::size_t num_frames() const { return frames.dim(0); }
    std::size_t height() const { return frames.dim(1); }
    std::size_t width() const { return frames.dim(2); }
};

// Dense binary ground truth, one plane per sequence. Values in {0,1}.
struct VesselMask {
    TensorT<std::uint8_t> pixels;  // [H, W]

    std::size_t height() const { return pixels.dim(0); }
    std::size_t width() const { return pixels.dim(1); }
};

constexpr std::uint8_t kUnannotated = 255;

// Sparse weak annotation. 0 = background stroke, 1 = vessel stroke,
// 255 = unannotated.
struct ScribbleMask {
    TensorT<std::uint8_t> pixels;  // [H, W]

    std::size_t height() const { return pixels.dim(0); }
    std::size_t width() const { return pixels.dim(1); }
};

// Per-pixel vessel probability in [0,1].
struct ProbabilityMap {
    Tensor probs;  // [H, W]

    std::size_t height() const { return probs.dim(0); }
    std::size_t width() const { return probs.dim(1); }
};

struct MetricsReport {
    double dsc = 0.0;
    double acc = 0.0;
    double sen = 0.0;
    double spe = 0.0;
    double iou = 0.0;
    double auc = 0.0;
    double vc = 0.0;
};

// Multi-frame feature maps at one SFEM stage. Spatial size halves per stage.
struct SequenceFeatureState {
    Tensor maps;  // [T, C, H_s, W_s]
    int stage = 0;
};

inline void check_mask_values(const TensorT<std::uint8_t>& pixels, bool allow_unannotated,
                              const char* what) {
    for (std::uint8_t v : pixels.data) {
        if (v == 0 || v == 1) continue;
        if (allow_unannotated && v == kUnannotated) continue;
        throw IllegalLabelValue(std::string(what) + ": value " + std::to_string(int(v)));
    }
}

inline void validate_pairing(const DsaSequence& seq, const VesselMask& mask) {
    if (mask.pixels.rank() != 2 || seq.frames.rank() != 3 ||
        seq.height() != mask.height() || seq.width() != mask.width()) {
        throw ShapeMismatch("sequence " + shape_str(seq.frames.shape) + " vs mask " +
                            shape_str(mask.pixels.shape));
    }
    check_mask_values(mask.pixels, false, "vessel mask");
}

inline void validate_pairing(const DsaSequence& seq, const ScribbleMask& scribble) {
    if (scribble.pixels.rank() != 2 || seq.frames.rank() != 3 ||
        seq.height() != scribble.height() || seq.width() != scribble.width()) {
        throw ShapeMismatch("sequence " + shape_str(seq.frames.shape) + " vs scribble " +
                            shape_str(scribble.pixels.shape));
    }
    check_mask_values(scribble.pixels, true, "scribble mask");
}

}  // namespace vsseg
