#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "vsseg/core.hpp"
#include "vsseg/io/png_io.hpp"
#include "vsseg/rng.hpp"

// Dataset-directory ingestion, resampling, normalization and patient-level
// splits. On-disk layout:
//   root/{labeled,unlabeled}/<patient_id>/<sequence_id>/frame_###.png
// plus label.png (and optionally scribble.png) next to the frames.

namespace vsseg::data {

enum class Split { train, val, test, unlabeled };

inline const char* split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
        default: return "unlabeled";
    }
}

struct IndexEntry {
    std::filesystem::path sequence_path;
    std::optional<std::filesystem::path> label_path;
    std::optional<std::filesystem::path> scribble_path;
    std::string patient_id;
    std::string sequence_id;
    Split split = Split::train;
};

struct DatasetIndex {
    std::vector<IndexEntry> entries;

    std::vector<IndexEntry> of_split(Split s) const {
        std::vector<IndexEntry> out;
        for (const auto& e : entries)
            if (e.split == s) out.push_back(e);
        return out;
    }
};

// ---------------------------------------------------------------------------
// Loading
// ---------------------------------------------------------------------------

inline DsaSequence load_sequence(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    std::map<int, fs::path> frames;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("frame_", 0) != 0 || entry.path().extension() != ".png") continue;
        const std::string idx = name.substr(6, name.size() - 10);
        if (idx.empty() || idx.find_first_not_of("0123456789") != std::string::npos) continue;
        frames[std::stoi(idx)] = entry.path();
    }
    if (frames.empty()) throw MissingFrames(dir.string() + ": no frame_###.png files");
    int expect = 0;
    for (const auto& [idx, path] : frames) {
        if (idx != expect)
            throw MissingFrames(dir.string() + ": expected frame " + std::to_string(expect) +
                                ", found " + std::to_string(idx));
        ++expect;
    }

    DsaSequence seq;
    seq.id = dir.filename().string();
    std::size_t h = 0, w = 0;
    std::size_t f = 0;
    for (const auto& [idx, path] : frames) {
        auto img = io::read_gray_png(path);
        if (f == 0) {
            h = img.height;
            w = img.width;
            seq.frames = Tensor({frames.size(), h, w});
        } else if (img.height != h || img.width != w) {
            throw MixedResolution(dir.string() + ": frame " + std::to_string(idx) + " is " +
                                  std::to_string(img.width) + "x" + std::to_string(img.height));
        }
        float* dst = seq.frames.ptr() + f * h * w;
        for (std::size_t i = 0; i < h * w; ++i) dst[i] = static_cast<float>(img.pixels[i]);
        ++f;
    }
    return seq;
}

inline TensorT<std::uint8_t> load_mask_plane(const std::filesystem::path& path) {
    auto img = io::read_gray_png(path);
    TensorT<std::uint8_t> out({img.height, img.width});
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = static_cast<std::uint8_t>(img.pixels[i]);
    return out;
}

inline VesselMask load_vessel_mask(const std::filesystem::path& path) {
    VesselMask m{load_mask_plane(path)};
    check_mask_values(m.pixels, false, path.string().c_str());
    return m;
}

inline ScribbleMask load_scribble_mask(const std::filesystem::path& path) {
    ScribbleMask m{load_mask_plane(path)};
    check_mask_values(m.pixels, true, path.string().c_str());
    return m;
}

// ---------------------------------------------------------------------------
// Resampling and normalization
// ---------------------------------------------------------------------------

// Nearest-index frame selection; frames are picked, never blended.
inline std::vector<std::size_t> resample_indices(std::size_t f_in, std::size_t target_len) {
    std::vector<std::size_t> idx(target_len);
    if (target_len == 1) {
        idx[0] = static_cast<std::size_t>(std::lround((f_in - 1) / 2.0));
        return idx;
    }
    for (std::size_t i = 0; i < target_len; ++i) {
        idx[i] = static_cast<std::size_t>(
            std::lround(static_cast<double>(i) * static_cast<double>(f_in - 1) /
                        static_cast<double>(target_len - 1)));
    }
    return idx;
}

inline DsaSequence resample_length(const DsaSequence& seq, std::size_t target_len) {
    if (target_len < 1) throw Error("resample_length: target_len must be >= 1");
    const std::size_t f_in = seq.num_frames();
    const auto idx = resample_indices(f_in, target_len);

    DsaSequence out;
    out.id = seq.id;
    out.view = seq.view;
    out.frame_rate_fps = seq.frame_rate_fps;
    const std::size_t plane = seq.height() * seq.width();
    out.frames = Tensor({target_len, seq.height(), seq.width()});
    for (std::size_t i = 0; i < target_len; ++i) {
        std::copy_n(seq.frames.ptr() + idx[i] * plane, plane, out.frames.ptr() + i * plane);
    }
    return out;
}

// Per-sequence z-score over all frames pooled. Constant sequences map to all
// zeros.
inline DsaSequence zscore_normalize(const DsaSequence& seq) {
    DsaSequence out = seq;
    const std::size_t n = out.frames.numel();
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += out.frames[i];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = out.frames[i] - mean;
        var += d * d;
    }
    var /= static_cast<double>(n);
    const double std_dev = std::sqrt(var);
    if (std_dev < 1e-12) {
        out.frames.fill(0.0f);
        return out;
    }
    for (std::size_t i = 0; i < n; ++i)
        out.frames[i] = static_cast<float>((out.frames[i] - mean) / std_dev);
    return out;
}

// ---------------------------------------------------------------------------
// Index construction
// ---------------------------------------------------------------------------

struct SplitSpec {
    double train = 0.6;
    double val = 0.2;
    double test = 0.2;
    std::uint64_t seed = 0;
};

namespace detail {

inline std::vector<std::string> sorted_subdirs(const std::filesystem::path& dir) {
    std::vector<std::string> out;
    if (!std::filesystem::exists(dir)) return out;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.is_directory()) out.push_back(e.path().filename().string());
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace detail

// Deterministic patient-level split. Patients are shuffled with the spec
// seed, then assigned to train/val/test by largest-remainder counts.
inline DatasetIndex build_index(const std::filesystem::path& root, const SplitSpec& spec) {
    namespace fs = std::filesystem;
    if (std::abs(spec.train + spec.val + spec.test - 1.0) > 1e-9)
        throw ConfigError("split fractions must sum to 1");

    const fs::path labeled_root = root / "labeled";
    auto patients = detail::sorted_subdirs(labeled_root);
    if (patients.empty()) throw EmptyDataset("no labeled patients under " + labeled_root.string());

    Rng rng(spec.seed);
    for (std::size_t i = patients.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
        std::swap(patients[i - 1], patients[j]);
    }

    const std::size_t n = patients.size();
    const double fracs[3] = {spec.train, spec.val, spec.test};
    std::size_t counts[3];
    double rem[3];
    std::size_t used = 0;
    for (int k = 0; k < 3; ++k) {
        const double exact = fracs[k] * static_cast<double>(n);
        counts[k] = static_cast<std::size_t>(exact);
        rem[k] = exact - static_cast<double>(counts[k]);
        used += counts[k];
    }
    while (used < n) {
        int best = 0;
        for (int k = 1; k < 3; ++k)
            if (rem[k] > rem[best] + 1e-12) best = k;
        ++counts[best];
        rem[best] = -1.0;
        ++used;
    }

    DatasetIndex index;
    std::map<std::string, Split> patient_split;
    std::size_t cursor = 0;
    const Split order[3] = {Split::train, Split::val, Split::test};
    for (int k = 0; k < 3; ++k) {
        for (std::size_t i = 0; i < counts[k]; ++i) patient_split[patients[cursor++]] = order[k];
    }

    std::size_t labeled_sequences = 0;
    for (const auto& patient : detail::sorted_subdirs(labeled_root)) {
        for (const auto& seq_id : detail::sorted_subdirs(labeled_root / patient)) {
            IndexEntry e;
            e.sequence_path = labeled_root / patient / seq_id;
            e.patient_id = patient;
            e.sequence_id = seq_id;
            e.split = patient_split.at(patient);
            if (fs::exists(e.sequence_path / "label.png")) e.label_path = e.sequence_path / "label.png";
            if (fs::exists(e.sequence_path / "scribble.png"))
                e.scribble_path = e.sequence_path / "scribble.png";
            index.entries.push_back(std::move(e));
            ++labeled_sequences;
        }
    }
    if (labeled_sequences == 0) throw EmptyDataset("no labeled sequences under " + labeled_root.string());

    const fs::path unlabeled_root = root / "unlabeled";
    for (const auto& patient : detail::sorted_subdirs(unlabeled_root)) {
        for (const auto& seq_id : detail::sorted_subdirs(unlabeled_root / patient)) {
            IndexEntry e;
            e.sequence_path = unlabeled_root / patient / seq_id;
            e.patient_id = patient;
            e.sequence_id = seq_id;
            e.split = Split::unlabeled;
            index.entries.push_back(std::move(e));
        }
    }

    // Internal assertion: a patient id must never straddle labeled splits.
    std::map<std::string, Split> seen;
    for (const auto& e : index.entries) {
        if (e.split == Split::unlabeled) continue;
        auto [it, inserted] = seen.emplace(e.patient_id, e.split);
        if (!inserted && it->second != e.split)
            throw PatientLeak("patient " + e.patient_id + " appears in two splits");
    }
    return index;
}

}  // namespace vsseg::data
