#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "vsseg/core.hpp"
#include "vsseg/errors.hpp"

// Binary (de)serialization of the core types. Little-endian, bit-exact
// round trips.

namespace vsseg::serial {

using Bytes = std::vector<std::uint8_t>;

struct Writer {
    Bytes out;

    void raw(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        out.insert(out.end(), b, b + n);
    }
    void u8(std::uint8_t v) { raw(&v, 1); }
    void u64(std::uint64_t v) { raw(&v, 8); }
    void f64(double v) { raw(&v, 8); }
    void str(const std::string& s) {
        u64(s.size());
        raw(s.data(), s.size());
    }
    template <typename T>
    void tensor(const TensorT<T>& t) {
        u64(t.shape.size());
        for (std::size_t d : t.shape) u64(d);
        raw(t.data.data(), t.data.size() * sizeof(T));
    }
};

struct Reader {
    const std::uint8_t* p;
    const std::uint8_t* end;

    explicit Reader(const Bytes& b) : p(b.data()), end(b.data() + b.size()) {}

    void raw(void* dst, std::size_t n) {
        if (p + n > end) throw IoError("truncated buffer");
        std::memcpy(dst, p, n);
        p += n;
    }
    std::uint8_t u8() {
        std::uint8_t v;
        raw(&v, 1);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v;
        raw(&v, 8);
        return v;
    }
    double f64() {
        double v;
        raw(&v, 8);
        return v;
    }
    std::string str() {
        std::string s(u64(), '\0');
        raw(s.data(), s.size());
        return s;
    }
    template <typename T>
    TensorT<T> tensor() {
        TensorT<T> t;
        t.shape.resize(u64());
        for (auto& d : t.shape) d = u64();
        t.data.resize(TensorT<T>::count(t.shape));
        raw(t.data.data(), t.data.size() * sizeof(T));
        return t;
    }
};

inline Bytes save(const DsaSequence& s) {
    Writer w;
    w.str(s.id);
    w.tensor(s.frames);
    w.u8(static_cast<std::uint8_t>(s.view));
    w.f64(s.frame_rate_fps);
    return w.out;
}

inline DsaSequence load_sequence_bytes(const Bytes& b) {
    Reader r(b);
    DsaSequence s;
    s.id = r.str();
    s.frames = r.tensor<float>();
    s.view = static_cast<View>(r.u8());
    s.frame_rate_fps = r.f64();
    return s;
}

inline Bytes save(const VesselMask& m) {
    Writer w;
    w.tensor(m.pixels);
    return w.out;
}

inline VesselMask load_vessel_mask_bytes(const Bytes& b) {
    Reader r(b);
    return VesselMask{r.tensor<std::uint8_t>()};
}

inline Bytes save(const ScribbleMask& m) {
    Writer w;
    w.tensor(m.pixels);
    return w.out;
}

inline ScribbleMask load_scribble_mask_bytes(const Bytes& b) {
    Reader r(b);
    return ScribbleMask{r.tensor<std::uint8_t>()};
}

inline Bytes save(const ProbabilityMap& m) {
    Writer w;
    w.tensor(m.probs);
    return w.out;
}

inline ProbabilityMap load_probability_map_bytes(const Bytes& b) {
    Reader r(b);
    return ProbabilityMap{r.tensor<float>()};
}

inline Bytes save(const MetricsReport& m) {
    Writer w;
    w.f64(m.dsc);
    w.f64(m.acc);
    w.f64(m.sen);
    w.f64(m.spe);
    w.f64(m.iou);
    w.f64(m.auc);
    w.f64(m.vc);
    return w.out;
}

inline MetricsReport load_metrics_report_bytes(const Bytes& b) {
    Reader r(b);
    MetricsReport m;
    m.dsc = r.f64();
    m.acc = r.f64();
    m.sen = r.f64();
    m.spe = r.f64();
    m.iou = r.f64();
    m.auc = r.f64();
    m.vc = r.f64();
    return m;
}

inline Bytes save(const SequenceFeatureState& s) {
    Writer w;
    w.tensor(s.maps);
    w.u64(static_cast<std::uint64_t>(s.stage));
    return w.out;
}

inline SequenceFeatureState load_feature_state_bytes(const Bytes& b) {
    Reader r(b);
    SequenceFeatureState s;
    s.maps = r.tensor<float>();
    s.stage = static_cast<int>(r.u64());
    return s;
}

}  // namespace vsseg::serial
