#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include <json.hpp>

#include "vsseg/model/layers.hpp"
#include "vsseg/serial.hpp"

// Checkpoint archive: parameter tensors keyed by hierarchical names plus a
// JSON metadata blob (architecture, config hash, epoch, best validation DSC).

namespace vsseg::model {

inline constexpr char kCheckpointMagic[8] = {'V', 'S', 'S', 'E', 'G', 'C', 'K', '1'};

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const NamedParams<T>& params,
                     const nlohmann::json& meta) {
    serial::Writer w;
    w.raw(kCheckpointMagic, 8);
    w.str(meta.dump());
    w.u64(params.size());
    for (const auto& [name, p] : params) {
        w.str(name);
        w.u8(static_cast<std::uint8_t>(sizeof(T)));
        w.tensor(p->value);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(w.out.data()),
              static_cast<std::streamsize>(w.out.size()));
}

template <typename T>
struct Checkpoint {
    nlohmann::json meta;
    std::map<std::string, TensorT<T>> tensors;
};

template <typename T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    serial::Bytes bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    serial::Reader r(bytes);
    char magic[8];
    r.raw(magic, 8);
    if (std::memcmp(magic, kCheckpointMagic, 8) != 0)
        throw IoError(path.string() + ": not a checkpoint file");
    Checkpoint<T> ckpt;
    ckpt.meta = nlohmann::json::parse(r.str());
    const std::uint64_t count = r.u64();
    for (std::uint64_t i = 0; i < count; ++i) {
        std::string name = r.str();
        const auto dtype = r.u8();
        if (dtype != sizeof(T))
            throw IoError(path.string() + ": dtype width " + std::to_string(int(dtype)) +
                          " does not match");
        ckpt.tensors[name] = r.template tensor<T>();
    }
    return ckpt;
}

// Copies checkpoint tensors into an existing parameter set; names and shapes
// must match exactly.
template <typename T>
void load_into(const Checkpoint<T>& ckpt, const NamedParams<T>& params) {
    if (ckpt.tensors.size() != params.size())
        throw IoError("checkpoint holds " + std::to_string(ckpt.tensors.size()) +
                      " tensors, model has " + std::to_string(params.size()));
    for (const auto& [name, p] : params) {
        auto it = ckpt.tensors.find(name);
        if (it == ckpt.tensors.end()) throw IoError("checkpoint missing tensor " + name);
        if (it->second.shape != p->value.shape)
            throw ShapeMismatch("checkpoint tensor " + name + ": " + shape_str(it->second.shape) +
                                " vs model " + shape_str(p->value.shape));
        p->value.data = it->second.data;
    }
}

// Snapshot/restore parameter values in memory (best-epoch bookkeeping).
template <typename T>
std::map<std::string, TensorT<T>> snapshot_params(const NamedParams<T>& params) {
    std::map<std::string, TensorT<T>> out;
    for (const auto& [name, p] : params) out[name] = p->value;
    return out;
}

template <typename T>
void restore_params(const std::map<std::string, TensorT<T>>& snap, const NamedParams<T>& params) {
    for (const auto& [name, p] : params) p->value = snap.at(name);
}

}  // namespace vsseg::model
