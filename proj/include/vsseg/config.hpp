#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "vsseg/errors.hpp"

// Experiment configuration: a JSON document validated against the known-key
// schema, with dotted-path CLI overrides and a content hash for provenance.

namespace vsseg::cli {

class Config {
public:
    static const std::map<std::string, std::string>& schema() {
        static const std::map<std::string, std::string> s = {
            {"seed", "int"},
            {"name", "string"},
            {"data.root", "string"},
            {"data.sequence_length", "int"},
            {"data.split.train", "number"},
            {"data.split.val", "number"},
            {"data.split.test", "number"},
            {"model.backbone", "string"},
            {"model.stages", "int"},
            {"model.sfem_channels", "array"},
            {"model.backbone_channels", "array"},
            {"model.gru_kernel", "int"},
            {"model.gru_bias", "bool"},
            {"train.epochs", "int"},
            {"train.steps_per_epoch", "int"},
            {"train.batch_size", "int"},
            {"train.patch", "int"},
            {"train.lr", "number"},
            {"train.weight_decay", "number"},
            {"train.threshold", "number"},
            {"train.tile", "int"},
            {"train.use_strong", "bool"},
            {"augment.weak.hflip_prob", "number"},
            {"augment.weak.vflip_prob", "number"},
            {"augment.weak.rot90", "bool"},
            {"augment.strong.prob", "number"},
            {"augment.strong.cutout_min", "int"},
            {"augment.strong.cutout_max", "int"},
            {"augment.strong.noise_sigma", "number"},
            {"augment.strong.blur_min", "number"},
            {"augment.strong.blur_max", "number"},
            {"augment.strong.elastic_alpha", "number"},
            {"augment.strong.elastic_sigma", "number"},
            {"augment.strong.contrast_min", "number"},
            {"augment.strong.contrast_max", "number"},
            {"augment.strong.enable_cutout", "bool"},
            {"augment.strong.enable_elastic", "bool"},
            {"wss.lambda1", "number"},
            {"wss.lambda2", "number"},
            {"wss.normalize_pce", "bool"},
            {"wss.consistency_on_probs", "bool"},
            {"wss.strong_for_b", "bool"},
            {"rpst.p", "number"},
            {"rpst.iterations", "int"},
            {"rpst.threshold", "number"},
            {"rpst.strong_on_labeled", "bool"},
            {"rpst.student_steps_per_epoch", "int"},
            {"eval.threshold", "number"},
        };
        return s;
    }

    static Config from_json(nlohmann::json doc, const std::vector<std::string>& overrides = {}) {
        Config cfg;
        cfg.doc_ = std::move(doc);
        cfg.validate_known_keys(cfg.doc_, "");
        for (const auto& ov : overrides) cfg.apply_override(ov);
        return cfg;
    }

    static Config load(const std::filesystem::path& path,
                       const std::vector<std::string>& overrides = {}) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file " + path.string());
        nlohmann::json doc;
        try {
            in >> doc;
        } catch (const nlohmann::json::parse_error& e) {
            throw ConfigError("config parse error in " + path.string() + ": " + e.what());
        }
        return from_json(std::move(doc), overrides);
    }

    bool has(const std::string& dotted) const {
        return doc_.contains(nlohmann::json::json_pointer(pointer(dotted)));
    }

    template <typename T>
    T get(const std::string& dotted) const {
        const auto ptr = nlohmann::json::json_pointer(pointer(dotted));
        if (!doc_.contains(ptr)) throw ConfigError("missing config key: " + dotted);
        try {
            return doc_.at(ptr).get<T>();
        } catch (const nlohmann::json::exception&) {
            throw ConfigError("type mismatch for config key: " + dotted);
        }
    }

    template <typename T>
    T get_or(const std::string& dotted, T fallback) const {
        if (!has(dotted)) return fallback;
        return get<T>(dotted);
    }

    const nlohmann::json& raw() const { return doc_; }

    // FNV-1a hash of the canonical serialization.
    std::string hash() const {
        const std::string canon = doc_.dump();
        std::uint64_t h = 1469598103934665603ULL;
        for (unsigned char c : canon) {
            h ^= c;
            h *= 1099511628211ULL;
        }
        char buf[17];
        std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
        return buf;
    }

    void set(const std::string& dotted, nlohmann::json value) {
        if (!schema().count(dotted)) throw ConfigError("unknown config key: " + dotted);
        doc_[nlohmann::json::json_pointer(pointer(dotted))] = std::move(value);
    }

private:
    nlohmann::json doc_;

    static std::string pointer(const std::string& dotted) {
        std::string out = "/";
        for (char c : dotted) out += c == '.' ? '/' : c;
        return out;
    }

    void validate_known_keys(const nlohmann::json& node, const std::string& prefix) const {
        if (!node.is_object()) {
            if (!schema().count(prefix)) throw ConfigError("unknown config key: " + prefix);
            return;
        }
        if (!prefix.empty() && schema().count(prefix)) return;  // leaf object not expected
        for (const auto& [key, value] : node.items()) {
            const std::string path = prefix.empty() ? key : prefix + "." + key;
            if (value.is_object()) {
                validate_known_keys(value, path);
            } else if (!schema().count(path)) {
                throw ConfigError("unknown config key: " + path);
            }
        }
    }

    void apply_override(const std::string& ov) {
        const auto eq = ov.find('=');
        if (eq == std::string::npos)
            throw ConfigError("override must be key=value, got: " + ov);
        const std::string key = ov.substr(0, eq);
        const std::string value = ov.substr(eq + 1);
        if (!schema().count(key)) throw ConfigError("unknown config key: " + key);
        nlohmann::json parsed;
        try {
            parsed = nlohmann::json::parse(value);
        } catch (const nlohmann::json::parse_error&) {
            parsed = value;  // bare string
        }
        doc_[nlohmann::json::json_pointer(pointer(key))] = std::move(parsed);
    }
};

}  // namespace vsseg::cli
