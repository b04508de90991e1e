#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vsseg/config.hpp"
#include "vsseg/plot.hpp"
#include "vsseg/selftrain.hpp"
#include "vsseg/tools/project.hpp"
#include "vsseg/tools/skeleton.hpp"
#include "vsseg/tools/synth.hpp"
#include "vsseg/wss.hpp"

// Experiment orchestration: subcommands, run directories, reports.

namespace vsseg::cli {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Config -> module structs
// ---------------------------------------------------------------------------

inline model::VssNetConfig model_config_from(const Config& cfg) {
    model::VssNetConfig m;
    m.stages = static_cast<std::size_t>(cfg.get_or<int>("model.stages", 4));
    if (cfg.has("model.sfem_channels")) {
        m.sfem_channels.clear();
        for (int c : cfg.get<std::vector<int>>("model.sfem_channels"))
            m.sfem_channels.push_back(static_cast<std::size_t>(c));
    }
    if (cfg.has("model.backbone_channels")) {
        m.backbone_channels.clear();
        for (int c : cfg.get<std::vector<int>>("model.backbone_channels"))
            m.backbone_channels.push_back(static_cast<std::size_t>(c));
    }
    m.gru_kernel = cfg.get_or<int>("model.gru_kernel", 3);
    m.gru_bias = cfg.get_or<bool>("model.gru_bias", false);
    m.seq_len = static_cast<std::size_t>(cfg.get_or<int>("data.sequence_length", 8));
    m.backbone = cfg.get_or<std::string>("model.backbone", "unet");
    return m;
}

inline augment::WeakConfig weak_config_from(const Config& cfg) {
    augment::WeakConfig w;
    w.hflip_prob = cfg.get_or<double>("augment.weak.hflip_prob", 0.5);
    w.vflip_prob = cfg.get_or<double>("augment.weak.vflip_prob", 0.5);
    w.rot90 = cfg.get_or<bool>("augment.weak.rot90", true);
    return w;
}

inline augment::StrongConfig strong_config_from(const Config& cfg) {
    augment::StrongConfig s;
    s.prob = cfg.get_or<double>("augment.strong.prob", 0.5);
    s.cutout_min = cfg.get_or<int>("augment.strong.cutout_min", 8);
    s.cutout_max = cfg.get_or<int>("augment.strong.cutout_max", 24);
    s.noise_sigma = cfg.get_or<double>("augment.strong.noise_sigma", 0.1);
    s.blur_sigma_min = cfg.get_or<double>("augment.strong.blur_min", 0.5);
    s.blur_sigma_max = cfg.get_or<double>("augment.strong.blur_max", 1.5);
    s.elastic_alpha = cfg.get_or<double>("augment.strong.elastic_alpha", 20.0);
    s.elastic_sigma = cfg.get_or<double>("augment.strong.elastic_sigma", 4.0);
    s.contrast_min = cfg.get_or<double>("augment.strong.contrast_min", 0.7);
    s.contrast_max = cfg.get_or<double>("augment.strong.contrast_max", 1.4);
    s.enable_cutout = cfg.get_or<bool>("augment.strong.enable_cutout", true);
    s.enable_elastic = cfg.get_or<bool>("augment.strong.enable_elastic", true);
    return s;
}

inline train::TrainConfig train_config_from(const Config& cfg) {
    train::TrainConfig t;
    t.epochs = cfg.get_or<int>("train.epochs", 100);
    t.steps_per_epoch = cfg.get_or<int>("train.steps_per_epoch", 50);
    t.batch_size = cfg.get_or<int>("train.batch_size", 64);
    t.patch = static_cast<std::size_t>(cfg.get_or<int>("train.patch", 64));
    t.lr = cfg.get_or<double>("train.lr", 5e-4);
    t.weight_decay = cfg.get_or<double>("train.weight_decay", 1e-4);
    t.threshold = cfg.get_or<double>("train.threshold", 0.5);
    t.tile = static_cast<std::size_t>(cfg.get_or<int>("train.tile", 64));
    t.use_strong = cfg.get_or<bool>("train.use_strong", false);
    t.seed = static_cast<std::uint64_t>(cfg.get_or<int>("seed", 42));
    t.weak = weak_config_from(cfg);
    t.strong = strong_config_from(cfg);
    return t;
}

inline wss::SscrConfig sscr_config_from(const Config& cfg) {
    wss::SscrConfig s;
    s.lambda1 = cfg.get_or<double>("wss.lambda1", 1.0);
    s.lambda2 = cfg.get_or<double>("wss.lambda2", 0.5);
    s.normalize_pce = cfg.get_or<bool>("wss.normalize_pce", true);
    s.consistency_on_probs = cfg.get_or<bool>("wss.consistency_on_probs", false);
    s.strong_for_b = cfg.get_or<bool>("wss.strong_for_b", true);
    return s;
}

inline data::SplitSpec split_spec_from(const Config& cfg) {
    data::SplitSpec s;
    s.train = cfg.get_or<double>("data.split.train", 0.6);
    s.val = cfg.get_or<double>("data.split.val", 0.2);
    s.test = cfg.get_or<double>("data.split.test", 0.2);
    s.seed = static_cast<std::uint64_t>(cfg.get_or<int>("seed", 42));
    return s;
}

inline fs::path resolve_data_root(const Config& cfg) {
    if (cfg.has("data.root")) return cfg.get<std::string>("data.root");
    if (const char* env = std::getenv("DIAS_DATA_ROOT")) return env;
    throw ConfigError("missing config key: data.root (or set DIAS_DATA_ROOT)");
}

// ---------------------------------------------------------------------------
// Run directories and reports
// ---------------------------------------------------------------------------

struct RunContext {
    fs::path dir;
    std::ofstream log;

    static RunContext create(const std::string& command, const Config& cfg,
                             const std::string& run_dir_flag) {
        RunContext ctx;
        if (!run_dir_flag.empty()) {
            ctx.dir = run_dir_flag;
        } else {
            const auto name = cfg.get_or<std::string>("name", command);
            char stamp[32];
            const std::time_t now = std::time(nullptr);
            std::tm tm_buf{};
            localtime_r(&now, &tm_buf);
            std::strftime(stamp, sizeof(stamp), "%Y%m%d-%H%M%S", &tm_buf);
            ctx.dir = fs::path("runs") / (std::string(stamp) + "-" + name);
        }
        fs::create_directories(ctx.dir / "checkpoints");
        fs::create_directories(ctx.dir / "plots");
        std::ofstream snap(ctx.dir / "config.snapshot.json");
        snap << cfg.raw().dump(2) << "\n";
        ctx.log.open(ctx.dir / "logs.txt");
        return ctx;
    }

    void line(const std::string& msg) {
        log << msg << "\n";
        log.flush();
        std::cout << msg << "\n";
    }
};

inline nlohmann::json report_json(const MetricsReport& r) {
    return {{"dsc", r.dsc}, {"acc", r.acc}, {"sen", r.sen}, {"spe", r.spe},
            {"iou", r.iou}, {"auc", r.auc}, {"vc", r.vc}};
}

inline nlohmann::json history_json(const std::vector<train::EpochLog>& history) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& e : history)
        out.push_back({{"epoch", e.epoch}, {"loss", e.loss}, {"val_dsc", e.val_dsc}, {"lr", e.lr}});
    return out;
}

inline void write_metrics(const fs::path& dir, const nlohmann::json& metrics) {
    std::ofstream out(dir / "metrics.json");
    out << metrics.dump(2) << "\n";
}

inline void write_report_csv(const fs::path& path,
                             const std::vector<std::pair<std::string, MetricsReport>>& per_seq,
                             const MetricsReport& mean) {
    std::ofstream out(path);
    out << "sequence,dsc,acc,sen,spe,iou,auc,vc\n";
    const auto row = [&](const std::string& id, const MetricsReport& r) {
        out << id << "," << r.dsc << "," << r.acc << "," << r.sen << "," << r.spe << "," << r.iou
            << "," << r.auc << "," << r.vc << "\n";
    };
    for (const auto& [id, r] : per_seq) row(id, r);
    row("mean", mean);
}

// ---------------------------------------------------------------------------
// Dataset writing (synth / gen-scribble / project)
// ---------------------------------------------------------------------------

inline void write_sequence_dir(const fs::path& dir, const DsaSequence& seq,
                               const VesselMask* label) {
    fs::create_directories(dir);
    const std::size_t h = seq.height(), w = seq.width();
    for (std::size_t t = 0; t < seq.num_frames(); ++t) {
        io::GrayImage img;
        img.height = h;
        img.width = w;
        img.bit_depth = 8;
        img.pixels.resize(h * w);
        for (std::size_t i = 0; i < h * w; ++i) {
            const double v = std::clamp(static_cast<double>(seq.frames[t * h * w + i]), 0.0, 255.0);
            img.pixels[i] = static_cast<std::uint16_t>(std::lround(v));
        }
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%03zu.png", t);
        io::write_gray_png(dir / name, img);
    }
    if (label) io::write_gray8_png(dir / "label.png", label->pixels);
}

struct SynthOptions {
    std::string out;
    int num_labeled = 4;
    int num_unlabeled = 0;
    int sequences_per_patient = 1;
    int size = 64;
    int frames = 8;
    int tree_depth = 5;
    double noise = 6.0;
    std::uint64_t seed = 42;
    bool heterogeneous = false;
};

inline tools::SynthSpec draw_spec(const SynthOptions& opt, Rng& rng) {
    tools::SynthSpec spec;
    spec.size = static_cast<std::size_t>(opt.size);
    spec.frames = static_cast<std::size_t>(opt.frames);
    spec.tree_depth = opt.tree_depth;
    spec.noise = opt.noise;
    if (opt.heterogeneous) {
        spec.tree_depth = static_cast<int>(rng.uniform_int(std::max(2, opt.tree_depth - 1),
                                                           opt.tree_depth + 1));
        spec.noise = rng.uniform(0.7 * opt.noise, 1.3 * opt.noise);
        spec.vessel_intensity = rng.uniform(45.0, 105.0);
        spec.background = rng.uniform(170.0, 225.0);
    }
    return spec;
}

inline int cmd_synth(const SynthOptions& opt) {
    Rng rng(opt.seed);
    int patient = 0;
    const auto emit = [&](const fs::path& root, int count, bool labeled) {
        for (int i = 0; i < count; ++patient) {
            char pname[16];
            std::snprintf(pname, sizeof(pname), "p%03d", patient);
            for (int s = 0; s < opt.sequences_per_patient && i < count; ++s, ++i) {
                const auto spec = draw_spec(opt, rng);
                auto [seq, mask] = tools::synthesize_sequence(spec, rng);
                char sname[16];
                std::snprintf(sname, sizeof(sname), "s%03d", s);
                write_sequence_dir(root / pname / sname, seq, labeled ? &mask : nullptr);
            }
        }
    };
    emit(fs::path(opt.out) / "labeled", opt.num_labeled, true);
    emit(fs::path(opt.out) / "unlabeled", opt.num_unlabeled, false);
    std::cout << "wrote " << opt.num_labeled << " labeled and " << opt.num_unlabeled
              << " unlabeled sequences under " << opt.out << "\n";
    return 0;
}

inline int cmd_gen_scribble(const std::string& root, double keep_fraction, std::uint64_t seed) {
    const fs::path labeled = fs::path(root) / "labeled";
    if (!fs::exists(labeled)) throw EmptyDataset("no labeled directory under " + root);
    Rng rng(seed);
    int count = 0;
    for (const auto& patient : data::detail::sorted_subdirs(labeled)) {
        for (const auto& seq_id : data::detail::sorted_subdirs(labeled / patient)) {
            const fs::path dir = labeled / patient / seq_id;
            if (!fs::exists(dir / "label.png")) continue;
            auto mask = data::load_vessel_mask(dir / "label.png");
            auto child = rng.child(static_cast<std::uint64_t>(count));
            auto scribble = tools::generate_rdfa(mask, keep_fraction, child);
            io::write_gray8_png(dir / "scribble.png", scribble.pixels);
            ++count;
        }
    }
    std::cout << "wrote scribbles for " << count << " sequences\n";
    return 0;
}

inline int cmd_project(const std::string& root, const std::string& out, const std::string& mode) {
    const auto pm = tools::projection_mode_from(mode);
    int count = 0;
    for (const char* bucket : {"labeled", "unlabeled"}) {
        const fs::path src_root = fs::path(root) / bucket;
        for (const auto& patient : data::detail::sorted_subdirs(src_root)) {
            for (const auto& seq_id : data::detail::sorted_subdirs(src_root / patient)) {
                const fs::path src = src_root / patient / seq_id;
                auto seq = data::load_sequence(src);
                auto projected = tools::project(seq, pm);
                std::optional<VesselMask> label;
                if (fs::exists(src / "label.png")) label = data::load_vessel_mask(src / "label.png");
                write_sequence_dir(fs::path(out) / bucket / patient / seq_id, projected,
                                   label ? &*label : nullptr);
                if (fs::exists(src / "scribble.png"))
                    fs::copy_file(src / "scribble.png",
                                  fs::path(out) / bucket / patient / seq_id / "scribble.png",
                                  fs::copy_options::overwrite_existing);
                ++count;
            }
        }
    }
    std::cout << "projected " << count << " sequences (" << mode << ") into " << out << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// Training commands
// ---------------------------------------------------------------------------

struct CommonOptions {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string run_dir;
    int seed = -1;          // overrides config seed when >= 0
    std::string device = "cpu";
};

inline Config load_config(const CommonOptions& common) {
    if (common.device != "cpu")
        throw ConfigError("unsupported device '" + common.device + "' (cpu only)");
    auto overrides = common.overrides;
    if (common.seed >= 0) overrides.push_back("seed=" + std::to_string(common.seed));
    if (common.config_path.empty()) return Config::from_json(nlohmann::json::object(), overrides);
    return Config::load(common.config_path, overrides);
}

struct LoadedSplits {
    train::Dataset train_set, val_set, test_set, unlabeled_set;
};

inline LoadedSplits load_splits(const Config& cfg, train::LabelKind train_kind) {
    const auto root = resolve_data_root(cfg);
    auto index = data::build_index(root, split_spec_from(cfg));
    const auto seq_len = static_cast<std::size_t>(cfg.get_or<int>("data.sequence_length", 8));
    LoadedSplits out;
    out.train_set = train::load_split(index, data::Split::train, seq_len, train_kind);
    out.val_set = train::load_split(index, data::Split::val, seq_len, train::LabelKind::dense);
    out.test_set = train::load_split(index, data::Split::test, seq_len, train::LabelKind::dense);
    out.unlabeled_set =
        train::load_split(index, data::Split::unlabeled, seq_len, train::LabelKind::none);
    return out;
}

inline std::pair<std::vector<std::pair<std::string, MetricsReport>>, MetricsReport>
evaluate_split(const model::VssNet<float>& net, const train::Dataset& split, std::size_t tile,
               double threshold) {
    std::vector<std::pair<std::string, MetricsReport>> per;
    std::vector<MetricsReport> all;
    for (const auto& item : split.items) {
        auto probs = infer::tiled_inference(net, item.seq, tile);
        auto r = eval::metrics_for(probs, VesselMask{item.label}, threshold);
        per.emplace_back(item.id, r);
        all.push_back(r);
    }
    return {per, eval::mean_report(all)};
}

inline int cmd_train_fss(const CommonOptions& common) {
    auto cfg = load_config(common);
    auto ctx = RunContext::create("train-fss", cfg, common.run_dir);
    auto splits = load_splits(cfg, train::LabelKind::dense);
    const auto tcfg = train_config_from(cfg);

    Rng mrng(tcfg.seed);
    model::VssNet<float> net(model_config_from(cfg), mrng);
    ctx.line("train-fss: " + std::to_string(splits.train_set.size()) + " train / " +
             std::to_string(splits.val_set.size()) + " val sequences");
    auto result = train::train_fss(net, splits.train_set, splits.val_set, tcfg);
    for (const auto& e : result.history)
        ctx.line("epoch " + std::to_string(e.epoch) + " loss " + std::to_string(e.loss) +
                 " val_dsc " + std::to_string(e.val_dsc));

    nlohmann::json meta{{"architecture", "vssnet"},
                        {"config_hash", cfg.hash()},
                        {"epoch", result.best_epoch},
                        {"val_dsc", result.best_val_dsc}};
    model::save_checkpoint(ctx.dir / "checkpoints" / "best.ckpt", net.named_params(), meta);

    nlohmann::json metrics{{"command", "train-fss"},
                           {"config_hash", cfg.hash()},
                           {"best_val_dsc", result.best_val_dsc},
                           {"best_epoch", result.best_epoch},
                           {"history", history_json(result.history)}};
    if (!splits.test_set.empty()) {
        auto [per, mean] = evaluate_split(net, splits.test_set, tcfg.tile, tcfg.threshold);
        nlohmann::json per_json = nlohmann::json::array();
        for (const auto& [id, r] : per) per_json.push_back({{"sequence", id}, {"metrics", report_json(r)}});
        metrics["test"] = {{"per_sequence", per_json}, {"mean", report_json(mean)}};
    }
    write_metrics(ctx.dir, metrics);
    ctx.line("best val DSC " + std::to_string(result.best_val_dsc) + " at epoch " +
             std::to_string(result.best_epoch));
    return 0;
}

inline int cmd_train_wss(const CommonOptions& common) {
    auto cfg = load_config(common);
    auto ctx = RunContext::create("train-wss", cfg, common.run_dir);
    auto splits = load_splits(cfg, train::LabelKind::scribble);
    const auto tcfg = train_config_from(cfg);
    const auto scfg = sscr_config_from(cfg);

    Rng seed_a(tcfg.seed * 2 + 1), seed_b(tcfg.seed * 2 + 2);
    model::VssNet<float> net_a(model_config_from(cfg), seed_a);
    model::VssNet<float> net_b(model_config_from(cfg), seed_b);
    ctx.line("train-wss: " + std::to_string(splits.train_set.size()) + " scribble sequences");
    auto result = wss::train_wss(net_a, net_b, splits.train_set, splits.val_set, tcfg, scfg);
    for (const auto& e : result.net_a.history)
        ctx.line("epoch " + std::to_string(e.epoch) + " loss " + std::to_string(e.loss) +
                 " val_dsc " + std::to_string(e.val_dsc));

    nlohmann::json meta{{"architecture", "vssnet"},
                        {"config_hash", cfg.hash()},
                        {"epoch", result.net_a.best_epoch},
                        {"val_dsc", result.net_a.best_val_dsc}};
    model::save_checkpoint(ctx.dir / "checkpoints" / "best.ckpt", net_a.named_params(), meta);

    nlohmann::json metrics{{"command", "train-wss"},
                           {"config_hash", cfg.hash()},
                           {"best_val_dsc", result.net_a.best_val_dsc},
                           {"best_epoch", result.net_a.best_epoch},
                           {"history", history_json(result.net_a.history)}};
    if (!result.last_bundles.empty()) {
        const auto& b = result.last_bundles.back();
        metrics["last_losses"] = {{"l_scr", b.l_scr}, {"l_cps", b.l_cps}, {"l_con", b.l_con},
                                  {"l_total", b.l_total}};
    }
    if (!splits.test_set.empty()) {
        auto [per, mean] = evaluate_split(net_a, splits.test_set, tcfg.tile, tcfg.threshold);
        nlohmann::json per_json = nlohmann::json::array();
        for (const auto& [id, r] : per) per_json.push_back({{"sequence", id}, {"metrics", report_json(r)}});
        metrics["test"] = {{"per_sequence", per_json}, {"mean", report_json(mean)}};
    }
    write_metrics(ctx.dir, metrics);
    ctx.line("best val DSC (net A) " + std::to_string(result.net_a.best_val_dsc));
    return 0;
}

struct RpstOptions {
    int labeled_count = 0;  // 0 = all
    int unlabeled_count = 0;
    int iterations = 1;
    double p = 0.5;
};

inline int cmd_rpst(const CommonOptions& common, const RpstOptions& opt) {
    auto cfg = load_config(common);
    auto ctx = RunContext::create("rpst", cfg, common.run_dir);
    auto splits = load_splits(cfg, train::LabelKind::dense);

    selftrain::RpstConfig rcfg;
    rcfg.p = opt.p;
    rcfg.iterations = opt.iterations;
    rcfg.threshold = cfg.get_or<double>("rpst.threshold", 0.5);
    rcfg.strong_on_labeled = cfg.get_or<bool>("rpst.strong_on_labeled", true);
    rcfg.student_steps_per_epoch = cfg.get_or<int>("rpst.student_steps_per_epoch", 0);
    rcfg.trainer = train_config_from(cfg);

    // deterministic subset selection after a seeded shuffle
    auto pick = [&](train::Dataset set, int count, std::uint64_t tag) {
        if (count <= 0 || count >= static_cast<int>(set.size())) return set;
        Rng rng(rcfg.trainer.seed + tag);
        for (std::size_t i = set.items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
            std::swap(set.items[i - 1], set.items[j]);
        }
        set.items.resize(static_cast<std::size_t>(count));
        return set;
    };
    auto labeled = pick(splits.train_set, opt.labeled_count, 11);
    auto unlabeled = pick(splits.unlabeled_set, opt.unlabeled_count, 13);
    ctx.line("rpst: " + std::to_string(labeled.size()) + " labeled, " +
             std::to_string(unlabeled.size()) + " unlabeled, iterations " +
             std::to_string(rcfg.iterations));

    const auto mcfg = model_config_from(cfg);
    auto outcome = selftrain::rpst_train(labeled, unlabeled, splits.val_set, rcfg,
                                         [&](std::uint64_t s) {
                                             Rng r(s);
                                             return model::VssNet<float>(mcfg, r);
                                         });

    nlohmann::json meta{{"architecture", "vssnet"},
                        {"config_hash", cfg.hash()},
                        {"epoch", outcome.student_results.back().best_epoch},
                        {"val_dsc", outcome.student_results.back().best_val_dsc}};
    model::save_checkpoint(ctx.dir / "checkpoints" / "student.ckpt", outcome.student.named_params(),
                           meta);

    nlohmann::json students = nlohmann::json::array();
    for (const auto& r : outcome.student_results)
        students.push_back({{"best_val_dsc", r.best_val_dsc}, {"best_epoch", r.best_epoch}});
    nlohmann::json metrics{{"command", "rpst"},
                           {"config_hash", cfg.hash()},
                           {"teacher_val_dsc", outcome.teacher_result.best_val_dsc},
                           {"students", students},
                           {"pool_generation", outcome.pool_generation}};
    if (!splits.test_set.empty()) {
        auto [per, mean] = evaluate_split(outcome.student, splits.test_set, rcfg.trainer.tile,
                                          rcfg.trainer.threshold);
        nlohmann::json per_json = nlohmann::json::array();
        for (const auto& [id, r] : per) per_json.push_back({{"sequence", id}, {"metrics", report_json(r)}});
        metrics["test"] = {{"per_sequence", per_json}, {"mean", report_json(mean)}};
    }
    write_metrics(ctx.dir, metrics);
    ctx.line("teacher val DSC " + std::to_string(outcome.teacher_result.best_val_dsc) +
             ", final student val DSC " +
             std::to_string(outcome.student_results.back().best_val_dsc));
    return 0;
}

// ---------------------------------------------------------------------------
// Evaluation and plotting
// ---------------------------------------------------------------------------

struct EvalOptions {
    std::string checkpoint;
    std::string maps;
    std::string split = "test";
    bool csv = false;
};

inline data::Split split_from(const std::string& name) {
    if (name == "train") return data::Split::train;
    if (name == "val") return data::Split::val;
    if (name == "test") return data::Split::test;
    throw ConfigError("unknown split: " + name);
}

inline int cmd_eval(const CommonOptions& common, const EvalOptions& opt) {
    auto cfg = load_config(common);
    auto ctx = RunContext::create("eval", cfg, common.run_dir);
    auto splits = load_splits(cfg, train::LabelKind::dense);
    const train::Dataset* split = &splits.test_set;
    if (opt.split == "train") split = &splits.train_set;
    else if (opt.split == "val") split = &splits.val_set;
    if (split->empty()) throw EmptyDataset("split '" + opt.split + "' has no sequences");

    const auto threshold = cfg.get_or<double>("eval.threshold", 0.5);
    const auto tile = static_cast<std::size_t>(cfg.get_or<int>("train.tile", 64));

    std::vector<std::pair<std::string, MetricsReport>> per;
    std::vector<MetricsReport> all;
    std::string checkpoint_id = "none";
    if (!opt.maps.empty()) {
        // probability maps on disk: <maps>/<patient>/<sequence>.png, gray
        // 8/16-bit scaled to [0,1]
        for (const auto& item : split->items) {
            const auto slash = item.id.find('/');
            const fs::path map_path =
                fs::path(opt.maps) / item.id.substr(0, slash) / (item.id.substr(slash + 1) + ".png");
            auto img = io::read_gray_png(map_path);
            if (img.height != item.label.dim(0) || img.width != item.label.dim(1))
                throw ShapeMismatch("probability map " + map_path.string());
            ProbabilityMap probs{Tensor({img.height, img.width})};
            const double denom = img.bit_depth == 16 ? 65535.0 : 255.0;
            for (std::size_t i = 0; i < probs.probs.numel(); ++i)
                probs.probs[i] = static_cast<float>(img.pixels[i] / denom);
            auto r = eval::metrics_for(probs, VesselMask{item.label}, threshold);
            per.emplace_back(item.id, r);
            all.push_back(r);
        }
        checkpoint_id = "maps:" + opt.maps;
    } else if (!opt.checkpoint.empty()) {
        auto ckpt = model::load_checkpoint<float>(opt.checkpoint);
        Rng mrng(1);
        model::VssNet<float> net(model_config_from(cfg), mrng);
        model::load_into(ckpt, net.named_params());
        per = evaluate_split(net, *split, tile, threshold).first;
        for (const auto& [id, r] : per) all.push_back(r);
        checkpoint_id = opt.checkpoint;
    } else {
        throw ConfigError("eval requires --checkpoint or --maps");
    }
    const auto mean = eval::mean_report(all);

    nlohmann::json per_json = nlohmann::json::array();
    for (const auto& [id, r] : per) per_json.push_back({{"sequence", id}, {"metrics", report_json(r)}});
    nlohmann::json metrics{{"command", "eval"},
                           {"config_hash", cfg.hash()},
                           {"checkpoint_id", checkpoint_id},
                           {"split", opt.split},
                           {"per_sequence", per_json},
                           {"mean", report_json(mean)}};
    write_metrics(ctx.dir, metrics);
    if (opt.csv) write_report_csv(ctx.dir / "report.csv", per, mean);
    ctx.line("eval " + opt.split + ": mean DSC " + std::to_string(mean.dsc) + ", AUC " +
             std::to_string(mean.auc) + ", VC " + std::to_string(mean.vc));
    return 0;
}

struct PlotOptions {
    std::string run;
    int max_overlays = 4;
};

inline int cmd_plot(const CommonOptions& common, const PlotOptions& opt) {
    const fs::path run_dir = opt.run;
    std::ifstream in(run_dir / "metrics.json");
    if (!in) throw IoError("no metrics.json under " + run_dir.string());
    nlohmann::json metrics;
    in >> metrics;
    fs::create_directories(run_dir / "plots");

    if (metrics.contains("history")) {
        std::vector<double> loss, dsc;
        for (const auto& e : metrics["history"]) {
            loss.push_back(e["loss"].get<double>());
            dsc.push_back(e["val_dsc"].get<double>());
        }
        io::write_rgb_png(run_dir / "plots" / "loss.png", plot::render_curves({{"loss", loss}}));
        io::write_rgb_png(run_dir / "plots" / "val_dsc.png",
                          plot::render_curves({{"val_dsc", dsc}}));
    }

    // overlays need a config + checkpoint + dataset
    const fs::path snapshot = run_dir / "config.snapshot.json";
    fs::path ckpt_path = run_dir / "checkpoints" / "best.ckpt";
    if (!fs::exists(ckpt_path)) ckpt_path = run_dir / "checkpoints" / "student.ckpt";
    if (fs::exists(snapshot) && fs::exists(ckpt_path)) {
        CommonOptions snap_common = common;
        snap_common.config_path = snapshot.string();
        auto cfg = load_config(snap_common);
        auto splits = load_splits(cfg, train::LabelKind::dense);
        const train::Dataset& split = splits.test_set.empty() ? splits.val_set : splits.test_set;
        const auto tile = static_cast<std::size_t>(cfg.get_or<int>("train.tile", 64));
        const auto threshold = cfg.get_or<double>("train.threshold", 0.5);

        auto ckpt = model::load_checkpoint<float>(ckpt_path);
        Rng mrng(1);
        model::VssNet<float> net(model_config_from(cfg), mrng);
        model::load_into(ckpt, net.named_params());
        int count = 0;
        for (const auto& item : split.items) {
            if (count >= opt.max_overlays) break;
            auto probs = infer::tiled_inference(net, item.seq, tile);
            auto pred = eval::binarize(probs, threshold);
            auto overlay = plot::render_overlay(item.seq, pred, VesselMask{item.label});
            std::string name = item.id;
            std::replace(name.begin(), name.end(), '/', '_');
            io::write_rgb_png(run_dir / "plots" / ("overlay_" + name + ".png"), overlay);
            ++count;
        }
    }
    std::cout << "plots written under " << (run_dir / "plots").string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

inline int run(std::vector<std::string> args) {
    CLI::App app{"vessel sequence segmentation toolkit"};
    app.require_subcommand(1);

    CommonOptions common;
    SynthOptions synth_opt;
    RpstOptions rpst_opt;
    EvalOptions eval_opt;
    PlotOptions plot_opt;
    std::string gs_root;
    double gs_keep = 0.5;
    std::uint64_t gs_seed = 42;
    std::string pr_root, pr_out, pr_mode = "min";

    const auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", common.config_path, "config file (JSON)");
        cmd->add_option("--override", common.overrides, "dotted-path override key=value")
            ->take_all();
        cmd->add_option("--run-dir", common.run_dir, "run directory (default runs/<stamp>-<name>)");
        cmd->add_option("--seed", common.seed, "override config seed");
        cmd->add_option("--device", common.device, "compute device (cpu)");
    };

    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    synth->add_option("--out", synth_opt.out, "output dataset root")->required();
    synth->add_option("--num-labeled", synth_opt.num_labeled);
    synth->add_option("--num-unlabeled", synth_opt.num_unlabeled);
    synth->add_option("--sequences-per-patient", synth_opt.sequences_per_patient);
    synth->add_option("--size", synth_opt.size);
    synth->add_option("--frames", synth_opt.frames);
    synth->add_option("--tree-depth", synth_opt.tree_depth);
    synth->add_option("--noise", synth_opt.noise);
    synth->add_option("--seed", synth_opt.seed);
    synth->add_flag("--heterogeneous", synth_opt.heterogeneous,
                    "vary contrast/noise/depth per sequence");

    auto* gs = app.add_subcommand("gen-scribble", "derive scribbles from full annotations");
    gs->add_option("--root", gs_root, "dataset root")->required();
    gs->add_option("--keep-fraction", gs_keep);
    gs->add_option("--seed", gs_seed);

    auto* pr = app.add_subcommand("project", "write a projected copy of a dataset");
    pr->add_option("--root", pr_root)->required();
    pr->add_option("--out", pr_out)->required();
    pr->add_option("--mode", pr_mode, "first|last|first_last|mean|min|full");

    auto* tf = app.add_subcommand("train-fss", "fully-supervised training");
    add_common(tf);
    auto* tw = app.add_subcommand("train-wss", "scribble-supervised SSCR training");
    add_common(tw);
    auto* rp = app.add_subcommand("rpst", "random patch-based self-training");
    add_common(rp);
    rp->add_option("--labeled-count", rpst_opt.labeled_count, "labeled sequences to use (0 = all)");
    rp->add_option("--unlabeled-count", rpst_opt.unlabeled_count,
                   "unlabeled sequences to use (0 = all)");
    rp->add_option("--iterations", rpst_opt.iterations);
    rp->add_option("--p", rpst_opt.p, "pseudo-label slot probability");
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint or probability maps");
    add_common(ev);
    ev->add_option("--checkpoint", eval_opt.checkpoint);
    ev->add_option("--maps", eval_opt.maps, "directory of probability-map PNGs");
    ev->add_option("--split", eval_opt.split, "train|val|test");
    ev->add_flag("--csv", eval_opt.csv, "also write report.csv");
    auto* pl = app.add_subcommand("plot", "render metric curves and overlays for a run");
    add_common(pl);
    pl->add_option("--run", plot_opt.run, "run directory")->required();
    pl->add_option("--max-overlays", plot_opt.max_overlays);

    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (synth->parsed()) return cmd_synth(synth_opt);
        if (gs->parsed()) return cmd_gen_scribble(gs_root, gs_keep, gs_seed);
        if (pr->parsed()) return cmd_project(pr_root, pr_out, pr_mode);
        if (tf->parsed()) return cmd_train_fss(common);
        if (tw->parsed()) return cmd_train_wss(common);
        if (rp->parsed()) return cmd_rpst(common, rpst_opt);
        if (ev->parsed()) return cmd_eval(common, eval_opt);
        if (pl->parsed()) return cmd_plot(common, plot_opt);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace vsseg::cli
