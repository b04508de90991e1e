#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "vsseg/core.hpp"

// Metric suite: confusion-based scalar metrics, rank-based AUC, and the
// vascular connectivity ratio.

namespace vsseg::eval {

struct ConfusionCounts {
    std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
    std::uint64_t total() const { return tp + fp + tn + fn; }
};

inline ConfusionCounts confusion(const VesselMask& pred, const VesselMask& gt) {
    if (pred.pixels.shape != gt.pixels.shape)
        throw ShapeMismatch("confusion: pred " + shape_str(pred.pixels.shape) + " gt " +
                            shape_str(gt.pixels.shape));
    ConfusionCounts c;
    for (std::size_t i = 0; i < gt.pixels.numel(); ++i) {
        const bool p = pred.pixels[i] != 0;
        const bool g = gt.pixels[i] != 0;
        if (p && g) ++c.tp;
        else if (p && !g) ++c.fp;
        else if (!p && g) ++c.fn;
        else ++c.tn;
    }
    return c;
}

struct ScalarMetrics {
    double dsc = 0, acc = 0, sen = 0, spe = 0, iou = 0;
};

// Empty-denominator convention: a metric whose denominator is zero is 1
// (perfectly empty agreement).
inline ScalarMetrics scalar_metrics(const ConfusionCounts& c) {
    const auto ratio = [](double num, double den) { return den == 0.0 ? 1.0 : num / den; };
    ScalarMetrics m;
    m.dsc = ratio(2.0 * c.tp, 2.0 * c.tp + c.fp + c.fn);
    m.acc = ratio(static_cast<double>(c.tp + c.tn), static_cast<double>(c.total()));
    m.sen = ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fn));
    m.spe = ratio(static_cast<double>(c.tn), static_cast<double>(c.tn + c.fp));
    m.iou = ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fp + c.fn));
    return m;
}

// Exact rank-based AUC (Mann-Whitney U with midrank tie handling).
inline double auc(const ProbabilityMap& probs, const VesselMask& gt) {
    if (probs.probs.shape != gt.pixels.shape) throw ShapeMismatch("auc");
    const std::size_t n = gt.pixels.numel();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t(0));
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return probs.probs[a] < probs.probs[b]; });

    std::uint64_t n_pos = 0;
    for (std::size_t i = 0; i < n; ++i) n_pos += gt.pixels[i] != 0;
    const std::uint64_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0)
        throw SingleClassGroundTruth("auc requires both classes in the ground truth");

    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && probs.probs[order[j + 1]] == probs.probs[order[i]]) ++j;
        const double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (std::size_t k = i; k <= j; ++k)
            if (gt.pixels[order[k]] != 0) rank_sum_pos += midrank;
        i = j + 1;
    }
    const double u = rank_sum_pos - static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0) / 2.0;
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

// 8-connected foreground component count.
inline int count_components8(const TensorT<std::uint8_t>& mask) {
    const std::size_t h = mask.dim(0), w = mask.dim(1);
    std::vector<std::uint8_t> seen(h * w, 0);
    std::vector<std::size_t> stack;
    int components = 0;
    for (std::size_t start = 0; start < h * w; ++start) {
        if (mask[start] == 0 || seen[start]) continue;
        ++components;
        seen[start] = 1;
        stack.assign(1, start);
        while (!stack.empty()) {
            const std::size_t cur = stack.back();
            stack.pop_back();
            const std::size_t y = cur / w, x = cur % w;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    if (!dy && !dx) continue;
                    const long ny = static_cast<long>(y) + dy, nx = static_cast<long>(x) + dx;
                    if (ny < 0 || nx < 0 || ny >= static_cast<long>(h) || nx >= static_cast<long>(w))
                        continue;
                    const std::size_t ni = static_cast<std::size_t>(ny) * w + static_cast<std::size_t>(nx);
                    if (mask[ni] != 0 && !seen[ni]) {
                        seen[ni] = 1;
                        stack.push_back(ni);
                    }
                }
        }
    }
    return components;
}

// Ratio of predicted to ground-truth 8-connected components; 1 is ideal,
// larger means fragmentation, 0 means an empty prediction.
inline double vascular_connectivity(const VesselMask& pred, const VesselMask& gt) {
    if (pred.pixels.shape != gt.pixels.shape) throw ShapeMismatch("vascular_connectivity");
    const int gt_components = count_components8(gt.pixels);
    if (gt_components == 0)
        throw EmptyGroundTruth("vascular_connectivity requires a nonempty ground truth");
    const int pred_components = count_components8(pred.pixels);
    if (pred_components == 0) return 0.0;
    return static_cast<double>(pred_components) / static_cast<double>(gt_components);
}

inline VesselMask binarize(const ProbabilityMap& probs, double threshold) {
    VesselMask out{TensorT<std::uint8_t>(probs.probs.shape)};
    for (std::size_t i = 0; i < probs.probs.numel(); ++i)
        out.pixels[i] = probs.probs[i] >= threshold ? 1 : 0;
    return out;
}

inline MetricsReport metrics_for(const ProbabilityMap& probs, const VesselMask& gt,
                                 double threshold = 0.5) {
    const auto pred = binarize(probs, threshold);
    const auto sm = scalar_metrics(confusion(pred, gt));
    MetricsReport r;
    r.dsc = sm.dsc;
    r.acc = sm.acc;
    r.sen = sm.sen;
    r.spe = sm.spe;
    r.iou = sm.iou;
    r.auc = auc(probs, gt);
    r.vc = vascular_connectivity(pred, gt);
    return r;
}

// Unweighted per-sequence mean.
inline MetricsReport mean_report(const std::vector<MetricsReport>& rs) {
    MetricsReport m;
    if (rs.empty()) return m;
    for (const auto& r : rs) {
        m.dsc += r.dsc;
        m.acc += r.acc;
        m.sen += r.sen;
        m.spe += r.spe;
        m.iou += r.iou;
        m.auc += r.auc;
        m.vc += r.vc;
    }
    const auto n = static_cast<double>(rs.size());
    m.dsc /= n;
    m.acc /= n;
    m.sen /= n;
    m.spe /= n;
    m.iou /= n;
    m.auc /= n;
    m.vc /= n;
    return m;
}

inline MetricsReport evaluate_maps(const std::vector<std::pair<ProbabilityMap, VesselMask>>& items,
                                   double threshold = 0.5) {
    std::vector<MetricsReport> per;
    per.reserve(items.size());
    for (const auto& [probs, gt] : items) per.push_back(metrics_for(probs, gt, threshold));
    return mean_report(per);
}

}  // namespace vsseg::eval
