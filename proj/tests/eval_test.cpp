#include <gtest/gtest.h>

#include "test_support.hpp"
#include "vsseg/eval.hpp"

using namespace vsseg;

namespace {

VesselMask random_mask(std::size_t h, std::size_t w, Rng& rng, double p = 0.3) {
    VesselMask m{TensorT<std::uint8_t>({h, w})};
    for (auto& v : m.pixels.data) v = rng.coin(p) ? 1 : 0;
    return m;
}

// Independent oracle: exhaustive pixel count.
eval::ConfusionCounts brute_confusion(const VesselMask& pred, const VesselMask& gt) {
    eval::ConfusionCounts c;
    for (std::size_t y = 0; y < gt.height(); ++y)
        for (std::size_t x = 0; x < gt.width(); ++x) {
            const int p = pred.pixels.at(y, x), g = gt.pixels.at(y, x);
            c.tp += (p == 1 && g == 1);
            c.fp += (p == 1 && g == 0);
            c.fn += (p == 0 && g == 1);
            c.tn += (p == 0 && g == 0);
        }
    return c;
}

// Independent oracle: ROC curve swept over all distinct thresholds,
// integrated with the trapezoid rule.
double trapezoid_auc(const ProbabilityMap& probs, const VesselMask& gt) {
    std::vector<float> thresholds(probs.probs.data.begin(), probs.probs.data.end());
    std::sort(thresholds.begin(), thresholds.end());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

    double n_pos = 0, n_neg = 0;
    for (std::size_t i = 0; i < gt.pixels.numel(); ++i)
        (gt.pixels[i] ? n_pos : n_neg) += 1.0;

    // sweep from the highest threshold (strictest) down
    std::vector<std::pair<double, double>> roc;  // (fpr, tpr)
    roc.emplace_back(0.0, 0.0);
    for (auto it = thresholds.rbegin(); it != thresholds.rend(); ++it) {
        double tp = 0, fp = 0;
        for (std::size_t i = 0; i < gt.pixels.numel(); ++i) {
            if (probs.probs[i] >= *it) (gt.pixels[i] ? tp : fp) += 1.0;
        }
        roc.emplace_back(fp / n_neg, tp / n_pos);
    }
    roc.emplace_back(1.0, 1.0);
    double area = 0.0;
    for (std::size_t i = 1; i < roc.size(); ++i)
        area += (roc[i].first - roc[i - 1].first) * (roc[i].second + roc[i - 1].second) / 2.0;
    return area;
}

// Independent oracle: recursive 8-connected flood fill.
void flood(const TensorT<std::uint8_t>& mask, std::vector<std::uint8_t>& seen, long y, long x) {
    const long h = static_cast<long>(mask.dim(0)), w = static_cast<long>(mask.dim(1));
    if (y < 0 || x < 0 || y >= h || x >= w) return;
    const std::size_t i = static_cast<std::size_t>(y) * w + x;
    if (!mask[i] || seen[i]) return;
    seen[i] = 1;
    for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
            if (dy || dx) flood(mask, seen, y + dy, x + dx);
}

int flood_count(const TensorT<std::uint8_t>& mask) {
    std::vector<std::uint8_t> seen(mask.numel(), 0);
    int count = 0;
    for (std::size_t i = 0; i < mask.numel(); ++i) {
        if (mask[i] && !seen[i]) {
            ++count;
            flood(mask, seen, static_cast<long>(i / mask.dim(1)), static_cast<long>(i % mask.dim(1)));
        }
    }
    return count;
}

TEST(Confusion, PerfectAndInverted) {
    Rng rng(1);
    auto gt = random_mask(8, 8, rng);
    auto c = eval::confusion(gt, gt);
    EXPECT_EQ(c.fp, 0u);
    EXPECT_EQ(c.fn, 0u);

    VesselMask inv{TensorT<std::uint8_t>({8, 8})};
    for (std::size_t i = 0; i < 64; ++i) inv.pixels[i] = gt.pixels[i] ? 0 : 1;
    auto ci = eval::confusion(inv, gt);
    EXPECT_EQ(ci.tp, 0u);
    EXPECT_EQ(ci.tn, 0u);
}

TEST(Confusion, MatchesBruteForce) {
    Rng rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        auto pred = random_mask(4, 4, rng);
        auto gt = random_mask(4, 4, rng);
        auto a = eval::confusion(pred, gt);
        auto b = brute_confusion(pred, gt);
        EXPECT_EQ(a.tp, b.tp);
        EXPECT_EQ(a.fp, b.fp);
        EXPECT_EQ(a.tn, b.tn);
        EXPECT_EQ(a.fn, b.fn);
        EXPECT_EQ(a.total(), 16u);
    }
}

TEST(ScalarMetrics, HandArithmetic) {
    eval::ConfusionCounts c{6, 2, 6, 2};
    auto m = eval::scalar_metrics(c);
    EXPECT_DOUBLE_EQ(m.dsc, 12.0 / 16.0);
    EXPECT_DOUBLE_EQ(m.iou, 0.6);
    EXPECT_DOUBLE_EQ(m.sen, 0.75);
    EXPECT_DOUBLE_EQ(m.spe, 0.75);
    EXPECT_DOUBLE_EQ(m.acc, 0.75);
}

TEST(ScalarMetrics, PerfectPrediction) {
    eval::ConfusionCounts c{10, 0, 50, 0};
    auto m = eval::scalar_metrics(c);
    EXPECT_EQ(m.dsc, 1.0);
    EXPECT_EQ(m.acc, 1.0);
    EXPECT_EQ(m.sen, 1.0);
    EXPECT_EQ(m.spe, 1.0);
    EXPECT_EQ(m.iou, 1.0);
}

TEST(ScalarMetrics, EmptyAgreementConvention) {
    eval::ConfusionCounts c{0, 0, 16, 0};  // all-background pred on all-background gt
    auto m = eval::scalar_metrics(c);
    EXPECT_EQ(m.dsc, 1.0);
    EXPECT_EQ(m.sen, 1.0);
    EXPECT_EQ(m.iou, 1.0);
}

TEST(ScalarMetrics, DscIouIdentity) {
    Rng rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        eval::ConfusionCounts c{static_cast<std::uint64_t>(rng.uniform_int(1, 50)),
                                static_cast<std::uint64_t>(rng.uniform_int(0, 50)),
                                static_cast<std::uint64_t>(rng.uniform_int(0, 50)),
                                static_cast<std::uint64_t>(rng.uniform_int(0, 50))};
        auto m = eval::scalar_metrics(c);
        EXPECT_NEAR(m.dsc, 2.0 * m.iou / (1.0 + m.iou), 1e-12);
    }
}

TEST(ScalarMetrics, PermutationInvariance) {
    Rng rng(4);
    auto pred = random_mask(6, 6, rng);
    auto gt = random_mask(6, 6, rng);
    auto before = eval::scalar_metrics(eval::confusion(pred, gt));

    // simultaneous permutation: rotate both by 90 degrees
    VesselMask pred_r{TensorT<std::uint8_t>({6, 6})}, gt_r{TensorT<std::uint8_t>({6, 6})};
    for (std::size_t y = 0; y < 6; ++y)
        for (std::size_t x = 0; x < 6; ++x) {
            pred_r.pixels.at(x, 5 - y) = pred.pixels.at(y, x);
            gt_r.pixels.at(x, 5 - y) = gt.pixels.at(y, x);
        }
    auto after = eval::scalar_metrics(eval::confusion(pred_r, gt_r));
    EXPECT_EQ(before.dsc, after.dsc);
    EXPECT_EQ(before.acc, after.acc);
}

TEST(Auc, PerfectSeparation) {
    ProbabilityMap p{Tensor({2, 3})};
    VesselMask gt{TensorT<std::uint8_t>({2, 3})};
    const float probs[6] = {0.9f, 0.8f, 0.7f, 0.2f, 0.1f, 0.3f};
    const std::uint8_t labels[6] = {1, 1, 1, 0, 0, 0};
    for (int i = 0; i < 6; ++i) {
        p.probs[i] = probs[i];
        gt.pixels[i] = labels[i];
    }
    EXPECT_DOUBLE_EQ(eval::auc(p, gt), 1.0);
}

TEST(Auc, AllTiedGivesHalf) {
    ProbabilityMap p{Tensor({4, 4}, 0.5f)};
    VesselMask gt{TensorT<std::uint8_t>({4, 4})};
    for (std::size_t i = 0; i < 8; ++i) gt.pixels[i] = 1;
    EXPECT_DOUBLE_EQ(eval::auc(p, gt), 0.5);
}

TEST(Auc, SixPixelHandCase) {
    ProbabilityMap p{Tensor({2, 3})};
    VesselMask gt{TensorT<std::uint8_t>({2, 3})};
    const float probs[6] = {0.9f, 0.4f, 0.4f, 0.6f, 0.1f, 0.4f};
    const std::uint8_t labels[6] = {1, 1, 0, 0, 0, 1};
    for (int i = 0; i < 6; ++i) {
        p.probs[i] = probs[i];
        gt.pixels[i] = labels[i];
    }
    EXPECT_NEAR(eval::auc(p, gt), trapezoid_auc(p, gt), 1e-9);
}

TEST(Auc, MatchesTrapezoidOracleRandom) {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        ProbabilityMap p{Tensor({8, 8})};
        // quantized probabilities force plenty of ties
        for (auto& v : p.probs.data) v = static_cast<float>(rng.uniform_int(0, 10)) / 10.0f;
        auto gt = random_mask(8, 8, rng);
        bool has_pos = false, has_neg = false;
        for (auto v : gt.pixels.data) (v ? has_pos : has_neg) = true;
        if (!has_pos || !has_neg) continue;
        EXPECT_NEAR(eval::auc(p, gt), trapezoid_auc(p, gt), 1e-9);
    }
}

TEST(Auc, MonotoneTransformInvariance) {
    Rng rng(6);
    ProbabilityMap p{Tensor({8, 8})};
    for (auto& v : p.probs.data) v = static_cast<float>(rng.uniform());
    auto gt = random_mask(8, 8, rng);
    ProbabilityMap q{Tensor({8, 8})};
    for (std::size_t i = 0; i < 64; ++i) q.probs[i] = p.probs[i] * p.probs[i];  // strictly monotone on [0,1]
    EXPECT_NEAR(eval::auc(p, gt), eval::auc(q, gt), 1e-12);
}

TEST(Auc, SingleClassThrows) {
    ProbabilityMap p{Tensor({2, 2}, 0.5f)};
    VesselMask gt{TensorT<std::uint8_t>({2, 2}, 0)};
    EXPECT_THROW(eval::auc(p, gt), SingleClassGroundTruth);
}

TEST(Vc, IdentityIsOne) {
    Rng rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        auto m = random_mask(10, 10, rng, 0.2);
        bool any = false;
        for (auto v : m.pixels.data) any = any || v;
        if (!any) continue;
        EXPECT_DOUBLE_EQ(eval::vascular_connectivity(m, m), 1.0);
    }
}

TEST(Vc, ShatteredPrediction) {
    // gt: two horizontal bars (2 components); pred: same bars cut into 10 pieces
    VesselMask gt{TensorT<std::uint8_t>({9, 20}, 0)};
    for (std::size_t x = 0; x < 20; ++x) {
        gt.pixels.at(1, x) = 1;
        gt.pixels.at(7, x) = 1;
    }
    VesselMask pred = gt;
    for (std::size_t x = 3; x < 20; x += 4) {
        pred.pixels.at(1, x) = 0;
        pred.pixels.at(7, x) = 0;
    }
    EXPECT_EQ(flood_count(gt.pixels), 2);
    EXPECT_EQ(flood_count(pred.pixels), 10);
    EXPECT_DOUBLE_EQ(eval::vascular_connectivity(pred, gt), 5.0);
}

TEST(Vc, ComponentCountMatchesFloodFillOracle) {
    Rng rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        auto m = random_mask(16, 16, rng, 0.35);
        EXPECT_EQ(eval::count_components8(m.pixels), flood_count(m.pixels));
    }
}

TEST(Vc, EmptyPredictionIsZeroEmptyGtThrows) {
    VesselMask gt{TensorT<std::uint8_t>({4, 4}, 0)};
    gt.pixels.at(1, 1) = 1;
    VesselMask empty{TensorT<std::uint8_t>({4, 4}, 0)};
    EXPECT_DOUBLE_EQ(eval::vascular_connectivity(empty, gt), 0.0);
    EXPECT_THROW(eval::vascular_connectivity(gt, empty), EmptyGroundTruth);
}

TEST(Evaluate, OracleMapsGivePerfectScores) {
    Rng rng(9);
    auto gt = random_mask(16, 16, rng);
    gt.pixels.at(0, 0) = 1;  // ensure both classes
    gt.pixels.at(0, 1) = 0;
    ProbabilityMap p{Tensor({16, 16})};
    for (std::size_t i = 0; i < 256; ++i) p.probs[i] = gt.pixels[i] ? 1.0f : 0.0f;
    auto r = eval::metrics_for(p, gt);
    EXPECT_EQ(r.dsc, 1.0);
    EXPECT_EQ(r.auc, 1.0);
    EXPECT_EQ(r.vc, 1.0);

    ProbabilityMap inv{Tensor({16, 16})};
    for (std::size_t i = 0; i < 256; ++i) inv.probs[i] = 1.0f - p.probs[i];
    auto ri = eval::metrics_for(inv, gt);
    EXPECT_EQ(ri.dsc, 0.0);
    EXPECT_EQ(ri.auc, 0.0);
}

TEST(Evaluate, MacroMeanAggregation) {
    MetricsReport a, b;
    a.dsc = 0.6;
    b.dsc = 0.8;
    auto m = eval::mean_report({a, b});
    EXPECT_NEAR(m.dsc, 0.7, 1e-12);
}

}  // namespace
