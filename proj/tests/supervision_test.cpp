#include <gtest/gtest.h>

#include "test_support.hpp"
#include "vsseg/supervision.hpp"

using namespace vsseg;
using vsseg::test::random_dtensor;

namespace {

// Normalized random probability map [2,H,W].
Tensor random_probs(std::size_t h, std::size_t w, Rng& rng) {
    Tensor p({2, h, w});
    for (std::size_t i = 0; i < h * w; ++i) {
        const auto v = static_cast<float>(rng.uniform(0.02, 0.98));
        p[i] = 1.0f - v;
        p[h * w + i] = v;
    }
    return p;
}

TEST(DiceCe, PerfectPredictionNearZero) {
    VesselMask gt{TensorT<std::uint8_t>({4, 4}, 0)};
    gt.pixels.at(1, 1) = 1;
    gt.pixels.at(2, 2) = 1;
    Tensor p({2, 4, 4});
    for (std::size_t i = 0; i < 16; ++i) {
        p[i] = gt.pixels[i] ? 0.0f : 1.0f;
        p[16 + i] = gt.pixels[i] ? 1.0f : 0.0f;
    }
    EXPECT_LT(supervision::dice_ce_loss(p, gt), 1e-5);
}

TEST(DiceCe, UniformPredictionGivesLn2CeTerm) {
    Rng rng(1);
    VesselMask gt{TensorT<std::uint8_t>({4, 4}, 0)};
    for (auto& v : gt.pixels.data) v = rng.coin() ? 1 : 0;
    Tensor p({2, 4, 4}, 0.5f);
    // total = 0.5*dice + 0.5*ce; ce = ln 2 exactly
    std::size_t tsum = 0;
    for (auto v : gt.pixels.data) tsum += v;
    const double smooth = 1e-5;
    const double dice = 1.0 - (2.0 * 0.5 * tsum + smooth) / (0.5 * 16 + tsum + smooth);
    EXPECT_NEAR(supervision::dice_ce_loss(p, gt), 0.5 * dice + 0.5 * std::log(2.0), 1e-6);
}

TEST(DiceCe, MatchesScalarOracleOnRandomCase) {
    Rng rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        auto p = random_probs(4, 4, rng);
        VesselMask gt{TensorT<std::uint8_t>({4, 4}, 0)};
        for (auto& v : gt.pixels.data) v = rng.coin() ? 1 : 0;

        // independent scalar evaluation of the definition
        double inter = 0, psum = 0, tsum = 0, ce = 0;
        for (std::size_t i = 0; i < 16; ++i) {
            inter += p[16 + i] * gt.pixels[i];
            psum += p[16 + i];
            tsum += gt.pixels[i];
            ce -= std::log(gt.pixels[i] ? p[16 + i] : p[i]);
        }
        const double smooth = 1e-5;
        const double expect =
            0.5 * (1.0 - (2 * inter + smooth) / (psum + tsum + smooth)) + 0.5 * (ce / 16.0);
        EXPECT_NEAR(supervision::dice_ce_loss(p, gt), expect, 1e-6);
    }
}

TEST(Pce, AllUnannotatedIsZero) {
    Rng rng(3);
    auto p = random_probs(4, 4, rng);
    ScribbleMask s{TensorT<std::uint8_t>({4, 4}, kUnannotated)};
    EXPECT_EQ(supervision::pce_loss(p, s), 0.0);
}

TEST(Pce, FullyAnnotatedEqualsMeanCrossEntropy) {
    Rng rng(4);
    auto p = random_probs(6, 6, rng);
    ScribbleMask s{TensorT<std::uint8_t>({6, 6})};
    for (auto& v : s.pixels.data) v = rng.coin() ? 1 : 0;
    double ce = 0;
    for (std::size_t i = 0; i < 36; ++i) ce -= std::log(s.pixels[i] ? p[36 + i] : p[i]);
    ce /= 36.0;
    EXPECT_NEAR(supervision::pce_loss(p, s), ce, 1e-7);
}

TEST(Pce, TwoPixelHandComputation) {
    // probs (0.9 correct, 0.6 correct) -> (-ln 0.9 - ln 0.6)/2
    Tensor p({2, 1, 2});
    ScribbleMask s{TensorT<std::uint8_t>({1, 2})};
    s.pixels[0] = 1;
    p[0] = 0.1f;
    p[2] = 0.9f;  // pixel 0: class 1 with prob 0.9
    s.pixels[1] = 0;
    p[1] = 0.6f;
    p[3] = 0.4f;  // pixel 1: class 0 with prob 0.6
    EXPECT_NEAR(supervision::pce_loss(p, s), 0.3081, 5e-5);
}

TEST(Pce, UnnormalizedVariantIsPlainSum) {
    Rng rng(5);
    auto p = random_probs(4, 4, rng);
    ScribbleMask s{TensorT<std::uint8_t>({4, 4}, kUnannotated)};
    s.pixels.at(0, 0) = 1;
    s.pixels.at(3, 3) = 0;
    const double norm = supervision::pce_loss(p, s, true);
    const double raw = supervision::pce_loss(p, s, false);
    EXPECT_NEAR(raw, 2.0 * norm, 1e-6);
}

TEST(PseudoLabel, ScribbleWinsOverPrediction) {
    Tensor p({2, 1, 1});
    p[0] = 0.8f;
    p[1] = 0.2f;  // prediction favors background
    ScribbleMask s{TensorT<std::uint8_t>({1, 1})};
    s.pixels[0] = 1;
    auto pl = supervision::make_pseudo_label(p, s);
    EXPECT_EQ(pl.pixels[0], 1);
}

TEST(PseudoLabel, UnannotatedTakesArgmax) {
    Tensor p({2, 1, 1});
    p[0] = 0.3f;
    p[1] = 0.7f;
    ScribbleMask s{TensorT<std::uint8_t>({1, 1}, kUnannotated)};
    auto pl = supervision::make_pseudo_label(p, s);
    EXPECT_EQ(pl.pixels[0], 1);
}

TEST(PseudoLabel, TieBreaksTowardBackground) {
    Tensor p({2, 1, 1}, 0.5f);
    ScribbleMask s{TensorT<std::uint8_t>({1, 1}, kUnannotated)};
    EXPECT_EQ(supervision::make_pseudo_label(p, s).pixels[0], 0);
}

TEST(PseudoLabel, MatchesBruteForceOn3x3) {
    Rng rng(6);
    for (int trial = 0; trial < 50; ++trial) {
        auto p = random_probs(3, 3, rng);
        ScribbleMask s{TensorT<std::uint8_t>({3, 3})};
        for (auto& v : s.pixels.data) {
            const auto r = rng.uniform_int(0, 2);
            v = r == 2 ? kUnannotated : static_cast<std::uint8_t>(r);
        }
        auto pl = supervision::make_pseudo_label(p, s);
        for (std::size_t i = 0; i < 9; ++i) {
            std::uint8_t expect;
            if (s.pixels[i] != kUnannotated) expect = s.pixels[i];
            else expect = p[9 + i] > p[i] ? 1 : 0;
            EXPECT_EQ(pl.pixels[i], expect);
        }
    }
}

TEST(PseudoLabel, RestrictionToAnnotatedSetEqualsScribble) {
    Rng rng(7);
    for (int trial = 0; trial < 1000; ++trial) {
        auto p = random_probs(4, 4, rng);
        ScribbleMask s{TensorT<std::uint8_t>({4, 4})};
        for (auto& v : s.pixels.data) {
            const auto r = rng.uniform_int(0, 2);
            v = r == 2 ? kUnannotated : static_cast<std::uint8_t>(r);
        }
        auto pl = supervision::make_pseudo_label(p, s);
        for (std::size_t i = 0; i < 16; ++i)
            if (s.pixels[i] != kUnannotated) ASSERT_EQ(pl.pixels[i], s.pixels[i]);
    }
}

TEST(LossBundle, CompositionIdentityExact) {
    Rng rng(8);
    for (int trial = 0; trial < 100; ++trial) {
        const double scr = rng.uniform(0, 2), cps = rng.uniform(0, 2), con = rng.uniform(0, 1);
        const double l1 = rng.uniform(0, 2), l2 = rng.uniform(0, 1);
        auto b = supervision::LossBundle::compose(scr, cps, con, l1, l2);
        EXPECT_EQ(b.l_total, b.l_scr + b.lambda1 * b.l_cps + b.lambda2 * b.l_con);
    }
}

// Scalar oracle for the full SSCR loss stack (scribble, cross pseudo
// supervision, consistency, total) on fabricated 4x4 probability maps.
TEST(SscrLosses, MatchScalarOracleOnFabricatedProbs) {
    Rng rng(55);
    for (int trial = 0; trial < 25; ++trial) {
        auto pa = random_probs(4, 4, rng);
        auto pb = random_probs(4, 4, rng);
        TensorT<std::uint8_t> scribble({4, 4});
        for (auto& v : scribble.data) {
            const auto r = rng.uniform_int(0, 2);
            v = r == 2 ? kUnannotated : static_cast<std::uint8_t>(r);
        }
        const double lambda1 = 1.0, lambda2 = 0.5;

        // library route
        nn::NoGradGuard guard;
        auto va = nn::constant(Tensor(pa));
        auto vb = nn::constant(Tensor(pb));
        const double l_scr = 0.5 * (nn::pce_vs_scribble(va, scribble, true)->value[0] +
                                    nn::pce_vs_scribble(vb, scribble, true)->value[0]);
        const auto pl_a = supervision::pseudo_label_plane(pa, scribble);
        const auto pl_b = supervision::pseudo_label_plane(pb, scribble);
        const double l_cps = 0.5 * (nn::ce_vs_mask(va, pl_b)->value[0] +
                                    nn::ce_vs_mask(vb, pl_a)->value[0]);
        const double l_con = supervision::onehot_mse(pl_a, pl_b);
        const auto bundle = supervision::LossBundle::compose(l_scr, l_cps, l_con, lambda1, lambda2);

        // independent scalar oracle, straight from the definitions
        double o_pce_a = 0, o_pce_b = 0;
        int annotated = 0;
        double o_ce_ab = 0, o_ce_ba = 0, o_con = 0;
        std::uint8_t o_pl_a[16], o_pl_b[16];
        for (int i = 0; i < 16; ++i) {
            o_pl_a[i] = scribble[i] != kUnannotated ? scribble[i] : (pa[16 + i] > pa[i] ? 1 : 0);
            o_pl_b[i] = scribble[i] != kUnannotated ? scribble[i] : (pb[16 + i] > pb[i] ? 1 : 0);
        }
        for (int i = 0; i < 16; ++i) {
            if (scribble[i] != kUnannotated) {
                ++annotated;
                o_pce_a -= std::log(scribble[i] ? pa[16 + i] : pa[i]);
                o_pce_b -= std::log(scribble[i] ? pb[16 + i] : pb[i]);
            }
            o_ce_ab -= std::log(o_pl_b[i] ? pa[16 + i] : pa[i]);
            o_ce_ba -= std::log(o_pl_a[i] ? pb[16 + i] : pb[i]);
            // one-hot MSE over both channels
            const double da0 = (o_pl_a[i] == 0) - (o_pl_b[i] == 0);
            const double da1 = (o_pl_a[i] == 1) - (o_pl_b[i] == 1);
            o_con += da0 * da0 + da1 * da1;
        }
        const double o_scr = 0.5 * (o_pce_a / annotated + o_pce_b / annotated);
        const double o_cps = 0.5 * (o_ce_ab / 16.0 + o_ce_ba / 16.0);
        o_con /= 32.0;
        const double o_total = o_scr + lambda1 * o_cps + lambda2 * o_con;

        EXPECT_NEAR(bundle.l_scr, o_scr, 1e-6);
        EXPECT_NEAR(bundle.l_cps, o_cps, 1e-6);
        EXPECT_NEAR(bundle.l_con, o_con, 1e-6);
        EXPECT_NEAR(bundle.l_total, o_total, 1e-6);
    }
}

// L_con is symmetric in (A,B); L_cps is symmetric under swapping the pair.
TEST(SscrLosses, SymmetryUnderNetworkSwap) {
    Rng rng(56);
    auto pa = random_probs(4, 4, rng);
    auto pb = random_probs(4, 4, rng);
    TensorT<std::uint8_t> scribble({4, 4}, kUnannotated);
    scribble.at(1, 2) = 1;
    scribble.at(3, 0) = 0;

    nn::NoGradGuard guard;
    auto va = nn::constant(Tensor(pa));
    auto vb = nn::constant(Tensor(pb));
    const auto pl_a = supervision::pseudo_label_plane(pa, scribble);
    const auto pl_b = supervision::pseudo_label_plane(pb, scribble);
    const double cps_ab = 0.5 * (nn::ce_vs_mask(va, pl_b)->value[0] +
                                 nn::ce_vs_mask(vb, pl_a)->value[0]);
    const double cps_ba = 0.5 * (nn::ce_vs_mask(vb, pl_a)->value[0] +
                                 nn::ce_vs_mask(va, pl_b)->value[0]);
    EXPECT_DOUBLE_EQ(cps_ab, cps_ba);
    EXPECT_DOUBLE_EQ(supervision::onehot_mse(pl_a, pl_b), supervision::onehot_mse(pl_b, pl_a));
}

TEST(OnehotMse, CountsDisagreements) {
    TensorT<std::uint8_t> a({2, 2}, 0), b({2, 2}, 0);
    b.at(0, 0) = 1;
    b.at(1, 1) = 1;
    // 2 of 4 pixels differ -> 2/4
    EXPECT_DOUBLE_EQ(supervision::onehot_mse(a, b), 0.5);
    EXPECT_DOUBLE_EQ(supervision::onehot_mse(a, a), 0.0);
    // symmetry
    EXPECT_DOUBLE_EQ(supervision::onehot_mse(a, b), supervision::onehot_mse(b, a));
}

}  // namespace
