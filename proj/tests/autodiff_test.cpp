#include <gtest/gtest.h>

#include "test_support.hpp"
#include "vsseg/nn/adamw.hpp"
#include "vsseg/nn/losses.hpp"
#include "vsseg/nn/ops.hpp"

using namespace vsseg;
using namespace vsseg::nn;
using vsseg::test::random_dtensor;

namespace {

// Projects a graph output to a scalar with fixed random weights so that
// per-element gradient errors cannot average away.
Var<double> project(const Var<double>& out, Rng& rng) {
    DTensor r(out->value.shape);
    for (auto& v : r.data) v = rng.uniform(-1, 1);
    return mean_all(mul(out, constant(std::move(r))));
}

double check_op(const std::function<Var<double>()>& fwd, const Var<double>& leaf, double h = 1e-6) {
    auto scalar = [&]() { return fwd()->value[0]; };
    auto run_bw = [&]() {
        auto root = fwd();
        backward(root);
    };
    return vsseg::test::fd_check(scalar, run_bw, leaf, h);
}

TEST(Autodiff, Conv2dGradients) {
    Rng rng(11);
    auto x = leaf(random_dtensor({3, 7, 6}, rng), true);
    auto w = leaf(random_dtensor({4, 3, 3, 3}, rng), true);
    auto b = leaf(random_dtensor({4}, rng), true);
    Rng prng(21);
    auto fwd = [&]() { return project(conv2d(x, w, b, 1, 1), prng); };
    // same projection every call
    auto fixed_fwd = [&]() {
        Rng p(21);
        return project(conv2d(x, w, b, 1, 1), p);
    };
    (void)fwd;
    EXPECT_LT(check_op(fixed_fwd, x), 1e-6);
    EXPECT_LT(check_op(fixed_fwd, w), 1e-6);
    EXPECT_LT(check_op(fixed_fwd, b), 1e-6);
}

TEST(Autodiff, Conv2dStride2Gradients) {
    Rng rng(13);
    auto x = leaf(random_dtensor({2, 8, 8}, rng), true);
    auto w = leaf(random_dtensor({3, 2, 3, 3}, rng), true);
    auto fwd = [&]() {
        Rng p(31);
        return project(conv2d(x, w, nullptr, 2, 1), p);
    };
    EXPECT_LT(check_op(fwd, x), 1e-6);
    EXPECT_LT(check_op(fwd, w), 1e-6);
}

TEST(Autodiff, Conv2d1x1Gradients) {
    Rng rng(17);
    auto x = leaf(random_dtensor({5, 4, 4}, rng), true);
    auto w = leaf(random_dtensor({2, 5, 1, 1}, rng), true);
    auto fwd = [&]() {
        Rng p(41);
        return project(conv2d(x, w, nullptr, 1, 0), p);
    };
    EXPECT_LT(check_op(fwd, x), 1e-6);
    EXPECT_LT(check_op(fwd, w), 1e-6);
}

TEST(Autodiff, Conv3dGradients) {
    Rng rng(19);
    auto x = leaf(random_dtensor({2, 4, 5, 5}, rng), true);
    auto w = leaf(random_dtensor({3, 2, 3, 3, 3}, rng), true);
    auto b = leaf(random_dtensor({3}, rng), true);
    auto fwd = [&]() {
        Rng p(51);
        return project(conv3d(x, w, b, 1, 1), p);
    };
    EXPECT_LT(check_op(fwd, x), 1e-6);
    EXPECT_LT(check_op(fwd, w), 1e-6);
    EXPECT_LT(check_op(fwd, b), 1e-6);
}

TEST(Autodiff, PointwiseGradients) {
    Rng rng(23);
    auto a = leaf(random_dtensor({3, 4, 4}, rng), true);
    auto b = leaf(random_dtensor({3, 4, 4}, rng), true);
    auto fwd = [&]() {
        Rng p(61);
        auto s = sigmoid(a);
        auto t = tanh_op(b);
        auto z = gated_blend(s, t, mul(a, b));
        auto r = relu(axpy(z, 0.3, add(a, b)));
        return project(r, p);
    };
    EXPECT_LT(check_op(fwd, a), 1e-5);
    EXPECT_LT(check_op(fwd, b), 1e-5);
}

TEST(Autodiff, StructureOpsGradients) {
    Rng rng(29);
    auto a = leaf(random_dtensor({2, 4, 4}, rng), true);
    auto b = leaf(random_dtensor({3, 4, 4}, rng), true);
    auto fwd = [&]() {
        Rng p(71);
        auto cat = concat_channels<double>({a, b});
        auto pooled = maxpool2(cat);
        auto up = upsample_nearest2(pooled);
        return project(up, p);
    };
    EXPECT_LT(check_op(fwd, a), 1e-6);
    EXPECT_LT(check_op(fwd, b), 1e-6);
}

TEST(Autodiff, SoftmaxAndMaxOverGradients) {
    Rng rng(31);
    auto a = leaf(random_dtensor({2, 3, 3}, rng), true);
    auto b = leaf(random_dtensor({2, 3, 3}, rng), true);
    auto c = leaf(random_dtensor({2, 3, 3}, rng), true);
    auto fwd = [&]() {
        Rng p(81);
        auto m = max_over<double>({a, b, c});
        return project(softmax_channels(m), p);
    };
    EXPECT_LT(check_op(fwd, a), 1e-5);
    EXPECT_LT(check_op(fwd, b), 1e-5);
    EXPECT_LT(check_op(fwd, c), 1e-5);
}

TEST(Autodiff, LossGradients) {
    Rng rng(37);
    auto logits = leaf(random_dtensor({2, 4, 4}, rng), true);
    TensorT<std::uint8_t> target({4, 4}, 0);
    TensorT<std::uint8_t> scribble({4, 4}, 255);
    Rng lr(5);
    for (auto& v : target.data) v = lr.coin() ? 1 : 0;
    scribble.at(0, 1) = 1;
    scribble.at(2, 2) = 0;
    scribble.at(3, 0) = 1;

    auto fwd_dice = [&]() { return dice_ce(softmax_channels(logits), target); };
    EXPECT_LT(check_op(fwd_dice, logits), 1e-6);

    auto fwd_pce = [&]() { return pce_vs_scribble(softmax_channels(logits), scribble, true); };
    EXPECT_LT(check_op(fwd_pce, logits), 1e-6);

    auto other = leaf(random_dtensor({2, 4, 4}, rng, 0.01, 0.99), false);
    auto fwd_mse = [&]() { return mse(softmax_channels(logits), other); };
    EXPECT_LT(check_op(fwd_mse, logits), 1e-6);
}

TEST(Autodiff, NoGradModeBuildsNoGraph) {
    Rng rng(41);
    auto x = leaf(random_dtensor({2, 4, 4}, rng), true);
    auto w = leaf(random_dtensor({2, 2, 3, 3}, rng), true);
    NoGradGuard guard;
    auto out = conv2d(x, w, nullptr, 1, 1);
    EXPECT_FALSE(out->requires_grad);
    EXPECT_TRUE(out->parents.empty());
}

TEST(Autodiff, GradAccumulatesAcrossBackwards) {
    auto x = leaf(DTensor({1}, 2.0), true);
    auto run = [&]() {
        auto y = mul(x, x);
        backward(y, 0.5);
    };
    run();
    run();
    // d(x^2)/dx = 4, scaled by 0.5 each pass, accumulated twice -> 4
    EXPECT_NEAR(x->grad[0], 4.0, 1e-12);
}

TEST(AdamWTest, ConvergesOnQuadratic)
{
    auto x = leaf(DTensor({4}, 0.0), true);
    for (std::size_t i = 0; i < 4; ++i) x->value[i] = 3.0 + i;
    AdamW<double>::Options opts;
    opts.lr = 0.1;
    opts.weight_decay = 0.0;
    AdamW<double> opt({x}, opts);
    for (int it = 0; it < 500; ++it) {
        opt.zero_grad();
        auto loss = mean_all(mul(x, x));
        backward(loss);
        opt.step();
    }
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(x->value[i], 0.0, 1e-3);
}

}  // namespace
