#include <gtest/gtest.h>

#include "test_support.hpp"
#include "vsseg/core.hpp"
#include "vsseg/io/png_io.hpp"
#include "vsseg/rng.hpp"
#include "vsseg/serial.hpp"

using namespace vsseg;

namespace {

DsaSequence make_seq(std::size_t f, std::size_t h, std::size_t w, Rng& rng) {
    DsaSequence s;
    s.id = "seq";
    s.frames = Tensor({f, h, w});
    for (auto& v : s.frames.data) v = static_cast<float>(rng.uniform(0, 255));
    return s;
}

TEST(ValidatePairing, MatchingShapesOk) {
    Rng rng(1);
    auto seq = make_seq(8, 64, 64, rng);
    VesselMask m{TensorT<std::uint8_t>({64, 64}, 0)};
    m.pixels.at(3, 4) = 1;
    EXPECT_NO_THROW(validate_pairing(seq, m));
}

TEST(ValidatePairing, MismatchedShapesThrow) {
    Rng rng(1);
    auto seq = make_seq(8, 64, 64, rng);
    VesselMask m{TensorT<std::uint8_t>({32, 32}, 0)};
    EXPECT_THROW(validate_pairing(seq, m), ShapeMismatch);
}

TEST(ValidatePairing, IllegalScribbleValueThrows) {
    Rng rng(1);
    auto seq = make_seq(4, 16, 16, rng);
    ScribbleMask s{TensorT<std::uint8_t>({16, 16}, 255)};
    s.pixels.at(0, 0) = 2;
    EXPECT_THROW(validate_pairing(seq, s), IllegalLabelValue);
}

TEST(ValidatePairing, ScribbleValuesLegal) {
    Rng rng(1);
    auto seq = make_seq(4, 16, 16, rng);
    ScribbleMask s{TensorT<std::uint8_t>({16, 16}, 255)};
    s.pixels.at(0, 0) = 0;
    s.pixels.at(1, 1) = 1;
    EXPECT_NO_THROW(validate_pairing(seq, s));
}

TEST(Serialization, SequenceRoundTripBitExact) {
    Rng rng(7);
    auto seq = make_seq(5, 13, 17, rng);
    seq.view = View::lateral;
    seq.frame_rate_fps = 4.0;
    auto bytes = serial::save(seq);
    auto back = serial::load_sequence_bytes(bytes);
    EXPECT_EQ(back.id, seq.id);
    EXPECT_EQ(back.view, seq.view);
    EXPECT_EQ(back.frame_rate_fps, seq.frame_rate_fps);
    ASSERT_EQ(back.frames.shape, seq.frames.shape);
    EXPECT_EQ(back.frames.data, seq.frames.data);
}

TEST(Serialization, MaskAndMapRoundTrip) {
    Rng rng(9);
    VesselMask m{TensorT<std::uint8_t>({11, 9}, 0)};
    for (auto& v : m.pixels.data) v = rng.coin() ? 1 : 0;
    EXPECT_EQ(serial::load_vessel_mask_bytes(serial::save(m)).pixels.data, m.pixels.data);

    ScribbleMask s{TensorT<std::uint8_t>({6, 6}, 255)};
    s.pixels.at(2, 2) = 1;
    EXPECT_EQ(serial::load_scribble_mask_bytes(serial::save(s)).pixels.data, s.pixels.data);

    ProbabilityMap p{Tensor({4, 4})};
    for (auto& v : p.probs.data) v = static_cast<float>(rng.uniform());
    EXPECT_EQ(serial::load_probability_map_bytes(serial::save(p)).probs.data, p.probs.data);

    MetricsReport r{0.5, 0.6, 0.7, 0.8, 0.4, 0.9, 1.25};
    auto rb = serial::load_metrics_report_bytes(serial::save(r));
    EXPECT_EQ(rb.dsc, r.dsc);
    EXPECT_EQ(rb.vc, r.vc);

    SequenceFeatureState fs{Tensor({2, 3, 4, 4}), 2};
    for (auto& v : fs.maps.data) v = static_cast<float>(rng.normal());
    auto fsb = serial::load_feature_state_bytes(serial::save(fs));
    EXPECT_EQ(fsb.maps.data, fs.maps.data);
    EXPECT_EQ(fsb.stage, fs.stage);
}

TEST(Rng, DeterministicStreams) {
    Rng a(123), b(123);
    for (int i = 0; i < 100; ++i) {
        EXPECT_EQ(a.next_u64(), b.next_u64());
    }
    Rng c(123);
    auto c1 = c.child(0);
    Rng d(123);
    auto d1 = d.child(0);
    EXPECT_EQ(c1.next_u64(), d1.next_u64());
}

TEST(Rng, UniformIntBounds) {
    Rng rng(5);
    for (int i = 0; i < 10000; ++i) {
        auto v = rng.uniform_int(3, 9);
        EXPECT_GE(v, 3);
        EXPECT_LE(v, 9);
    }
}

TEST(PngIo, Gray8RoundTrip) {
    vsseg::test::TempDir tmp("png8");
    io::GrayImage img;
    img.height = 5;
    img.width = 7;
    img.bit_depth = 8;
    img.pixels.resize(35);
    for (std::size_t i = 0; i < 35; ++i) img.pixels[i] = static_cast<std::uint16_t>(i * 7 % 256);
    io::write_gray_png(tmp.path / "a.png", img);
    auto back = io::read_gray_png(tmp.path / "a.png");
    EXPECT_EQ(back.bit_depth, 8);
    EXPECT_EQ(back.height, img.height);
    EXPECT_EQ(back.width, img.width);
    EXPECT_EQ(back.pixels, img.pixels);
}

TEST(PngIo, Gray16RoundTrip) {
    vsseg::test::TempDir tmp("png16");
    io::GrayImage img;
    img.height = 4;
    img.width = 3;
    img.bit_depth = 16;
    img.pixels = {0, 1, 65535, 300, 40000, 12345, 7, 8, 9, 10, 11, 12};
    io::write_gray_png(tmp.path / "b.png", img);
    auto back = io::read_gray_png(tmp.path / "b.png");
    EXPECT_EQ(back.bit_depth, 16);
    EXPECT_EQ(back.pixels, img.pixels);
}

}  // namespace
