#include <gtest/gtest.h>

#include <cmath>

#include "hdc/rng.hpp"
#include "hdc/model.hpp"
#include "hdc/ops.hpp"

using namespace hdc;
using namespace hdc::model;

namespace {

std::vector<Image> images(std::size_t n, std::size_t h, std::size_t w, std::uint64_t seed) {
    SeededRng rng(seed);
    std::vector<Image> out;
    for (std::size_t i = 0; i < n; ++i) {
        Image img(h, w);
        for (auto& v : img.pixels) v = float(rng.uniform());
        out.push_back(img);
    }
    return out;
}

// Independent count from the layer table: 3x3 convs stem, depth downs, mid, depth ups; 1x1 head.
std::size_t expected_count(const NetworkConfig& c) {
    auto ch = [&](std::size_t i) { return c.width * std::min<std::size_t>(std::size_t(1) << i, 4); };
    auto conv = [](std::size_t co, std::size_t ci, std::size_t k) { return co * ci * k * k + co; };
    std::size_t enc = conv(ch(0), c.in_channels, 3) + conv(ch(c.depth), ch(c.depth), 3);
    std::size_t dec = conv(c.classes, ch(0), 1);
    for (std::size_t i = 1; i <= c.depth; ++i) {
        enc += conv(ch(i), ch(i - 1), 3);
        dec += conv(ch(i - 1), ch(i), 3);
    }
    return enc + 2 * dec;
}

}  // namespace

TEST(Init, ParameterCount) {
    EXPECT_EQ(init_model<float>(NetworkConfig{3, 2, 4, 2}, SeededRng(1)).student_parameter_count(), 6820u);
    for (const auto& c : {NetworkConfig{3, 2, 8, 3}, NetworkConfig{3, 3, 16, 3}, NetworkConfig{1, 2, 4, 4}}) {
        EXPECT_EQ(init_model<float>(c, SeededRng(1)).student_parameter_count(), expected_count(c));
    }
}

TEST(Init, DecodersDifferTeacherCopies) {
    const auto s = init_model<float>(NetworkConfig{3, 2, 8, 3}, SeededRng(2));
    EXPECT_NE(s.decoder_main, s.decoder_noisy);
    EXPECT_EQ(s.teacher_encoder, s.encoder);
    EXPECT_EQ(s.teacher_decoder, s.decoder_main);
    EXPECT_EQ(s, init_model<float>(NetworkConfig{3, 2, 8, 3}, SeededRng(2)));
}

TEST(Init, RejectsBadConfig) {
    EXPECT_THROW(init_model<float>(NetworkConfig{3, 1, 8, 3}, SeededRng(0)), ContractError);
    EXPECT_THROW(init_model<float>(NetworkConfig{3, 2, 2, 3}, SeededRng(0)), ContractError);
}

TEST(Forward, ShapesAndTeacherMatchesStudentAtInit) {
    const NetworkConfig cfg{3, 3, 4, 2};
    const auto s = init_model<double>(cfg, SeededRng(3));
    const auto imgs = images(2, 16, 16, 4);
    ad::Tape<double> tape;
    const auto x = tape.constant(batch_tensor<double>(imgs, 3));
    SeededRng rng(5);
    const auto out = forward_student(cfg, bind_student(tape, s), x, 0.3, rng);
    EXPECT_EQ(out.p1.shape(), (Shape{2, 3, 16, 16}));
    EXPECT_EQ(out.p2.shape(), (Shape{2, 3, 16, 16}));
    EXPECT_EQ(out.zs.shape(), (Shape{2, cfg.feature_dim()}));
    EXPECT_EQ(out.f1.shape(), (Shape{2, cfg.width}));

    const auto t = forward_teacher(cfg, bind_teacher(tape, s), x);
    EXPECT_EQ(t.zt.shape(), out.zs.shape());
    const auto p1 = ad::softmax_channels(out.p1).value();
    for (std::size_t i = 0; i < p1.numel(); ++i) EXPECT_EQ(t.probs.value().data[i], p1.data[i]);
    for (std::size_t b = 0; b < 2; ++b)
        for (std::size_t p = 0; p < 256; ++p) {
            double sum = 0;
            for (std::size_t c = 0; c < 3; ++c) sum += t.probs.value().data[(b * 3 + c) * 256 + p];
            EXPECT_NEAR(sum, 1.0, 1e-6);
        }
}

TEST(Forward, NoiseSeparatesBranchesAndZeroNoiseWithTiedDecoders) {
    const NetworkConfig cfg{3, 2, 4, 2};
    auto s = init_model<double>(cfg, SeededRng(6));
    const auto imgs = images(2, 16, 16, 7);
    {
        ad::Tape<double> tape;
        SeededRng rng(8);
        const auto out = forward_student(cfg, bind_student(tape, s), tape.constant(batch_tensor<double>(imgs, 3)),
                                         0.3, rng);
        double diff = 0;
        for (std::size_t i = 0; i < out.p1.value().numel(); ++i)
            diff = std::max(diff, std::abs(out.p1.value().data[i] - out.p2.value().data[i]));
        EXPECT_GT(diff, 0.0);
    }
    s.decoder_noisy = s.decoder_main;
    ad::Tape<double> tape;
    SeededRng rng(8);
    const auto out =
        forward_student(cfg, bind_student(tape, s), tape.constant(batch_tensor<double>(imgs, 3)), 0.0, rng);
    EXPECT_EQ(out.p1.value(), out.p2.value());
}

TEST(Forward, RejectsIndivisibleInput) {
    const NetworkConfig cfg{3, 2, 4, 3};
    const auto s = init_model<float>(cfg, SeededRng(9));
    EXPECT_THROW(predict_logits(s, Network::student_main, batch_tensor<float>(images(1, 12, 12, 1), 3)),
                 ContractError);
}

TEST(Predict, MatchesTapeForward) {
    const NetworkConfig cfg{3, 2, 4, 2};
    const auto s = init_model<float>(cfg, SeededRng(10));
    const auto x = batch_tensor<float>(images(2, 16, 16, 11), 3);
    ad::Tape<float> tape;
    SeededRng rng(0);
    const auto out = forward_student(cfg, bind_student(tape, s), tape.constant(x), 0.0, rng);
    EXPECT_EQ(predict_logits(s, Network::student_main, x), out.p1.value());
    EXPECT_EQ(predict_logits(s, Network::teacher, x), out.p1.value());
}

TEST(BatchTensor, ReplicatesChannels) {
    const auto imgs = images(2, 8, 8, 12);
    const auto t = batch_tensor<float>(imgs, 3);
    ASSERT_EQ(t.shape, (Shape{2, 3, 8, 8}));
    for (std::size_t b = 0; b < 2; ++b)
        for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t p = 0; p < 64; ++p) EXPECT_EQ(t.data[(b * 3 + c) * 64 + p], imgs[b].pixels[p]);
}

TEST(Ema, Fixtures) {
    auto s = init_model<double>(NetworkConfig{3, 2, 4, 2}, SeededRng(13));
    auto shifted = s;
    for (auto& t : shifted.encoder.tensors)
        for (auto& v : t.data) v += 1.0;
    for (auto& t : shifted.decoder_main.tensors)
        for (auto& v : t.data) v -= 0.5;

    auto a = shifted;
    ema_update(a, 0.0);
    EXPECT_EQ(a.teacher_encoder, shifted.encoder);
    EXPECT_EQ(a.teacher_decoder, shifted.decoder_main);

    auto b = shifted;
    ema_update(b, 1.0);
    EXPECT_EQ(b.teacher_encoder, s.teacher_encoder);

    ModelState<double> scalar;
    scalar.encoder = {{"x"}, {Tensor<double>(Shape{1}, 0.0)}};
    scalar.teacher_encoder = {{"x"}, {Tensor<double>(Shape{1}, 1.0)}};
    ema_update(scalar, 0.9);
    EXPECT_NEAR(scalar.teacher_encoder.tensors[0].data[0], 0.9, 1e-16);
    EXPECT_THROW(ema_update(scalar, 1.5), ContractError);
}

TEST(Ema, OnlyTeacherChanges) {
    auto s = init_model<float>(NetworkConfig{3, 2, 4, 2}, SeededRng(14));
    for (auto& t : s.encoder.tensors)
        for (auto& v : t.data) v *= 2.0f;
    const auto before = s;
    const auto teacher_hash = hash_params(s.teacher_encoder);
    ema_update(s, 0.5);
    EXPECT_EQ(s.encoder, before.encoder);
    EXPECT_EQ(s.decoder_noisy, before.decoder_noisy);
    EXPECT_NE(hash_params(s.teacher_encoder), teacher_hash);
}
