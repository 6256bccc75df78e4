#include <gtest/gtest.h>

#include <cmath>

#include "hdc/rng.hpp"
#include "hdc/augment.hpp"
#include "hdc/ops.hpp"

using namespace hdc;
using namespace hdc::aug;

namespace {

Image random_image(std::size_t h, std::size_t w, std::uint64_t seed) {
    SeededRng rng(seed);
    Image img(h, w);
    for (auto& v : img.pixels) v = float(rng.uniform());
    return img;
}

}  // namespace

TEST(Geometric, IdentityDrawIsNoOp) {
    const auto img = random_image(8, 8, 1);
    EXPECT_EQ(apply_geometric(img, GeometricDraw{}), img);
}

TEST(Geometric, HorizontalFlipMovesLeftHalfRight) {
    LabelMap m(4, 6);
    for (std::size_t y = 0; y < 4; ++y)
        for (std::size_t x = 0; x < 3; ++x) m(y, x) = 1;
    GeometricDraw g;
    g.flip_h = true;
    const auto out = apply_geometric(m, g);
    for (std::size_t y = 0; y < 4; ++y)
        for (std::size_t x = 0; x < 6; ++x) EXPECT_EQ(out(y, x), x >= 3 ? 1 : 0);
}

TEST(Geometric, TwoQuarterTurnsEqualHalfTurn) {
    const auto img = random_image(8, 8, 2);
    GeometricDraw q, h;
    q.rot90 = 1;
    h.rot90 = 2;
    EXPECT_EQ(apply_geometric(apply_geometric(img, q), q), apply_geometric(img, h));
    GeometricDraw full;
    full.rot90 = 3;
    EXPECT_EQ(apply_geometric(apply_geometric(img, full), q), img);
}

TEST(Geometric, ImageAndMaskMoveTogether) {
    SeededRng rng(3);
    const auto img = random_image(8, 8, 4);
    LabelMap m(8, 8);
    for (std::size_t i = 0; i < 64; ++i) m.labels[i] = img.pixels[i] > 0.5f ? 1 : 0;
    for (int k = 0; k < 20; ++k) {
        const auto r = weak_augment(img, m, rng);
        ASSERT_TRUE(r.mask);
        for (std::size_t i = 0; i < 64; ++i) EXPECT_EQ(r.mask->labels[i], r.image.pixels[i] > 0.5f ? 1 : 0);
    }
}

TEST(Weak, DeterministicForSeed) {
    const auto img = random_image(8, 8, 5);
    SeededRng a(9), b(9);
    EXPECT_EQ(weak_augment(img, std::nullopt, a).image, weak_augment(img, std::nullopt, b).image);
}

TEST(Weak, NonSquareNeverTransposes) {
    const auto img = random_image(4, 8, 6);
    SeededRng rng(7);
    for (int k = 0; k < 50; ++k) {
        const auto r = weak_augment(img, std::nullopt, rng);
        EXPECT_EQ(r.image.height, 4u);
        EXPECT_EQ(r.image.width, 8u);
    }
}

TEST(Strong, ZeroStrengthIsIdentity) {
    const auto img = random_image(8, 8, 8);
    SeededRng rng(10);
    for (int k = 0; k < 10; ++k) EXPECT_EQ(strong_augment(img, rng, 0.0), img);
}

TEST(Strong, JitterOnConstantImage) {
    const Image img(4, 4, 0.5f);
    SeededRng rng(11);
    const auto out = apply_intensity(img, IntensityDraw{1.2, 0.1, false, 0.0}, rng);
    for (float v : out.pixels) EXPECT_NEAR(v, 0.7f, 1e-6);
}

TEST(Strong, AutoContrastRescale) {
    Image img(1, 3);
    img.pixels = {0.2f, 0.45f, 0.7f};
    const auto out = auto_contrast(img);
    EXPECT_NEAR(out.pixels[0], 0.0f, 1e-6);
    EXPECT_NEAR(out.pixels[1], 0.5f, 1e-6);
    EXPECT_NEAR(out.pixels[2], 1.0f, 1e-6);
    const Image flat(2, 2, 0.3f);
    EXPECT_EQ(auto_contrast(flat), flat);
}

TEST(Strong, NeverMovesPixels) {
    Image img(16, 16, 0.2f);
    img(5, 11) = 0.9f;
    SeededRng rng(12);
    for (int k = 0; k < 30; ++k) {
        const auto out = strong_augment(img, rng, 0.5);
        EXPECT_EQ(std::max_element(out.pixels.begin(), out.pixels.end()) - out.pixels.begin(), 5 * 16 + 11);
        for (float v : out.pixels) {
            EXPECT_GE(v, 0.0f);
            EXPECT_LE(v, 1.0f);
        }
    }
}

TEST(FNoise, ZeroGammaAndZeroInput) {
    ad::Tape<double> tape;
    SeededRng rng(13);
    Tensor<double> z(Shape{2, 3}, {1, -2, 3, 0.5, 0, -1});
    EXPECT_EQ(f_noise(tape.constant(z), 0.0, rng).value(), z);
    const Tensor<double> zero(Shape{2, 3});
    EXPECT_EQ(f_noise(tape.constant(zero), 0.8, rng).value(), zero);
}

TEST(FNoise, WithinMultiplicativeBounds) {
    SeededRng data(14), rng(15);
    Tensor<double> z(Shape{50, 4});
    for (auto& v : z.data) v = data.normal();
    const double gamma = 0.3;
    for (int rep = 0; rep < 5; ++rep) {
        ad::Tape<double> tape;
        const auto out = f_noise(tape.constant(z), gamma, rng).value();
        bool changed = false;
        for (std::size_t i = 0; i < z.numel(); ++i) {
            const double lo = std::min(z.data[i] * (1 - gamma), z.data[i] * (1 + gamma));
            const double hi = std::max(z.data[i] * (1 - gamma), z.data[i] * (1 + gamma));
            EXPECT_GE(out.data[i], lo - 1e-15);
            EXPECT_LE(out.data[i], hi + 1e-15);
            changed = changed || out.data[i] != z.data[i];
        }
        EXPECT_TRUE(changed);
    }
}

TEST(FNoise, GradientIsNoiseFactor) {
    ad::Tape<double> tape;
    SeededRng rng(16);
    const auto z = tape.leaf(Tensor<double>(Shape{4}, 2.0));
    const auto y = f_noise(z, 0.5, rng);
    const auto g = tape.backward(ad::sum(y)).at(z);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(g.data[i] * 2.0, y.value().data[i], 1e-15);
}
