#include <gtest/gtest.h>

#include <cmath>

#include "hdc/entropy.hpp"
#include "hdc/gradcheck.hpp"
#include "hdc/linalg.hpp"
#include "hdc/losses.hpp"
#include "hdc/ops.hpp"
#include "hdc/rng.hpp"

using namespace hdc;
using namespace hdc::ad;

namespace {

Tensor<double> randn(Shape s, std::uint64_t seed) {
    SeededRng rng(seed);
    Tensor<double> t(std::move(s));
    for (auto& v : t.data) {
        v = rng.normal();
    }
    return t;
}

}  // namespace

TEST(Tensor, NumelMatchesShape) {
    Tensor<float> t(Shape{2, 3, 4});
    EXPECT_EQ(t.numel(), 24u);
    EXPECT_EQ(shape_numel({}), 1u);
    EXPECT_THROW(Tensor<float>(Shape{2, 2}, std::vector<float>{1, 2, 3}), ContractError);
}

TEST(Ops, MatmulByIdentity) {
    Tape<double> tape;
    const auto a = tape.constant(Tensor<double>(Shape{2, 2}, {1, 2, 3, 4}));
    const auto i = tape.constant(linalg::identity(2));
    EXPECT_EQ(matmul(a, i).value().data, (std::vector<double>{1, 2, 3, 4}));
}

TEST(Ops, MatmulShapeMismatchNamesShapes) {
    Tape<double> tape;
    const auto a = tape.constant(Tensor<double>(Shape{2, 3}));
    const auto b = tape.constant(Tensor<double>(Shape{2, 3}));
    try {
        matmul(a, b);
        FAIL();
    } catch (const ContractError& e) {
        EXPECT_NE(std::string(e.what()).find("[2,3]"), std::string::npos) << e.what();
    }
}

TEST(Ops, Relu) {
    Tape<double> tape;
    const auto x = tape.constant(Tensor<double>(Shape{3}, {-1, 0, 2}));
    EXPECT_EQ(relu(x).value().data, (std::vector<double>{0, 0, 2}));
}

TEST(Ops, ConvDeltaKernelIsIdentity) {
    Tape<double> tape;
    const auto x = tape.constant(Tensor<double>(Shape{1, 1, 5, 5}, 1.0));
    Tensor<double> k(Shape{1, 1, 3, 3});
    k.data[4] = 1.0;
    const auto y = conv2d(x, tape.constant(k), Var<double>{}, 1);
    EXPECT_EQ(y.shape(), (Shape{1, 1, 5, 5}));
    for (const double v : y.value().data) {
        EXPECT_EQ(v, 1.0);
    }
}

TEST(Ops, ConvMatchesDirectLoop) {
    const auto x = randn({2, 3, 6, 6}, 1), w = randn({4, 3, 3, 3}, 2), b = randn({4}, 3);
    for (int stride : {1, 2}) {
        Tape<double> tape;
        const auto y = conv2d(tape.constant(x), tape.constant(w), tape.constant(b), stride).value();
        const std::size_t ho = stride == 1 ? 6 : 3;
        ASSERT_EQ(y.shape, (Shape{2, 4, ho, ho}));
        for (std::size_t n = 0; n < 2; ++n)
            for (std::size_t o = 0; o < 4; ++o)
                for (std::size_t i = 0; i < ho; ++i)
                    for (std::size_t j = 0; j < ho; ++j) {
                        double s = b.data[o];
                        for (std::size_t c = 0; c < 3; ++c)
                            for (int dy = -1; dy <= 1; ++dy)
                                for (int dx = -1; dx <= 1; ++dx) {
                                    const long yy = long(i) * stride + dy, xx = long(j) * stride + dx;
                                    if (yy < 0 || xx < 0 || yy >= 6 || xx >= 6) continue;
                                    s += x.data[((n * 3 + c) * 6 + yy) * 6 + xx] *
                                         w.data[((o * 3 + c) * 3 + (dy + 1)) * 3 + (dx + 1)];
                                }
                        EXPECT_NEAR(y.data[((n * 4 + o) * ho + i) * ho + j], s, 1e-12);
                    }
    }
}

TEST(Backward, SumGivesOnes) {
    Tape<double> tape;
    const auto x = tape.leaf(randn({2, 3, 2}, 4));
    const auto g = tape.backward(sum(x));
    for (const double v : g.at(x).data) {
        EXPECT_EQ(v, 1.0);
    }
}

TEST(Backward, HalfSumSquares) {
    Tape<double> tape;
    const auto x = tape.leaf(Tensor<double>(Shape{3}, {1, -2, 3}));
    const auto g = tape.backward(scale(sum(square(x)), 0.5));
    EXPECT_EQ(g.at(x).data, (std::vector<double>{1, -2, 3}));
}

TEST(Backward, FanOutAccumulates) {
    Tape<double> tape;
    const auto x = tape.leaf(Tensor<double>(Shape{2}, {1.5, -2}));
    const auto g = tape.backward(sum(add(mul(x, x), x)));  // d/dx (x^2 + x) = 2x + 1
    EXPECT_EQ(g.at(x).data, (std::vector<double>{4, -3}));
}

TEST(Backward, RequiresScalarLoss) {
    Tape<double> tape;
    const auto x = tape.leaf(Tensor<double>(Shape{2}, 1.0));
    EXPECT_THROW(tape.backward(x), ContractError);
}

TEST(Backward, NonFiniteForwardIsHardError) {
    Tape<double> tape;
    const auto x = tape.leaf(Tensor<double>(Shape{2}, {0.0, 1.0}));
    EXPECT_THROW(log(x), NumericError);
}

TEST(Backward, StopGradientBlocks) {
    Tape<double> tape;
    const auto x = tape.leaf(Tensor<double>(Shape{2}, {1, 2}));
    const auto g = tape.backward(sum(mul(stop_gradient(x), x)));
    EXPECT_EQ(g.at(x).data, (std::vector<double>{1, 2}));
}

TEST(GradCheck, SumIsExact) {
    ScalarFn<double> f = [](Tape<double>&, const Var<double>& x) { return sum(x); };
    EXPECT_LT(finite_diff_check(f, randn({3, 4}, 5), 1e-5).max_rel_error, 1e-10);
}

TEST(GradCheck, SoftmaxCrossEntropyMatchesPMinusY) {
    const auto logits = randn({1, 3, 1, 2}, 6);  // 2 pixels, 3 classes
    const std::vector<std::int32_t> y = {2, 0};
    ScalarFn<double> f = [&](Tape<double>&, const Var<double>& x) { return losses::cross_entropy(x, std::span(y)); };
    EXPECT_LT(finite_diff_check(f, logits, 1e-5).max_rel_error, 1e-6);

    Tape<double> tape;
    const auto x = tape.leaf(logits);
    const auto g = tape.backward(losses::cross_entropy(x, std::span(y))).at(x);
    for (std::size_t p = 0; p < 2; ++p) {
        double z = 0;
        for (std::size_t c = 0; c < 3; ++c) z += std::exp(logits.data[c * 2 + p]);
        for (std::size_t c = 0; c < 3; ++c) {
            const double prob = std::exp(logits.data[c * 2 + p]) / z;
            const double want = (prob - (std::int32_t(c) == y[p] ? 1.0 : 0.0)) / 2.0;
            EXPECT_NEAR(g.data[c * 2 + p], want, 1e-12);
        }
    }
}

TEST(GradCheck, EntropyOfGram) {
    ScalarFn<double> f = [](Tape<double>&, const Var<double>& z) {
        return matrix_renyi_entropy_a2(trace_normalize(gram(z, linalg::KernelSpec::rbf(1.3))));
    };
    EXPECT_LT(finite_diff_check(f, randn({4, 3}, 7), 1e-5).max_rel_error, 1e-4);
}

TEST(GradCheck, CorrelationGuidance) {
    const auto zt = randn({4, 3}, 9);
    ScalarFn<double> f = [&](Tape<double>& tape, const Var<double>& zs) {
        return losses::cg_loss(
            losses::correlation_matrix(standardize_columns(zs), standardize_columns(tape.constant(zt))), 2, 1e-8);
    };
    EXPECT_LT(finite_diff_check(f, randn({4, 3}, 8), 1e-5).max_rel_error, 1e-4);
}

TEST(GradCheck, FlippedGradientIsCaught) {
    ScalarFn<double> f = [](Tape<double>&, const Var<double>& x) { return flip_gradient(sum(square(x))); };
    EXPECT_GT(finite_diff_check(f, randn({5}, 10), 1e-5).max_rel_error, 1.0);
}

TEST(GradCheck, ImageOpsAndConv) {
    const auto w = randn({2, 3, 3, 3}, 12), b = randn({2}, 13);
    for (int stride : {1, 2}) {
        ScalarFn<double> f = [&](Tape<double>& tape, const Var<double>& x) {
            auto y = conv2d(x, tape.constant(w), tape.constant(b), stride);
            y = upsample2x(y);
            return sum(square(softmax_channels(y)));
        };
        EXPECT_LT(finite_diff_check(f, randn({2, 3, 4, 4}, 11), 1e-5).max_rel_error, 1e-6) << stride;
    }
}
