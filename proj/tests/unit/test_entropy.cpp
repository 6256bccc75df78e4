#include <gtest/gtest.h>

#include <cmath>

#include "hdc/rng.hpp"
#include "hdc/entropy.hpp"
#include "hdc/linalg.hpp"

using namespace hdc;
using namespace hdc::entropy;
using linalg::GramMatrix;
using linalg::Matrix;

namespace {

GramMatrix normalized_diag(std::vector<double> d) {
    Matrix m(Shape{d.size(), d.size()});
    for (std::size_t i = 0; i < d.size(); ++i) m.at(i, i) = d[i];
    return linalg::trace_normalize(GramMatrix{m, false});
}

GramMatrix random_normalized(std::size_t b, std::uint64_t seed) {
    SeededRng rng(seed);
    Matrix z(Shape{b, 3});
    for (auto& v : z.data) v = rng.normal();
    return linalg::trace_normalize(linalg::gram_matrix(z, linalg::KernelSpec::rbf(1.0)));
}

// Closed-form eigenvalues of a symmetric 2x2 matrix.
std::vector<double> eig2(const Matrix& m) {
    const double a = m.at(0, 0), b = m.at(0, 1), d = m.at(1, 1);
    const double mid = (a + d) / 2, r = std::sqrt((a - d) * (a - d) / 4 + b * b);
    return {mid + r, mid - r};
}

}  // namespace

TEST(Discrete, UniformIsLogN) {
    const std::vector<double> p(5, 0.2);
    for (double a : {0.5, 1.0, 2.0, 3.0}) EXPECT_NEAR(renyi_entropy_discrete(p, EntropyOrder(a)), std::log2(5.0), 1e-12);
}

TEST(Discrete, DeterministicIsZero) {
    const std::vector<double> p = {1, 0, 0};
    for (double a : {0.5, 1.0, 2.0}) EXPECT_NEAR(renyi_entropy_discrete(p, EntropyOrder(a)), 0.0, 1e-15);
}

TEST(Discrete, HalfHalf) {
    const std::vector<double> p = {0.5, 0.5};
    EXPECT_EQ(renyi_entropy_discrete(p, EntropyOrder(2.0)), 1.0);
}

TEST(Discrete, RejectsBadInput) {
    EXPECT_THROW(EntropyOrder(0.0), ContractError);
    const std::vector<double> p = {0.7, 0.7};
    EXPECT_THROW(renyi_entropy_discrete(p, EntropyOrder(2.0)), ContractError);
}

TEST(Matrix, ScaledIdentityIsLogN) {
    const auto k = normalized_diag({1, 1, 1, 1, 1, 1});
    for (double a : {0.5, 1.0, 2.0, 5.0}) EXPECT_NEAR(matrix_renyi_entropy(k, EntropyOrder(a)), std::log2(6.0), 1e-12);
}

TEST(Matrix, RankOneIsZero) {
    const auto k = GramMatrix{Matrix(Shape{4, 4}, 0.25), true};
    for (double a : {0.5, 1.0, 2.0}) EXPECT_NEAR(matrix_renyi_entropy(k, EntropyOrder(a)), 0.0, 1e-12);
}

TEST(Matrix, DiagExample) {
    EXPECT_NEAR(matrix_renyi_entropy(normalized_diag({0.75, 0.25}), EntropyOrder(2.0)), -std::log2(0.625), 1e-12);
}

TEST(Matrix, RequiresTraceOne) {
    EXPECT_THROW(matrix_renyi_entropy(GramMatrix{linalg::identity(3), false}, EntropyOrder(2.0)), ContractError);
}

TEST(Alpha2, ClosedFormExamples) {
    ad::Tape<double> tape;
    const auto i4 = normalized_diag({1, 1, 1, 1});
    EXPECT_NEAR(ad::matrix_renyi_entropy_a2(tape.constant(i4.entries)).value().item(), 2.0, 1e-15);
    const auto rank1 = Matrix(Shape{3, 3}, 1.0 / 3);
    EXPECT_NEAR(ad::matrix_renyi_entropy_a2(tape.constant(rank1)).value().item(), 0.0, 1e-15);
}

TEST(Alpha2, MatchesEigenPath) {
    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto k = random_normalized(6, s);
        ad::Tape<double> tape;
        const double closed = ad::matrix_renyi_entropy_a2(tape.constant(k.entries)).value().item();
        EXPECT_NEAR(closed, matrix_renyi_entropy(k, EntropyOrder(2.0)), 1e-8);
    }
}

TEST(MutualInformation, SingleSample) {
    const GramMatrix one{Matrix(Shape{1, 1}, 1.0), true};
    EXPECT_EQ(matrix_mutual_information(one, one, EntropyOrder(2.0)), 0.0);
}

TEST(MutualInformation, ConstantVariableCarriesNothing) {
    const GramMatrix ones{Matrix(Shape{5, 5}, 0.2), true};
    EXPECT_NEAR(matrix_mutual_information(ones, random_normalized(5, 3), EntropyOrder(2.0)), 0.0, 1e-12);
}

TEST(MutualInformation, TwoByTwoIndependentRecomputation) {
    // b = 2 spectra from the quadratic formula.
    for (std::uint64_t s = 0; s < 10; ++s) {
        const auto k1 = random_normalized(2, 100 + s), k2 = random_normalized(2, 200 + s);
        const auto k12 = linalg::hadamard(k1, k2);
        auto h2 = [](std::vector<double> ev) { return -std::log2(ev[0] * ev[0] + ev[1] * ev[1]); };
        const double want = h2(eig2(k1.entries)) + h2(eig2(k2.entries)) - h2(eig2(k12.entries));
        EXPECT_NEAR(matrix_mutual_information(k1, k2, EntropyOrder(2.0)), want, 1e-10);
    }
}

TEST(MutualInformation, RandomPairFromSpectra) {
    const auto k1 = random_normalized(5, 7), k2 = random_normalized(5, 8);
    const EntropyOrder a(2.0);
    const double want = spectrum_renyi_entropy(linalg::symmetric_eigenvalues(k1.entries), a) +
                        spectrum_renyi_entropy(linalg::symmetric_eigenvalues(k2.entries), a) -
                        spectrum_renyi_entropy(linalg::symmetric_eigenvalues(linalg::hadamard(k1, k2).entries), a);
    EXPECT_NEAR(matrix_mutual_information(k1, k2, a), want, 1e-12);
}

TEST(Bounds, EntropyWithinZeroAndLogB) {
    for (std::uint64_t s = 0; s < 30; ++s) {
        const std::size_t b = 2 + s % 14;
        const auto k = random_normalized(b, 300 + s);
        for (double a : {0.5, 1.0, 2.0, 4.0}) {
            const double h = matrix_renyi_entropy(k, EntropyOrder(a));
            EXPECT_GE(h, -1e-8);
            EXPECT_LE(h, std::log2(double(b)) + 1e-8);
        }
    }
}
