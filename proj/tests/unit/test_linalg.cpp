#include <gtest/gtest.h>

#include <cmath>

#include "hdc/rng.hpp"
#include "hdc/linalg.hpp"

using namespace hdc;
using namespace hdc::linalg;

namespace {

Matrix diag(std::vector<double> d) {
    Matrix m(Shape{d.size(), d.size()});
    for (std::size_t i = 0; i < d.size(); ++i) m.at(i, i) = d[i];
    return m;
}

Matrix random_features(std::size_t b, std::size_t d, std::uint64_t seed) {
    SeededRng rng(seed);
    Matrix z(Shape{b, d});
    for (auto& v : z.data) v = rng.normal();
    return z;
}

}  // namespace

TEST(Gram, LinearOnIdentityRows) {
    EXPECT_EQ(gram_matrix(identity(3), KernelSpec::linear()).entries, identity(3));
}

TEST(Gram, RbfIdenticalRowsIsOnes) {
    const auto z = matrix_from_rows({{0.3, -1}, {0.3, -1}, {0.3, -1}});
    for (const double v : gram_matrix(z, KernelSpec::rbf(0.7)).entries.data) EXPECT_EQ(v, 1.0);
}

TEST(Gram, RbfTwoPoints) {
    const auto k = gram_matrix(matrix_from_rows({{0}, {1}}), KernelSpec::rbf(1.0)).entries;
    EXPECT_DOUBLE_EQ(k.at(0, 0), 1.0);
    EXPECT_NEAR(k.at(0, 1), std::exp(-0.5), 1e-15);
    EXPECT_EQ(k.at(0, 1), k.at(1, 0));
}

TEST(Gram, SymmetricPsdAndNormalized) {
    for (const auto& spec : {KernelSpec::rbf(1.5), KernelSpec::linear(), KernelSpec::polynomial(3, 1.0)}) {
        const auto k = trace_normalize(gram_matrix(random_features(7, 4, 2), spec));
        EXPECT_TRUE(is_symmetric(k.entries));
        EXPECT_GE(symmetric_eigenvalues(k.entries).back(), -1e-8);
        EXPECT_NEAR(k.trace(), 1.0, 1e-9);
    }
}

TEST(Gram, RejectsBadKernel) {
    EXPECT_THROW(gram_matrix(identity(2), KernelSpec::rbf(0.0)), ContractError);
    EXPECT_THROW(gram_matrix(identity(2), KernelSpec::polynomial(0, 1.0)), ContractError);
}

TEST(MedianBandwidth, Examples) {
    EXPECT_EQ(median_bandwidth(matrix_from_rows({{0}, {2}})), 2.0);
    EXPECT_EQ(median_bandwidth(matrix_from_rows({{0}, {0}, {0}})), 1.0);
    EXPECT_EQ(median_bandwidth(matrix_from_rows({{0}, {1}, {3}})), 2.0);
}

TEST(TraceNormalize, Examples) {
    const auto i4 = trace_normalize(GramMatrix{identity(4), false});
    EXPECT_TRUE(i4.normalized);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(i4.entries.at(i, i), 0.25);
    const auto again = trace_normalize(i4);
    EXPECT_EQ(again.entries, i4.entries);
    const auto d = trace_normalize(GramMatrix{diag({1, 3}), false});
    EXPECT_EQ(d.entries.at(0, 0), 0.25);
    EXPECT_EQ(d.entries.at(1, 1), 0.75);
    EXPECT_THROW(trace_normalize(GramMatrix{Matrix(Shape{2, 2}), false}), NumericError);
}

TEST(Hadamard, OnesIsIdentityUpToScale) {
    Matrix ones(Shape{4, 4}, 0.25);
    const auto k2 = trace_normalize(gram_matrix(random_features(4, 2, 3), KernelSpec::rbf(1.0)));
    const auto h = hadamard(GramMatrix{ones, true}, k2);
    for (std::size_t i = 0; i < 16; ++i) EXPECT_NEAR(h.entries.data[i], k2.entries.data[i], 1e-15);
}

TEST(Hadamard, HalfIdentity) {
    const auto half = trace_normalize(GramMatrix{identity(2), false});
    const auto h = hadamard(half, half);
    EXPECT_EQ(h.entries.at(0, 0), 0.5);
    EXPECT_EQ(h.entries.at(1, 1), 0.5);
    EXPECT_EQ(h.entries.at(0, 1), 0.0);
}

TEST(Hadamard, RandomPairStaysPsd) {
    const auto a = trace_normalize(gram_matrix(random_features(5, 3, 4), KernelSpec::rbf(1.0)));
    const auto b = trace_normalize(gram_matrix(random_features(5, 3, 5), KernelSpec::polynomial(2, 1.0)));
    EXPECT_GE(symmetric_eigenvalues(hadamard(a, b).entries).back(), -1e-8);
}

TEST(Eigen, Examples) {
    EXPECT_EQ(symmetric_eigenvalues(identity(3)), (std::vector<double>{1, 1, 1}));
    EXPECT_EQ(symmetric_eigenvalues(diag({3, 1, 2})), (std::vector<double>{3, 2, 1}));
    const auto ev = symmetric_eigenvalues(matrix_from_rows({{2, 1}, {1, 2}}));
    EXPECT_NEAR(ev[0], 3.0, 1e-12);
    EXPECT_NEAR(ev[1], 1.0, 1e-12);
}

TEST(Eigen, ReconstructsRandomSymmetric) {
    for (std::size_t n : {2, 5, 9, 16}) {
        auto z = random_features(n, n, 40 + n);
        Matrix m(Shape{n, n});
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) m.at(i, j) = z.at(i, j) + z.at(j, i);
        const auto es = symmetric_eigensystem(m);
        double err = 0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                double r = 0;
                for (std::size_t k = 0; k < n; ++k) r += es.vectors.at(i, k) * es.values[k] * es.vectors.at(j, k);
                err += (r - m.at(i, j)) * (r - m.at(i, j));
            }
        EXPECT_LT(std::sqrt(err), 1e-8);
        EXPECT_TRUE(std::is_sorted(es.values.rbegin(), es.values.rend()));
    }
}

TEST(Eigen, RejectsAsymmetric) {
    EXPECT_THROW(symmetric_eigenvalues(matrix_from_rows({{1, 2}, {0, 1}})), ContractError);
}
