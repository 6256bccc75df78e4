#pragma once

#include <span>

#include "hdc/linalg.hpp"
#include "hdc/tape.hpp"

// Rényi entropies in bits. The eigenvalue-based routines are the exact reference path;
// the training graph only uses the order-2 closed form, which needs traces alone.
namespace hdc::entropy {

// Order alpha > 0; alpha == 1 selects the Shannon limit.
struct EntropyOrder {
    double alpha = 2.0;

    explicit EntropyOrder(double a);
    bool shannon() const { return alpha == 1.0; }
};

double renyi_entropy_discrete(std::span<const double> p, EntropyOrder order);

// From the eigenvalue spectrum of a unit-trace PSD matrix; eigenvalues below 1e-12 count as 0.
double matrix_renyi_entropy(const linalg::GramMatrix& k, EntropyOrder order);

// Same quantity from a precomputed eigenvalue list.
double spectrum_renyi_entropy(std::span<const double> eigenvalues, EntropyOrder order);

// H(K1) + H(K2) - H(K1 ∘ K2).
double matrix_mutual_information(const linalg::GramMatrix& k1, const linalg::GramMatrix& k2, EntropyOrder order);

}  // namespace hdc::entropy

namespace hdc::ad {

/// -log2 ||K||_F^2, which equals -log2 tr(K K) for symmetric K.
template <class T>
Var<T> matrix_renyi_entropy_a2(const Var<T>& k);

}  // namespace hdc::ad
