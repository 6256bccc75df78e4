#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "hdc/tape.hpp"
#include "hdc/tensor.hpp"

namespace hdc::linalg {

// Dense row-major [rows, cols] matrix in double precision.
using Matrix = Tensor<double>;

Matrix identity(std::size_t n);
Matrix matrix_from_rows(const std::vector<std::vector<double>>& rows);

enum class KernelKind { rbf, linear, polynomial };

struct KernelSpec {
    KernelKind kind = KernelKind::rbf;
    double bandwidth = 1.0;  // rbf sigma
    int degree = 2;          // polynomial
    double offset = 1.0;     // polynomial

    static KernelSpec rbf(double sigma) { return {KernelKind::rbf, sigma, 2, 1.0}; }
    static KernelSpec linear() { return {KernelKind::linear, 1.0, 1, 0.0}; }
    static KernelSpec polynomial(int degree, double offset) { return {KernelKind::polynomial, 1.0, degree, offset}; }

    void validate() const;
};

/// Batch-pairwise kernel matrix. `normalized` records that the trace was scaled to 1.
struct GramMatrix {
    Matrix entries;
    bool normalized = false;

    std::size_t order() const { return entries.shape.empty() ? 0 : entries.shape[0]; }
    double trace() const;
};

double kernel_value(std::span<const double> a, std::span<const double> b, const KernelSpec& spec);

// K_ij = k(Z_i, Z_j) for a [b, d] feature batch.
GramMatrix gram_matrix(const Matrix& features, const KernelSpec& spec);

// Median pairwise Euclidean distance over i < j; 1.0 when the median is zero.
double median_bandwidth(const Matrix& features);

GramMatrix trace_normalize(const GramMatrix& k);

// Entrywise product, renormalized to unit trace. PSD by the Schur product theorem;
// a minimum eigenvalue below -1e-8 raises NumericError.
GramMatrix hadamard(const GramMatrix& a, const GramMatrix& b);

bool is_symmetric(const Matrix& m, double tol = 1e-9);

struct Eigensystem {
    std::vector<double> values;  // descending
    Matrix vectors;              // column i pairs with values[i]
    int sweeps = 0;
};

/// Cyclic Jacobi rotations until the off-diagonal Frobenius norm drops below 1e-12
/// (relative to max(1, ||M||_F)); NumericError after 100 sweeps.
Eigensystem symmetric_eigensystem(const Matrix& m);
std::vector<double> symmetric_eigenvalues(const Matrix& m);

}  // namespace hdc::linalg

namespace hdc::ad {

// Differentiable Gram matrix of a [b, d] feature batch. The bandwidth is a constant.
template <class T>
Var<T> gram(const Var<T>& features, const linalg::KernelSpec& spec);

// K / trace(K); NumericError when the trace is not positive.
template <class T>
Var<T> trace_normalize(const Var<T>& k);

// trace_normalize(a ∘ b).
template <class T>
Var<T> hadamard(const Var<T>& a, const Var<T>& b);

}  // namespace hdc::ad
