#include "hdc/entropy.hpp"

#include <cmath>
#include <string>

#include "hdc/ops.hpp"

namespace hdc::entropy {

namespace {
constexpr double kEigenClamp = 1e-12;

double entropy_of(std::span<const double> weights, double alpha) {
    if (alpha == 1.0) {
        double h = 0.0;
        for (double p : weights) {
            if (p > 0.0) {
                h -= p * std::log2(p);
            }
        }
        return h;
    }
    double s = 0.0;
    for (double p : weights) {
        if (p > 0.0) {
            s += std::pow(p, alpha);
        }
    }
    return std::log2(s) / (1.0 - alpha);
}
}  // namespace

EntropyOrder::EntropyOrder(double a) : alpha(a) {
    if (!(a > 0.0) || !std::isfinite(a)) {
        throw ContractError("EntropyOrder: alpha must be a finite positive number, got " + std::to_string(a));
    }
}

double renyi_entropy_discrete(std::span<const double> p, EntropyOrder order) {
    if (p.empty()) {
        throw ContractError("renyi_entropy_discrete: empty distribution");
    }
    double total = 0.0;
    for (double v : p) {
        if (!(v >= 0.0)) {
            throw ContractError("renyi_entropy_discrete: negative or NaN probability " + std::to_string(v));
        }
        total += v;
    }
    if (std::abs(total - 1.0) > 1e-6) {
        throw ContractError("renyi_entropy_discrete: probabilities sum to " + std::to_string(total));
    }
    return entropy_of(p, order.alpha);
}

double spectrum_renyi_entropy(std::span<const double> eigenvalues, EntropyOrder order) {
    std::vector<double> lam(eigenvalues.begin(), eigenvalues.end());
    for (double& v : lam) {
        if (v < kEigenClamp) {
            v = 0.0;
        }
    }
    return entropy_of(lam, order.alpha);
}

double matrix_renyi_entropy(const linalg::GramMatrix& k, EntropyOrder order) {
    const double t = k.trace();
    if (std::abs(t - 1.0) > 1e-9) {
        throw ContractError("matrix_renyi_entropy: matrix is not trace-normalized (trace " + std::to_string(t) + ")");
    }
    return spectrum_renyi_entropy(linalg::symmetric_eigenvalues(k.entries), order);
}

double matrix_mutual_information(const linalg::GramMatrix& k1, const linalg::GramMatrix& k2, EntropyOrder order) {
    if (k1.order() != k2.order()) {
        throw ContractError("matrix_mutual_information: order mismatch " + std::to_string(k1.order()) + " vs " +
                            std::to_string(k2.order()));
    }
    const linalg::GramMatrix joint = linalg::hadamard(k1, k2);
    return matrix_renyi_entropy(k1, order) + matrix_renyi_entropy(k2, order) - matrix_renyi_entropy(joint, order);
}

}  // namespace hdc::entropy

namespace hdc::ad {

template <class T>
Var<T> matrix_renyi_entropy_a2(const Var<T>& k) {
    const Var<T> fro2 = sum(square(k));
    if (!(fro2.value().item() > T(0))) {
        throw NumericError("matrix_renyi_entropy_a2: tr(K^2) is not positive");
    }
    return scale(log2(fro2), T(-1));
}

template Var<float> matrix_renyi_entropy_a2(const Var<float>&);
template Var<double> matrix_renyi_entropy_a2(const Var<double>&);

}  // namespace hdc::ad
