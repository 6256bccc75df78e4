#include "hdc/losses.hpp"

#include <cmath>
#include <string>

#include "hdc/entropy.hpp"
#include "hdc/ops.hpp"

namespace hdc::losses {

using ad::Var;

void LossWeights::validate() const {
    if (!(beta_cg >= 0.0) || !(beta_mi >= 0.0) || !std::isfinite(beta_cg) || !std::isfinite(beta_mi)) {
        throw ContractError("LossWeights: beta_cg and beta_mi must be finite and >= 0");
    }
    if (cg_alpha < 1) {
        throw ContractError("LossWeights: cg_alpha must be >= 1, got " + std::to_string(cg_alpha));
    }
    if (!(cg_eps > 0.0 && cg_eps < 1.0)) {
        throw ContractError("LossWeights: cg_eps must lie in (0, 1), got " + std::to_string(cg_eps));
    }
}

template <class T>
Var<T> cross_entropy(const Var<T>& logits, std::span<const std::int32_t> mask) {
    if (logits.shape().size() != 4 || logits.shape()[1] < 2) {
        throw ContractError("cross_entropy: expected logits [B,C>=2,H,W], got " + shape_str(logits.shape()));
    }
    return scale(mean(pick_channels(log_softmax_channels(logits), mask)), T(-1));
}

template <class T>
Var<T> supervised_loss(const Var<T>& p1, const Var<T>& p2, std::span<const std::int32_t> mask) {
    if (p1.shape() != p2.shape()) {
        throw ContractError("supervised_loss: decoder outputs differ " + shape_str(p1.shape()) + " vs " +
                            shape_str(p2.shape()));
    }
    return add(cross_entropy(p1, mask), cross_entropy(p2, mask));
}

template <class T>
Var<T> correlation_matrix(const Var<T>& zs, const Var<T>& zt) {
    if (zs.shape() != zt.shape() || zs.shape().size() != 2) {
        throw ContractError("correlation_matrix: feature batches differ " + shape_str(zs.shape()) + " vs " +
                            shape_str(zt.shape()));
    }
    const std::size_t b = zs.shape()[0];
    if (b < 2) {
        throw ContractError("correlation_matrix: batch size must be >= 2, got " + std::to_string(b));
    }
    return scale(matmul(transpose(zs), zt), T(1) / T(b));
}

template <class T>
Var<T> cg_loss(const Var<T>& corr, int alpha, T eps) {
    if (alpha < 1) {
        throw ContractError("cg_loss: alpha must be >= 1, got " + std::to_string(alpha));
    }
    const Var<T> dev = add_scalar(diagonal(corr), T(-1));
    return log2(add_scalar(sum(pow_int(dev, 2 * alpha)), eps));
}

template <class T>
Var<T> mi_loss(const Var<T>& f_main, const Var<T>& f_noisy, const linalg::KernelSpec& main_kernel,
               const linalg::KernelSpec& noisy_kernel) {
    if (f_main.shape().size() != 2 || f_noisy.shape().size() != 2 || f_main.shape()[0] != f_noisy.shape()[0]) {
        throw ContractError("mi_loss: feature batches differ " + shape_str(f_main.shape()) + " vs " +
                            shape_str(f_noisy.shape()));
    }
    if (f_main.shape()[0] < 2) {
        throw ContractError("mi_loss: batch size must be >= 2");
    }
    const Var<T> k1 = ad::trace_normalize(ad::gram(stop_gradient(f_main), main_kernel));
    const Var<T> k2 = ad::trace_normalize(ad::gram(f_noisy, noisy_kernel));
    const Var<T> k12 = ad::hadamard(k1, k2);
    return sub(ad::matrix_renyi_entropy_a2(k12), ad::matrix_renyi_entropy_a2(k2));
}

template <class T>
Var<T> pixel_consistency_loss(const Var<T>& p1, const Var<T>& p2, const Var<T>& teacher) {
    if (p1.shape() != teacher.shape() || p2.shape() != teacher.shape()) {
        throw ContractError("pixel_consistency_loss: shape mismatch " + shape_str(p1.shape()) + ", " +
                            shape_str(p2.shape()) + " vs " + shape_str(teacher.shape()));
    }
    const auto& s = teacher.shape();
    if (s.size() != 4) {
        throw ContractError("pixel_consistency_loss: expected [B,C,H,W], got " + shape_str(s));
    }
    const std::size_t B = s[0], C = s[1], hw = s[2] * s[3];
    for (const Var<T>* v : {&p1, &p2, &teacher}) {
        const auto& x = v->value().data;
        for (std::size_t b = 0; b < B; ++b) {
            for (std::size_t i = 0; i < hw; ++i) {
                double total = 0.0;
                for (std::size_t c = 0; c < C; ++c) {
                    total += x[(b * C + c) * hw + i];
                }
                if (std::abs(total - 1.0) > 1e-5) {
                    throw ContractError("pixel_consistency_loss: channel sums must be 1, found " +
                                        std::to_string(total));
                }
            }
        }
    }
    const Var<T> y = stop_gradient(teacher);
    return add(mean(square(sub(p1, y))), mean(square(sub(p2, y))));
}

template <class T>
Var<T> total_loss(const LossParts<T>& parts, const LossWeights& weights) {
    if (!parts.sup.valid()) {
        throw ContractError("total_loss: supervised term is required");
    }
    Var<T> total = parts.sup;
    if (weights.enable_cg && parts.cg.valid()) {
        total = add(total, scale(parts.cg, T(weights.beta_cg)));
    }
    if (weights.enable_mi && parts.mi.valid()) {
        total = add(total, scale(parts.mi, T(weights.beta_mi)));
    }
    if (weights.enable_pix && parts.pix.valid()) {
        total = add(total, parts.pix);
    }
    return total;
}

#define HDC_INSTANTIATE_LOSSES(T)                                                                        \
    template Var<T> cross_entropy(const Var<T>&, std::span<const std::int32_t>);                        \
    template Var<T> supervised_loss(const Var<T>&, const Var<T>&, std::span<const std::int32_t>);       \
    template Var<T> correlation_matrix(const Var<T>&, const Var<T>&);                                   \
    template Var<T> cg_loss(const Var<T>&, int, T);                                                     \
    template Var<T> mi_loss(const Var<T>&, const Var<T>&, const linalg::KernelSpec&,                    \
                            const linalg::KernelSpec&);                                                  \
    template Var<T> pixel_consistency_loss(const Var<T>&, const Var<T>&, const Var<T>&);                \
    template Var<T> total_loss(const LossParts<T>&, const LossWeights&);

HDC_INSTANTIATE_LOSSES(float)
HDC_INSTANTIATE_LOSSES(double)

}  // namespace hdc::losses
