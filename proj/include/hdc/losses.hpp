#pragma once

#include <cstdint>
#include <span>

#include "hdc/linalg.hpp"
#include "hdc/tape.hpp"

namespace hdc::losses {

/// Weights and ablation switches of the combined objective. The supervised term is always on.
struct LossWeights {
    double beta_cg = 0.5;
    double beta_mi = 0.1;
    int cg_alpha = 2;
    double cg_eps = 1e-8;
    bool enable_cg = true;
    bool enable_mi = true;
    bool enable_pix = true;

    void validate() const;
    bool any_unsupervised() const { return enable_cg || enable_mi || enable_pix; }
};

// Mean per-pixel cross-entropy of one logit map [B,C,H,W] against class indices [B,H,W] (natural log).
template <class T>
ad::Var<T> cross_entropy(const ad::Var<T>& logits, std::span<const std::int32_t> mask);

// Sum over both decoders of the mean per-pixel cross-entropy.
template <class T>
ad::Var<T> supervised_loss(const ad::Var<T>& p1, const ad::Var<T>& p2, std::span<const std::int32_t> mask);

// Zs^T Zt / b for column-standardized [b, d] batches.
template <class T>
ad::Var<T> correlation_matrix(const ad::Var<T>& zs, const ad::Var<T>& zt);

// log2(eps + sum_i (C_ii - 1)^(2 alpha)).
template <class T>
ad::Var<T> cg_loss(const ad::Var<T>& corr, int alpha, T eps);

// H2(K1 ∘ K2) - H2(K2) with K1 built from stop_gradient(f_main); gradient reaches f_noisy only.
template <class T>
ad::Var<T> mi_loss(const ad::Var<T>& f_main, const ad::Var<T>& f_noisy, const linalg::KernelSpec& main_kernel,
                   const linalg::KernelSpec& noisy_kernel);

template <class T>
ad::Var<T> mi_loss(const ad::Var<T>& f_main, const ad::Var<T>& f_noisy, const linalg::KernelSpec& kernel) {
    return mi_loss(f_main, f_noisy, kernel, kernel);
}

// mean((p1 - y)^2) + mean((p2 - y)^2) over probability maps; `teacher` is treated as a constant.
template <class T>
ad::Var<T> pixel_consistency_loss(const ad::Var<T>& p1, const ad::Var<T>& p2, const ad::Var<T>& teacher);

/// Loss terms of one step; unset terms hold an invalid Var.
template <class T>
struct LossParts {
    ad::Var<T> sup;
    ad::Var<T> cg;
    ad::Var<T> mi;
    ad::Var<T> pix;
};

template <class T>
ad::Var<T> total_loss(const LossParts<T>& parts, const LossWeights& weights);

}  // namespace hdc::losses
