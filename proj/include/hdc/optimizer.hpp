#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hdc/tensor.hpp"

namespace hdc::optim {

enum class Kind { sgd_momentum, adamw };

std::string kind_name(Kind k);
Kind parse_kind(const std::string& s);  // "sgd" | "adamw"

struct OptimizerConfig {
    Kind kind = Kind::adamw;
    double lr = 1e-4;
    double momentum = 0.9;  // sgd
    double beta1 = 0.9;     // adamw
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.05;

    void validate() const;
};

// Default decoupled weight decay per optimizer kind.
double default_weight_decay(Kind k);

// eta * (1 + cos(pi t / T)) / 2, with t clamped to [0, T].
double cosine_lr(double base, std::size_t t, std::size_t total);

/// Moment buffers aligned with the parameter list; `steps` counts completed updates.
template <class T>
struct OptimizerState {
    std::vector<Tensor<T>> first;
    std::vector<Tensor<T>> second;  // adamw only
    std::uint64_t steps = 0;

    bool operator==(const OptimizerState&) const = default;
};

// sgd:   v <- momentum v + g;  theta <- theta - lr (v + wd theta)
// adamw: bias-corrected moments; theta <- theta - lr (m_hat / (sqrt(v_hat) + eps) + wd theta)
template <class T>
void optimizer_step(std::span<Tensor<T>* const> params, std::span<const Tensor<T>> grads, const OptimizerConfig& cfg,
                    OptimizerState<T>& state, double lr);

}  // namespace hdc::optim
