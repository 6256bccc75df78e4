#include "hdc/optimizer.hpp"

#include <cmath>
#include <numbers>

#include "hdc/errors.hpp"

namespace hdc::optim {

std::string kind_name(Kind k) {
    return k == Kind::sgd_momentum ? "sgd" : "adamw";
}

Kind parse_kind(const std::string& s) {
    if (s == "sgd") {
        return Kind::sgd_momentum;
    }
    if (s == "adamw") {
        return Kind::adamw;
    }
    throw ContractError("optimizer kind must be 'sgd' or 'adamw', got '" + s + "'");
}

double default_weight_decay(Kind k) {
    return k == Kind::adamw ? 0.05 : 1e-4;
}

void OptimizerConfig::validate() const {
    if (!(lr >= 0.0) || !std::isfinite(lr)) {
        throw ContractError("optimizer: learning rate must be finite and >= 0");
    }
    if (!(momentum >= 0.0 && momentum < 1.0) || !(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        throw ContractError("optimizer: momentum and moment decays must lie in [0, 1)");
    }
    if (!(eps > 0.0) || !(weight_decay >= 0.0)) {
        throw ContractError("optimizer: eps must be > 0 and weight decay >= 0");
    }
}

double cosine_lr(double base, std::size_t t, std::size_t total) {
    if (total == 0) {
        return base;
    }
    const double f = double(std::min(t, total)) / double(total);
    return base * 0.5 * (1.0 + std::cos(std::numbers::pi * f));
}

template <class T>
void optimizer_step(std::span<Tensor<T>* const> params, std::span<const Tensor<T>> grads, const OptimizerConfig& cfg,
                    OptimizerState<T>& state, double lr) {
    if (params.size() != grads.size()) {
        throw ContractError("optimizer_step: " + std::to_string(params.size()) + " parameters but " +
                            std::to_string(grads.size()) + " gradients");
    }
    const bool adam = cfg.kind == Kind::adamw;
    if (state.first.empty()) {
        for (const auto* p : params) {
            state.first.emplace_back(p->shape);
            if (adam) {
                state.second.emplace_back(p->shape);
            }
        }
    }
    if (state.first.size() != params.size() || (adam && state.second.size() != params.size())) {
        throw ContractError("optimizer_step: state does not match the parameter list");
    }
    ++state.steps;
    const T wd = T(cfg.weight_decay);
    const T eta = T(lr);
    const T b1 = T(cfg.beta1), b2 = T(cfg.beta2), eps = T(cfg.eps);
    const T c1 = T(1.0 - std::pow(cfg.beta1, double(state.steps)));
    const T c2 = T(1.0 - std::pow(cfg.beta2, double(state.steps)));
    const T mom = T(cfg.momentum);
    for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor<T>& p = *params[k];
        const Tensor<T>& g = grads[k];
        if (g.shape != p.shape || state.first[k].shape != p.shape) {
            throw ContractError("optimizer_step: shape mismatch for parameter " + std::to_string(k) + ": " +
                                shape_str(p.shape) + " vs gradient " + shape_str(g.shape));
        }
        T* th = p.data.data();
        T* m = state.first[k].data.data();
        const T* gr = g.data.data();
        const std::size_t n = p.numel();
        if (adam) {
            T* v = state.second[k].data.data();
            for (std::size_t i = 0; i < n; ++i) {
                m[i] = b1 * m[i] + (T(1) - b1) * gr[i];
                v[i] = b2 * v[i] + (T(1) - b2) * gr[i] * gr[i];
                const T mh = m[i] / c1, vh = v[i] / c2;
                th[i] -= eta * (mh / (std::sqrt(vh) + eps) + wd * th[i]);
            }
        } else {
            for (std::size_t i = 0; i < n; ++i) {
                m[i] = mom * m[i] + gr[i];
                th[i] -= eta * (m[i] + wd * th[i]);
            }
        }
    }
}

template void optimizer_step<float>(std::span<Tensor<float>* const>, std::span<const Tensor<float>>,
                                    const OptimizerConfig&, OptimizerState<float>&, double);
template void optimizer_step<double>(std::span<Tensor<double>* const>, std::span<const Tensor<double>>,
                                     const OptimizerConfig&, OptimizerState<double>&, double);

}  // namespace hdc::optim
