#include "hdc/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace hdc::ad {

namespace {

template <class T>
std::pair<T, std::uint64_t> evaluate(const MultiScalarFn<T>& f, const std::vector<Tensor<T>>& inputs,
                                     const std::vector<Tensor<T>>& frozen) {
    Tape<T> tape;
    tape.replay_stop_gradients(&frozen);
    std::vector<Var<T>> vars;
    vars.reserve(inputs.size());
    for (const auto& t : inputs) {
        vars.push_back(tape.constant(t));
    }
    const Var<T> out = f(tape, vars);
    return {out.value().item(), tape.fingerprint()};
}

}  // namespace

template <class T>
FdReport finite_diff_check(const MultiScalarFn<T>& f, const std::vector<Tensor<T>>& inputs, T step,
                           const Coords& coords) {
    Tape<T> tape;
    std::vector<Tensor<T>> frozen;
    tape.capture_stop_gradients(&frozen);
    std::vector<Var<T>> vars;
    for (const auto& t : inputs) {
        vars.push_back(tape.leaf(t, true));
    }
    const Var<T> out = f(tape, vars);
    const std::uint64_t base_print = tape.fingerprint();
    const GradMap<T> grads = tape.backward(out);
    std::vector<Tensor<T>> analytic;
    for (const auto& v : vars) {
        analytic.push_back(grads.at(v));
    }

    Coords todo = coords;
    if (todo.empty()) {
        for (std::size_t k = 0; k < inputs.size(); ++k) {
            for (std::size_t i = 0; i < inputs[k].numel(); ++i) {
                todo.emplace_back(k, i);
            }
        }
    }

    FdReport report;
    std::vector<Tensor<T>> probe = inputs;
    for (const auto& [k, i] : todo) {
        const T orig = probe[k].data[i];
        probe[k].data[i] = orig + step;
        const auto [fp, print_p] = evaluate(f, probe, frozen);
        probe[k].data[i] = orig - step;
        const auto [fm, print_m] = evaluate(f, probe, frozen);
        probe[k].data[i] = orig;
        if (print_p != base_print || print_m != base_print) {
            ++report.skipped;
            continue;
        }
        const double numeric = (static_cast<double>(fp) - static_cast<double>(fm)) / (2.0 * step);
        const double a = analytic[k].data[i];
        const double err = std::abs(a - numeric) / std::max(1.0, std::abs(a));
        report.max_rel_error = std::max(report.max_rel_error, err);
        ++report.checked;
    }
    return report;
}

template <class T>
FdReport finite_diff_check(const ScalarFn<T>& f, const Tensor<T>& x, T step) {
    MultiScalarFn<T> g = [&f](Tape<T>& tape, const std::vector<Var<T>>& v) { return f(tape, v[0]); };
    return finite_diff_check<T>(g, std::vector<Tensor<T>>{x}, step);
}

template FdReport finite_diff_check(const MultiScalarFn<float>&, const std::vector<Tensor<float>>&, float,
                                    const Coords&);
template FdReport finite_diff_check(const MultiScalarFn<double>&, const std::vector<Tensor<double>>&, double,
                                    const Coords&);
template FdReport finite_diff_check(const ScalarFn<float>&, const Tensor<float>&, float);
template FdReport finite_diff_check(const ScalarFn<double>&, const Tensor<double>&, double);

}  // namespace hdc::ad
