#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "hdc/tape.hpp"

namespace hdc::ad {

struct FdReport {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    // Coordinates whose perturbation flipped a relu/floor decision; the function is not
    // differentiable across them, so they are excluded.
    std::size_t skipped = 0;
};

template <class T>
using MultiScalarFn = std::function<Var<T>(Tape<T>&, const std::vector<Var<T>>&)>;

template <class T>
using ScalarFn = std::function<Var<T>(Tape<T>&, const Var<T>&)>;

/// (input index, element index) pairs.
using Coords = std::vector<std::pair<std::size_t, std::size_t>>;

/// Central-difference check of the tape gradient of `f` at `inputs`.
/// Error per coordinate is |analytic - numeric| / max(1, |analytic|); the report carries the max.
/// An empty `coords` checks every element of every input. Stop-gradient outputs are held at
/// their base-point values in the perturbed evaluations.
template <class T>
FdReport finite_diff_check(const MultiScalarFn<T>& f, const std::vector<Tensor<T>>& inputs, T step,
                           const Coords& coords = {});

template <class T>
FdReport finite_diff_check(const ScalarFn<T>& f, const Tensor<T>& x, T step);

}  // namespace hdc::ad
