#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hdc/tape.hpp"

// Differentiable operations. Every op records onto the tape of its first input and
// throws ContractError with both shapes on mismatch.
namespace hdc::ad {

// Linear algebra.
template <class T> Var<T> matmul(const Var<T>& a, const Var<T>& b);  // [m,k] x [k,n]
template <class T> Var<T> transpose(const Var<T>& a);                 // 2-D only
template <class T> Var<T> trace(const Var<T>& a);                     // square -> scalar
template <class T> Var<T> diagonal(const Var<T>& a);                  // square [n,n] -> [n]

// Elementwise, identical shapes.
template <class T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <class T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <class T> Var<T> mul(const Var<T>& a, const Var<T>& b);
// a / s for a scalar-valued s.
template <class T> Var<T> div_by(const Var<T>& a, const Var<T>& s);

template <class T> Var<T> scale(const Var<T>& a, T c);
template <class T> Var<T> add_scalar(const Var<T>& a, T c);
template <class T> Var<T> relu(const Var<T>& a);
template <class T> Var<T> square(const Var<T>& a);
template <class T> Var<T> pow_int(const Var<T>& a, int n);
template <class T> Var<T> log(const Var<T>& a);
template <class T> Var<T> log2(const Var<T>& a);

// Reductions to a scalar of shape [].
template <class T> Var<T> sum(const Var<T>& a);
template <class T> Var<T> mean(const Var<T>& a);

template <class T> Var<T> reshape(const Var<T>& a, Shape shape);

// Image ops on [B,C,H,W].
// weight [Co,Ci,k,k] with k in {1,3}, zero padding k/2, stride in {1,2}; bias [Co] or invalid Var.
template <class T> Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, int stride);
template <class T> Var<T> upsample2x(const Var<T>& x);
template <class T> Var<T> global_avg_pool(const Var<T>& x);  // -> [B,C]
template <class T> Var<T> softmax_channels(const Var<T>& x);
template <class T> Var<T> log_softmax_channels(const Var<T>& x);
// out[b,h,w] = x[b, labels[b,h,w], h, w]; labels hold class indices in [0, C).
template <class T> Var<T> pick_channels(const Var<T>& x, std::span<const std::int32_t> labels);

// [b,d]: subtract column mean, divide by the biased column standard deviation floored at eps.
template <class T> Var<T> standardize_columns(const Var<T>& z, T eps = T(1e-5));

// Identity forward; the output is a constant, so no gradient reaches the input.
template <class T> Var<T> stop_gradient(const Var<T>& a);
// Identity forward, negated gradient. Used to build deliberately broken fixtures.
template <class T> Var<T> flip_gradient(const Var<T>& a);

}  // namespace hdc::ad
