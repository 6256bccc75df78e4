#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <unordered_map>
#include <vector>

#include "hdc/tensor.hpp"

namespace hdc::ad {

template <class T>
class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; valid while the tape lives.
template <class T>
class Var {
  public:
    Var() = default;
    Var(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

    Tape<T>& tape() const { return *tape_; }
    std::size_t id() const { return id_; }
    bool valid() const { return tape_ != nullptr; }

    const Tensor<T>& value() const;
    const Shape& shape() const { return value().shape; }
    bool requires_grad() const;

  private:
    Tape<T>* tape_ = nullptr;
    std::size_t id_ = 0;
};

/// Gradients of one backward pass, keyed by node id.
template <class T>
class GradMap {
  public:
    // Zero tensor of the node's shape when no gradient reached it.
    Tensor<T> at(const Var<T>& v) const;
    bool has(const Var<T>& v) const { return grads_.contains(v.id()); }
    void put(std::size_t id, Tensor<T> g) { grads_.emplace(id, std::move(g)); }

  private:
    std::unordered_map<std::size_t, Tensor<T>> grads_;
};

/// Reverse-mode recording of one forward computation. A node requires a gradient
/// iff it is a requires-grad leaf or any of its inputs requires one; backward closures
/// are only stored for such nodes, so constant-only subgraphs cost nothing extra.
template <class T>
class Tape {
  public:
    // Receives the upstream gradient and the node's own forward value.
    using BackwardFn = std::function<void(const Tensor<T>& grad_out, const Tensor<T>& out)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var<T> leaf(Tensor<T> value, bool requires_grad = true);
    Var<T> constant(Tensor<T> value) { return leaf(std::move(value), false); }

    // For op implementations. Validates finiteness of `value`.
    Var<T> record(Tensor<T> value, std::initializer_list<Var<T>> inputs, BackwardFn fn);

    const Tensor<T>& value(const Var<T>& v) const { return nodes_[v.id()].value; }
    bool requires_grad(const Var<T>& v) const { return nodes_[v.id()].requires_grad; }
    std::size_t size() const { return nodes_.size(); }

    // Gradient accumulator of an input during backward; nullptr if it does not require grad.
    Tensor<T>* grad_sink(const Var<T>& v);

    GradMap<T> backward(const Var<T>& loss);

    // Non-smooth ops (relu, max) fold their branch decisions in here so that finite-difference
    // checks can tell when a perturbation crossed a kink.
    void mix_fingerprint(std::uint64_t h);
    std::uint64_t fingerprint() const { return fingerprint_; }

    // Stop-gradient outputs can be captured on one recording and replayed, in order, on another.
    // Finite-difference checks use this to hold them at the values the backward pass treats as
    // constants.
    void capture_stop_gradients(std::vector<Tensor<T>>* sink) { sg_sink_ = sink; }
    void replay_stop_gradients(const std::vector<Tensor<T>>* source) { sg_source_ = source; }
    Tensor<T> stop_gradient_value(const Tensor<T>& current);

  private:
    struct Node {
        Tensor<T> value;
        bool requires_grad = false;
        bool is_leaf = true;
        BackwardFn backward;
    };

    std::vector<Node> nodes_;
    std::vector<Tensor<T>> grads_;
    bool backward_done_ = false;
    std::uint64_t fingerprint_ = 0;
    std::vector<Tensor<T>>* sg_sink_ = nullptr;
    const std::vector<Tensor<T>>* sg_source_ = nullptr;
    std::size_t sg_next_ = 0;
};

template <class T>
const Tensor<T>& Var<T>::value() const {
    return tape_->value(*this);
}

template <class T>
bool Var<T>::requires_grad() const {
    return tape_->requires_grad(*this);
}

}  // namespace hdc::ad
