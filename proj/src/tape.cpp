#include "hdc/tape.hpp"

#include "hdc/errors.hpp"
#include "hdc/rng.hpp"

namespace hdc::ad {

template <class T>
Tensor<T> GradMap<T>::at(const Var<T>& v) const {
    auto it = grads_.find(v.id());
    if (it != grads_.end()) {
        return it->second;
    }
    return Tensor<T>(v.shape());
}

template <class T>
Var<T> Tape<T>::leaf(Tensor<T> value, bool requires_grad) {
    if (backward_done_) {
        throw ContractError("Tape: cannot record after backward");
    }
    if (!all_finite(value)) {
        throw NumericError("Tape: non-finite leaf value of shape " + shape_str(value.shape));
    }
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.is_leaf = true;
    nodes_.push_back(std::move(n));
    return Var<T>(this, nodes_.size() - 1);
}

template <class T>
Var<T> Tape<T>::record(Tensor<T> value, std::initializer_list<Var<T>> inputs, BackwardFn fn) {
    if (backward_done_) {
        throw ContractError("Tape: cannot record after backward");
    }
    if (!all_finite(value)) {
        throw NumericError("Tape: operation produced non-finite output of shape " + shape_str(value.shape));
    }
    bool needs = false;
    for (const auto& in : inputs) {
        if (in.valid() && &in.tape() != this) {
            throw ContractError("Tape: input recorded on a different tape");
        }
        needs = needs || (in.valid() && nodes_[in.id()].requires_grad);
    }
    Node n;
    n.value = std::move(value);
    n.requires_grad = needs;
    n.is_leaf = false;
    if (needs) {
        n.backward = std::move(fn);
    }
    nodes_.push_back(std::move(n));
    return Var<T>(this, nodes_.size() - 1);
}

template <class T>
Tensor<T>* Tape<T>::grad_sink(const Var<T>& v) {
    Node& n = nodes_[v.id()];
    if (!n.requires_grad) {
        return nullptr;
    }
    Tensor<T>& g = grads_[v.id()];
    if (g.data.empty() && !n.value.data.empty()) {
        g = Tensor<T>(n.value.shape);
    }
    return &g;
}

template <class T>
GradMap<T> Tape<T>::backward(const Var<T>& loss) {
    if (backward_done_) {
        throw ContractError("Tape::backward called twice on one recording");
    }
    if (&loss.tape() != this) {
        throw ContractError("Tape::backward: loss belongs to a different tape");
    }
    if (nodes_[loss.id()].value.numel() != 1) {
        throw ContractError("Tape::backward: loss must be scalar, got shape " +
                            shape_str(nodes_[loss.id()].value.shape));
    }
    backward_done_ = true;
    grads_.assign(nodes_.size(), Tensor<T>());
    GradMap<T> out;
    if (!nodes_[loss.id()].requires_grad) {
        return out;
    }
    grads_[loss.id()] = Tensor<T>(nodes_[loss.id()].value.shape, T(1));
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.requires_grad || grads_[i].data.empty()) {
            continue;
        }
        if (n.is_leaf) {
            out.put(i, std::move(grads_[i]));
        } else if (n.backward) {
            // Move out first: the closure may allocate sinks, which never alias node i.
            Tensor<T> g = std::move(grads_[i]);
            n.backward(g, n.value);
            n.backward = nullptr;
        }
    }
    return out;
}

template <class T>
void Tape<T>::mix_fingerprint(std::uint64_t h) {
    fingerprint_ = splitmix64(fingerprint_ ^ h);
}

template <class T>
Tensor<T> Tape<T>::stop_gradient_value(const Tensor<T>& current) {
    if (sg_source_) {
        if (sg_next_ >= sg_source_->size() || (*sg_source_)[sg_next_].shape != current.shape) {
            throw ContractError("Tape: replayed stop-gradient values do not match this recording");
        }
        return (*sg_source_)[sg_next_++];
    }
    if (sg_sink_) {
        sg_sink_->push_back(current);
    }
    return current;
}

template class Tape<float>;
template class Tape<double>;
template class GradMap<float>;
template class GradMap<double>;

}  // namespace hdc::ad
