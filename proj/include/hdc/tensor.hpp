#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "hdc/errors.hpp"

namespace hdc {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major n-dimensional array. Plain value type; autodiff bookkeeping lives on the Tape.
template <class T>
struct Tensor {
    Shape shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(Shape s, T fill = T(0)) : shape(std::move(s)), data(shape_numel(shape), fill) {}
    Tensor(Shape s, std::vector<T> values) : shape(std::move(s)), data(std::move(values)) {
        if (data.size() != shape_numel(shape)) {
            throw ContractError("Tensor: " + std::to_string(data.size()) + " values do not fill shape " +
                                shape_str(shape));
        }
    }

    static Tensor scalar(T v) { return Tensor(Shape{}, std::vector<T>{v}); }

    std::size_t numel() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }
    std::size_t dim(std::size_t i) const { return shape.at(i); }

    T& operator[](std::size_t i) { return data[i]; }
    const T& operator[](std::size_t i) const { return data[i]; }

    T& at(std::size_t r, std::size_t c) { return data[r * shape[1] + c]; }
    const T& at(std::size_t r, std::size_t c) const { return data[r * shape[1] + c]; }

    T item() const {
        if (data.size() != 1) {
            throw ContractError("Tensor::item on tensor of shape " + shape_str(shape));
        }
        return data[0];
    }

    bool operator==(const Tensor& other) const = default;
};

template <class To, class From>
Tensor<To> tensor_cast(const Tensor<From>& src) {
    Tensor<To> out;
    out.shape = src.shape;
    out.data.assign(src.data.begin(), src.data.end());
    return out;
}

template <class T>
bool all_finite(const Tensor<T>& t);

}  // namespace hdc
