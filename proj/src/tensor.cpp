#include "hdc/tensor.hpp"

#include <cmath>
#include <sstream>

namespace hdc {

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) {
        n *= d;
    }
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        os << (i ? "," : "") << shape[i];
    }
    os << ']';
    return os.str();
}

template <class T>
bool all_finite(const Tensor<T>& t) {
    for (T v : t.data) {
        if (!std::isfinite(v)) {
            return false;
        }
    }
    return true;
}

template bool all_finite(const Tensor<float>&);
template bool all_finite(const Tensor<double>&);

}  // namespace hdc
