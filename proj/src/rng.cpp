#include "hdc/rng.hpp"

#include <cmath>
#include <numbers>

#include "hdc/errors.hpp"

namespace hdc {

namespace {
constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ULL;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBULL;
    x ^= x >> 31;
    return x;
}

std::uint64_t SeededRng::next_u64() {
    ++counter_;
    return splitmix64(seed_ + counter_ * kGoldenGamma);
}

double SeededRng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t SeededRng::below(std::uint64_t n) {
    if (n == 0) {
        throw ContractError("SeededRng::below: n must be positive");
    }
    // Rejection keeps the result unbiased for any n.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t r = next_u64();
    while (r >= limit) {
        r = next_u64();
    }
    return r % n;
}

double SeededRng::normal() {
    double u1 = uniform();
    while (u1 <= 0.0) {
        u1 = uniform();
    }
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double SeededRng::unit_mean_gamma(int shape) {
    if (shape < 1) {
        throw ContractError("SeededRng::unit_mean_gamma: shape must be >= 1");
    }
    // Sum of `shape` unit exponentials is Gamma(shape, 1); rescale to mean 1.
    double acc = 0.0;
    for (int i = 0; i < shape; ++i) {
        double u = uniform();
        while (u <= 0.0) {
            u = uniform();
        }
        acc -= std::log(u);
    }
    return acc / shape;
}

SeededRng SeededRng::derive(std::uint64_t tag) const {
    return SeededRng(splitmix64(seed_ ^ splitmix64(tag + kGoldenGamma)), 0);
}

}  // namespace hdc
