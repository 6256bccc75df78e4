#pragma once

#include <cstdint>

namespace hdc {

/// Counter-based generator: draw k of a stream is SplitMix64(seed + k * golden-gamma).
/// The same (seed, counter) pair produces the same value on every platform, so a stream
/// can be checkpointed as two integers and forked into independent substreams.
class SeededRng {
  public:
    explicit SeededRng(std::uint64_t seed = 0, std::uint64_t counter = 0) : seed_(seed), counter_(counter) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t counter() const { return counter_; }

    std::uint64_t next_u64();
    // Uniform in [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);
    bool coin(double p = 0.5) { return uniform() < p; }
    // Box-Muller; consumes two draws per call.
    double normal();
    // Gamma(shape, 1/shape) for integer shape: mean 1, variance 1/shape.
    double unit_mean_gamma(int shape);

    // Independent substream keyed by tag; does not advance this stream.
    SeededRng derive(std::uint64_t tag) const;

  private:
    std::uint64_t seed_;
    std::uint64_t counter_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace hdc
