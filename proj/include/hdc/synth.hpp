#pragma once

#include <cstddef>
#include <cstdint>

#include "hdc/image.hpp"

namespace hdc::synth {

/// Ultrasound-like rendering knobs. An elliptical structure (class 1) sits on a slightly darker
/// background; with three classes a smaller second ellipse (class 2) overlaps it.
struct SynthParams {
    std::size_t classes = 2;
    float background = 0.45f;
    float foreground = 0.55f;
    float second_foreground = 0.65f;
    int speckle_shape = 4;
    float shadow_gain = 0.4f;
    double min_fraction = 0.03;
    double max_fraction = 0.5;
};

struct Sample {
    Image image;
    LabelMap mask;
    std::uint64_t id = 0;
};

// Fully determined by (seed, id). H and W must be >= 32 and divisible by 8.
Sample generate_sample(std::uint64_t seed, std::uint64_t id, std::size_t height, std::size_t width,
                       const SynthParams& params = {});

double foreground_fraction(const LabelMap& mask);

}  // namespace hdc::synth
