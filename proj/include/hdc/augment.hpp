#pragma once

#include <optional>

#include "hdc/image.hpp"
#include "hdc/rng.hpp"
#include "hdc/tape.hpp"

namespace hdc::aug {

enum class Level { weak, strong };

// Applied in order: transpose, rotate counter-clockwise by 90 * rot90 degrees, flip_h, flip_v.
struct GeometricDraw {
    bool transpose = false;
    int rot90 = 0;
    bool flip_h = false;
    bool flip_v = false;

    bool identity() const { return !transpose && rot90 % 4 == 0 && !flip_h && !flip_v; }
};

// x -> clamp(autocontrast?(contrast * x + brightness) + N(0, noise_std), 0, 1)
struct IntensityDraw {
    double contrast = 1.0;
    double brightness = 0.0;
    bool auto_contrast = false;
    double noise_std = 0.0;
};

struct AugmentSpec {
    Level level = Level::weak;
    GeometricDraw geometric;
    IntensityDraw intensity;  // identity for weak specs
    double strength = 0.0;    // distortion strength s in [0, 1]
};

struct WeakResult {
    Image image;
    std::optional<LabelMap> mask;
    AugmentSpec spec;
};

Image apply_geometric(const Image& img, const GeometricDraw& g);
LabelMap apply_geometric(const LabelMap& mask, const GeometricDraw& g);

// Quarter turns and transposes are only drawn for square images.
GeometricDraw draw_geometric(SeededRng& rng, bool square);

WeakResult weak_augment(const Image& img, const std::optional<LabelMap>& mask, SeededRng& rng);

// Magnitudes for strength s: contrast in [1-0.4s, 1+0.4s], brightness in [-0.2s, 0.2s],
// auto-contrast with probability 0.5 (never at s = 0), noise std 0.1s.
IntensityDraw draw_intensity(SeededRng& rng, double strength);

// `noise_rng` supplies the per-pixel Gaussian draws.
Image apply_intensity(const Image& img, const IntensityDraw& d, SeededRng& noise_rng);

// Linear rescale so min -> 0 and max -> 1; constant images are returned unchanged.
Image auto_contrast(const Image& img);

// Draws s ~ U(0, max_strength), then an intensity draw at s. Pixels are never moved.
Image strong_augment(const Image& img, SeededRng& rng, double max_strength = 1.0, AugmentSpec* spec_out = nullptr);

/// Feature noise z * (1 + n), n ~ U(-gamma, gamma) elementwise; the noise tensor is a constant.
template <class T>
ad::Var<T> f_noise(const ad::Var<T>& z, double gamma, SeededRng& rng);

}  // namespace hdc::aug
