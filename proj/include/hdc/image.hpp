#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace hdc {

/// Row-major single-channel image; intensities nominally in [0, 1].
struct Image {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<float> pixels;

    Image() = default;
    Image(std::size_t h, std::size_t w, float fill = 0.0f) : height(h), width(w), pixels(h * w, fill) {}

    float& operator()(std::size_t y, std::size_t x) { return pixels[y * width + x]; }
    float operator()(std::size_t y, std::size_t x) const { return pixels[y * width + x]; }
    bool operator==(const Image&) const = default;
};

/// Row-major class-index map.
struct LabelMap {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint8_t> labels;

    LabelMap() = default;
    LabelMap(std::size_t h, std::size_t w, std::uint8_t fill = 0) : height(h), width(w), labels(h * w, fill) {}

    std::uint8_t& operator()(std::size_t y, std::size_t x) { return labels[y * width + x]; }
    std::uint8_t operator()(std::size_t y, std::size_t x) const { return labels[y * width + x]; }
    bool operator==(const LabelMap&) const = default;
};

}  // namespace hdc
