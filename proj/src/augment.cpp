#include "hdc/augment.hpp"

#include <algorithm>
#include <string>

#include "hdc/errors.hpp"
#include "hdc/ops.hpp"

namespace hdc::aug {

namespace {

// Each output pixel pulls from its source, undoing the chain last step first.
template <class Map>
Map geometric_impl(const Map& in, const GeometricDraw& g) {
    const std::size_t H = in.height, W = in.width;
    const int r = ((g.rot90 % 4) + 4) % 4;
    const bool swap = g.transpose != (r % 2 == 1);
    if (swap && H != W) {
        throw ContractError("apply_geometric: transpose/quarter-turn needs a square image, got " +
                            std::to_string(H) + "x" + std::to_string(W));
    }
    Map out = in;
    const std::size_t oh = swap ? W : H, ow = swap ? H : W;
    out.height = oh;
    out.width = ow;
    for (std::size_t y = 0; y < oh; ++y) {
        for (std::size_t x = 0; x < ow; ++x) {
            std::size_t sy = g.flip_v ? oh - 1 - y : y;
            std::size_t sx = g.flip_h ? ow - 1 - x : x;
            // Undo counter-clockwise quarter turns: new(y, x) = old(x, n - 1 - y).
            if (r == 2) {
                sy = oh - 1 - sy;
                sx = ow - 1 - sx;
            } else {
                for (int k = 0; k < r; ++k) {
                    const std::size_t ty = sx, tx = oh - 1 - sy;
                    sy = ty;
                    sx = tx;
                }
            }
            if (g.transpose) {
                std::swap(sy, sx);
            }
            if constexpr (std::is_same_v<Map, Image>) {
                out.pixels[y * ow + x] = in.pixels[sy * W + sx];
            } else {
                out.labels[y * ow + x] = in.labels[sy * W + sx];
            }
        }
    }
    return out;
}

}  // namespace

Image apply_geometric(const Image& img, const GeometricDraw& g) {
    return geometric_impl(img, g);
}

LabelMap apply_geometric(const LabelMap& mask, const GeometricDraw& g) {
    return geometric_impl(mask, g);
}

GeometricDraw draw_geometric(SeededRng& rng, bool square) {
    GeometricDraw g;
    g.flip_h = rng.coin();
    g.flip_v = rng.coin();
    if (square) {
        g.rot90 = static_cast<int>(rng.below(4));
        g.transpose = rng.coin();
    } else {
        g.rot90 = rng.coin() ? 2 : 0;
    }
    return g;
}

WeakResult weak_augment(const Image& img, const std::optional<LabelMap>& mask, SeededRng& rng) {
    if (mask && (mask->height != img.height || mask->width != img.width)) {
        throw ContractError("weak_augment: image and mask are not aligned");
    }
    WeakResult r;
    r.spec.level = Level::weak;
    r.spec.geometric = draw_geometric(rng, img.height == img.width);
    r.image = apply_geometric(img, r.spec.geometric);
    if (mask) {
        r.mask = apply_geometric(*mask, r.spec.geometric);
    }
    return r;
}

IntensityDraw draw_intensity(SeededRng& rng, double strength) {
    if (!(strength >= 0.0 && strength <= 1.0)) {
        throw ContractError("draw_intensity: strength must lie in [0, 1], got " + std::to_string(strength));
    }
    IntensityDraw d;
    d.contrast = rng.uniform(1.0 - 0.4 * strength, 1.0 + 0.4 * strength);
    d.brightness = rng.uniform(-0.2 * strength, 0.2 * strength);
    const bool coin = rng.coin();
    d.auto_contrast = strength > 0.0 && coin;
    d.noise_std = 0.1 * strength;
    return d;
}

Image auto_contrast(const Image& img) {
    if (img.pixels.empty()) {
        return img;
    }
    const auto [lo, hi] = std::minmax_element(img.pixels.begin(), img.pixels.end());
    const float mn = *lo, mx = *hi;
    if (!(mx > mn)) {
        return img;
    }
    Image out = img;
    for (float& v : out.pixels) {
        v = (v - mn) / (mx - mn);
    }
    return out;
}

Image apply_intensity(const Image& img, const IntensityDraw& d, SeededRng& noise_rng) {
    Image out = img;
    for (float& v : out.pixels) {
        v = static_cast<float>(d.contrast * v + d.brightness);
    }
    if (d.auto_contrast) {
        out = auto_contrast(out);
    }
    if (d.noise_std > 0.0) {
        for (float& v : out.pixels) {
            v += static_cast<float>(d.noise_std * noise_rng.normal());
        }
    }
    for (float& v : out.pixels) {
        v = std::clamp(v, 0.0f, 1.0f);
    }
    return out;
}

Image strong_augment(const Image& img, SeededRng& rng, double max_strength, AugmentSpec* spec_out) {
    if (!(max_strength >= 0.0 && max_strength <= 1.0)) {
        throw ContractError("strong_augment: max strength must lie in [0, 1]");
    }
    const double s = max_strength > 0.0 ? rng.uniform(0.0, max_strength) : 0.0;
    const IntensityDraw d = draw_intensity(rng, s);
    SeededRng noise = rng.derive(rng.next_u64());
    if (spec_out) {
        spec_out->level = Level::strong;
        spec_out->geometric = {};
        spec_out->intensity = d;
        spec_out->strength = s;
    }
    return apply_intensity(img, d, noise);
}

template <class T>
ad::Var<T> f_noise(const ad::Var<T>& z, double gamma, SeededRng& rng) {
    if (!(gamma >= 0.0)) {
        throw ContractError("f_noise: gamma must be >= 0, got " + std::to_string(gamma));
    }
    if (gamma == 0.0) {
        return z;
    }
    Tensor<T> factor(z.shape());
    for (T& v : factor.data) {
        v = T(1) + T(rng.uniform(-gamma, gamma));
    }
    return ad::mul(z, z.tape().constant(std::move(factor)));
}

template ad::Var<float> f_noise(const ad::Var<float>&, double, SeededRng&);
template ad::Var<double> f_noise(const ad::Var<double>&, double, SeededRng&);

}  // namespace hdc::aug
