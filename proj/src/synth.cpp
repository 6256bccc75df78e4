#include "hdc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "hdc/errors.hpp"
#include "hdc/rng.hpp"

namespace hdc::synth {

namespace {

struct Ellipse {
    double cy, cx, ay, ax, angle;

    bool contains(double y, double x) const {
        const double dy = y - cy, dx = x - cx;
        const double c = std::cos(angle), s = std::sin(angle);
        const double u = (dx * c + dy * s) / ax;
        const double v = (-dx * s + dy * c) / ay;
        return u * u + v * v <= 1.0;
    }
};

Ellipse draw_ellipse(SeededRng& rng, double h, double w, double lo, double hi) {
    Ellipse e{};
    e.cy = rng.uniform(0.3, 0.7) * h;
    e.cx = rng.uniform(0.3, 0.7) * w;
    e.ay = rng.uniform(lo, hi) * h;
    e.ax = rng.uniform(lo, hi) * w;
    e.angle = rng.uniform(0.0, std::numbers::pi);
    return e;
}

void fill(LabelMap& m, const Ellipse& e, std::uint8_t label) {
    for (std::size_t y = 0; y < m.height; ++y) {
        for (std::size_t x = 0; x < m.width; ++x) {
            if (e.contains(double(y) + 0.5, double(x) + 0.5)) {
                m(y, x) = label;
            }
        }
    }
}

// Separable [1 2 1] / 4 smoothing with replicated borders.
void blur3(Image& img) {
    const std::size_t h = img.height, w = img.width;
    Image tmp(h, w);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            const float l = img(y, x == 0 ? 0 : x - 1), r = img(y, std::min(x + 1, w - 1));
            tmp(y, x) = 0.25f * l + 0.5f * img(y, x) + 0.25f * r;
        }
    }
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            const float u = tmp(y == 0 ? 0 : y - 1, x), d = tmp(std::min(y + 1, h - 1), x);
            img(y, x) = 0.25f * u + 0.5f * tmp(y, x) + 0.25f * d;
        }
    }
}

bool fractions_ok(const LabelMap& m, const SynthParams& p) {
    const double f = foreground_fraction(m);
    if (f < p.min_fraction || f > p.max_fraction) {
        return false;
    }
    if (p.classes == 3) {
        const auto twos = std::count(m.labels.begin(), m.labels.end(), std::uint8_t{2});
        const auto ones = std::count(m.labels.begin(), m.labels.end(), std::uint8_t{1});
        const double n = double(m.labels.size());
        return twos / n >= 0.01 && ones / n >= 0.01;
    }
    return true;
}

}  // namespace

double foreground_fraction(const LabelMap& mask) {
    if (mask.labels.empty()) {
        return 0.0;
    }
    const auto bg = std::count(mask.labels.begin(), mask.labels.end(), std::uint8_t{0});
    return 1.0 - double(bg) / double(mask.labels.size());
}

Sample generate_sample(std::uint64_t seed, std::uint64_t id, std::size_t height, std::size_t width,
                       const SynthParams& params) {
    if (height < 32 || width < 32 || height % 8 != 0 || width % 8 != 0) {
        throw ContractError("generate_sample: size " + std::to_string(height) + "x" + std::to_string(width) +
                            " must be >= 32 and divisible by 8");
    }
    if (params.classes != 2 && params.classes != 3) {
        throw ContractError("generate_sample: classes must be 2 or 3, got " + std::to_string(params.classes));
    }
    const SeededRng base = SeededRng(seed).derive(id);
    const double h = double(height), w = double(width);

    LabelMap mask;
    Ellipse body{};
    SeededRng rng;
    for (std::uint64_t attempt = 0;; ++attempt) {
        if (attempt == 1000) {
            throw NumericError("generate_sample: no admissible shape after 1000 draws");
        }
        rng = base.derive(attempt);
        mask = LabelMap(height, width, 0);
        body = draw_ellipse(rng, h, w, 0.15, 0.4);
        fill(mask, body, 1);
        if (params.classes == 3) {
            Ellipse inner = draw_ellipse(rng, h, w, 0.08, 0.2);
            inner.cy = body.cy + rng.uniform(-0.5, 0.5) * body.ay;
            inner.cx = body.cx + rng.uniform(-0.5, 0.5) * body.ax;
            fill(mask, inner, 2);
        }
        if (fractions_ok(mask, params)) {
            break;
        }
    }

    Image img(height, width);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        const std::uint8_t c = mask.labels[i];
        img.pixels[i] = c == 0 ? params.background : c == 1 ? params.foreground : params.second_foreground;
    }
    for (float& v : img.pixels) {
        v *= static_cast<float>(rng.unit_mean_gamma(params.speckle_shape));
    }

    // Shadow wedges hang from the top edge and widen downwards; their apex column lies over
    // the structure so they always cut its boundary.
    const auto wedges = rng.below(3);
    for (std::uint64_t k = 0; k < wedges; ++k) {
        const double x0 = body.cx + rng.uniform(-0.6, 0.6) * body.ax;
        const double top = rng.uniform(0.01, 0.04) * w;
        const double spread = rng.uniform(0.03, 0.12) * w;
        for (std::size_t y = 0; y < height; ++y) {
            const double half = top + spread * (double(y) / h);
            for (std::size_t x = 0; x < width; ++x) {
                if (std::abs(double(x) + 0.5 - x0) <= half) {
                    img(y, x) *= params.shadow_gain;
                }
            }
        }
    }

    const auto passes = 1 + rng.below(2);
    for (std::uint64_t p = 0; p < passes; ++p) {
        blur3(img);
    }
    for (float& v : img.pixels) {
        v = std::clamp(v, 0.0f, 1.0f);
    }
    return {std::move(img), std::move(mask), id};
}

}  // namespace hdc::synth
