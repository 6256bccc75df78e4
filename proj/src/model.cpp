#include "hdc/model.hpp"

#include <cmath>
#include <cstring>

#include "hdc/augment.hpp"
#include "hdc/ops.hpp"

namespace hdc::model {

using ad::Var;

void NetworkConfig::validate() const {
    if (width < 4) {
        throw ContractError("NetworkConfig: width must be >= 4, got " + std::to_string(width));
    }
    if (depth < 1 || depth > 6) {
        throw ContractError("NetworkConfig: depth must lie in [1, 6], got " + std::to_string(depth));
    }
    if (classes < 2) {
        throw ContractError("NetworkConfig: need at least 2 classes, got " + std::to_string(classes));
    }
    if (in_channels < 1) {
        throw ContractError("NetworkConfig: in_channels must be >= 1");
    }
}

std::size_t NetworkConfig::channels(std::size_t level) const {
    return width * std::min<std::size_t>(std::size_t{1} << level, 4);
}

void NetworkConfig::check_input(std::size_t h, std::size_t w) const {
    const std::size_t f = std::size_t{1} << depth;
    if (h == 0 || w == 0 || h % f != 0 || w % f != 0) {
        throw ContractError("network input " + std::to_string(h) + "x" + std::to_string(w) +
                            " is not divisible by 2^depth = " + std::to_string(f));
    }
}

template <class T>
std::size_t ParamSet<T>::count() const {
    std::size_t n = 0;
    for (const auto& t : tensors) {
        n += t.numel();
    }
    return n;
}

template <class T>
std::size_t ModelState<T>::student_parameter_count() const {
    return encoder.count() + decoder_main.count() + decoder_noisy.count();
}

namespace {

template <class T>
void add_conv(ParamSet<T>& p, const std::string& name, std::size_t co, std::size_t ci, std::size_t k,
              SeededRng& rng) {
    Tensor<T> w(Shape{co, ci, k, k});
    const double sd = std::sqrt(2.0 / static_cast<double>(ci * k * k));
    for (T& v : w.data) {
        v = static_cast<T>(sd * rng.normal());
    }
    p.names.push_back(name + ".w");
    p.tensors.push_back(std::move(w));
    p.names.push_back(name + ".b");
    p.tensors.push_back(Tensor<T>(Shape{co}));
}

template <class T>
ParamSet<T> make_encoder(const NetworkConfig& c, SeededRng rng) {
    ParamSet<T> p;
    add_conv(p, "enc.stem", c.channels(0), c.in_channels, 3, rng);
    for (std::size_t i = 1; i <= c.depth; ++i) {
        add_conv(p, "enc.down" + std::to_string(i), c.channels(i), c.channels(i - 1), 3, rng);
    }
    add_conv(p, "enc.mid", c.channels(c.depth), c.channels(c.depth), 3, rng);
    return p;
}

template <class T>
ParamSet<T> make_decoder(const NetworkConfig& c, SeededRng rng) {
    ParamSet<T> p;
    for (std::size_t i = c.depth; i-- > 0;) {
        add_conv(p, "dec.up" + std::to_string(i), c.channels(i), c.channels(i + 1), 3, rng);
    }
    add_conv(p, "dec.head", c.classes, c.channels(0), 1, rng);
    return p;
}

template <class T>
void check_params(const char* what, std::span<const Var<T>> params, std::size_t expected) {
    if (params.size() != expected) {
        throw ContractError(std::string(what) + ": expected " + std::to_string(expected) + " parameter tensors, got " +
                            std::to_string(params.size()));
    }
}

}  // namespace

template <class T>
ModelState<T> init_model(const NetworkConfig& config, const SeededRng& rng) {
    config.validate();
    ModelState<T> s;
    s.config = config;
    s.encoder = make_encoder<T>(config, rng.derive(1));
    s.decoder_main = make_decoder<T>(config, rng.derive(2));
    s.decoder_noisy = make_decoder<T>(config, rng.derive(3));
    s.teacher_encoder = s.encoder;
    s.teacher_decoder = s.decoder_main;
    return s;
}

template <class To, class From>
ModelState<To> cast_state(const ModelState<From>& s) {
    auto conv = [](const ParamSet<From>& p) {
        ParamSet<To> q;
        q.names = p.names;
        for (const auto& t : p.tensors) {
            q.tensors.push_back(tensor_cast<To>(t));
        }
        return q;
    };
    ModelState<To> out;
    out.config = s.config;
    out.encoder = conv(s.encoder);
    out.decoder_main = conv(s.decoder_main);
    out.decoder_noisy = conv(s.decoder_noisy);
    out.teacher_encoder = conv(s.teacher_encoder);
    out.teacher_decoder = conv(s.teacher_decoder);
    return out;
}

template <class T>
void ema_update(ModelState<T>& state, double decay) {
    if (!(decay >= 0.0 && decay <= 1.0)) {
        throw ContractError("ema_update: decay must lie in [0, 1], got " + std::to_string(decay));
    }
    // lerp is exact at decay 0 and 1 and leaves the teacher untouched when it equals the student.
    // Blending in double keeps float teachers within an ulp of the exact value.
    auto blend = [&](ParamSet<T>& teacher, const ParamSet<T>& student) {
        if (teacher.tensors.size() != student.tensors.size()) {
            throw ContractError("ema_update: teacher and student parameter lists are not aligned");
        }
        for (std::size_t k = 0; k < teacher.tensors.size(); ++k) {
            auto& t = teacher.tensors[k].data;
            const auto& s = student.tensors[k].data;
            if (t.size() != s.size()) {
                throw ContractError("ema_update: tensor " + teacher.names[k] + " has mismatched size");
            }
            for (std::size_t i = 0; i < t.size(); ++i) {
                t[i] = static_cast<T>(std::lerp(double(s[i]), double(t[i]), decay));
            }
        }
    };
    blend(state.teacher_encoder, state.encoder);
    blend(state.teacher_decoder, state.decoder_main);
}

std::uint64_t hash_params(const ParamSet<float>& p) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (const auto& t : p.tensors) {
        for (float v : t.data) {
            std::uint32_t bits;
            std::memcpy(&bits, &v, sizeof bits);
            h = (h ^ bits) * 0x100000001B3ULL;
        }
    }
    return h;
}

template <class T>
std::vector<Var<T>> bind(ad::Tape<T>& tape, const ParamSet<T>& params, bool requires_grad) {
    std::vector<Var<T>> vars;
    vars.reserve(params.tensors.size());
    for (const auto& t : params.tensors) {
        vars.push_back(tape.leaf(t, requires_grad));
    }
    return vars;
}

template <class T>
EncoderOut<T> encode(const NetworkConfig& cfg, std::span<const Var<T>> p, const Var<T>& x) {
    check_params<T>("encode", p, 2 * (cfg.depth + 2));
    const auto& s = x.shape();
    if (s.size() != 4 || s[1] != cfg.in_channels) {
        throw ContractError("encode: expected input [B," + std::to_string(cfg.in_channels) + ",H,W], got " +
                            shape_str(s));
    }
    cfg.check_input(s[2], s[3]);
    EncoderOut<T> out;
    Var<T> h = relu(conv2d(x, p[0], p[1], 1));
    for (std::size_t i = 1; i <= cfg.depth; ++i) {
        out.skips.push_back(h);
        h = relu(conv2d(h, p[2 * i], p[2 * i + 1], 2));
    }
    const std::size_t m = 2 * (cfg.depth + 1);
    out.bottleneck = relu(conv2d(h, p[m], p[m + 1], 1));
    return out;
}

template <class T>
DecoderOut<T> decode(const NetworkConfig& cfg, std::span<const Var<T>> p, const EncoderOut<T>& enc,
                     const Var<T>& bottleneck) {
    check_params<T>("decode", p, 2 * (cfg.depth + 1));
    Var<T> h = bottleneck;
    std::size_t k = 0;
    for (std::size_t i = cfg.depth; i-- > 0; k += 2) {
        h = relu(add(upsample2x(conv2d(h, p[k], p[k + 1], 1)), enc.skips[i]));
    }
    DecoderOut<T> out;
    out.penultimate = h;
    out.logits = conv2d(h, p[k], p[k + 1], 1);
    return out;
}

template <class T>
StudentVars<T> bind_student(ad::Tape<T>& tape, const ModelState<T>& s, bool requires_grad) {
    return {bind(tape, s.encoder, requires_grad), bind(tape, s.decoder_main, requires_grad),
            bind(tape, s.decoder_noisy, requires_grad)};
}

template <class T>
TeacherVars<T> bind_teacher(ad::Tape<T>& tape, const ModelState<T>& s, bool requires_grad) {
    return {bind(tape, s.teacher_encoder, requires_grad), bind(tape, s.teacher_decoder, requires_grad)};
}

template <class T>
StudentOutput<T> forward_student(const NetworkConfig& cfg, const StudentVars<T>& vars, const Var<T>& x,
                                 double noise_gamma, SeededRng& rng) {
    const EncoderOut<T> enc = encode<T>(cfg, vars.encoder, x);
    const DecoderOut<T> d1 = decode<T>(cfg, vars.decoder_main, enc, enc.bottleneck);
    const DecoderOut<T> d2 = decode<T>(cfg, vars.decoder_noisy, enc, aug::f_noise(enc.bottleneck, noise_gamma, rng));
    return {d1.logits, d2.logits, global_avg_pool(enc.bottleneck), global_avg_pool(d1.penultimate),
            global_avg_pool(d2.penultimate)};
}

template <class T>
TeacherOutput<T> forward_teacher(const NetworkConfig& cfg, const TeacherVars<T>& vars, const Var<T>& x) {
    const EncoderOut<T> enc = encode<T>(cfg, vars.encoder, x);
    const DecoderOut<T> d = decode<T>(cfg, vars.decoder, enc, enc.bottleneck);
    return {softmax_channels(d.logits), global_avg_pool(enc.bottleneck)};
}

template <class T>
Tensor<T> batch_tensor(std::span<const Image> images, std::size_t channels) {
    if (images.empty()) {
        throw ContractError("batch_tensor: empty batch");
    }
    const std::size_t H = images[0].height, W = images[0].width;
    Tensor<T> out(Shape{images.size(), channels, H, W});
    for (std::size_t b = 0; b < images.size(); ++b) {
        if (images[b].height != H || images[b].width != W) {
            throw ContractError("batch_tensor: images differ in size");
        }
        for (std::size_t c = 0; c < channels; ++c) {
            std::copy(images[b].pixels.begin(), images[b].pixels.end(), out.data.begin() + (b * channels + c) * H * W);
        }
    }
    return out;
}

template <class T>
Tensor<T> predict_logits(const ModelState<T>& state, Network which, const Tensor<T>& x) {
    ad::Tape<T> tape;
    const Var<T> xv = tape.constant(x);
    const bool teacher = which == Network::teacher;
    const auto enc_p = bind(tape, teacher ? state.teacher_encoder : state.encoder, false);
    const ParamSet<T>& dec =
        teacher ? state.teacher_decoder : (which == Network::student_main ? state.decoder_main : state.decoder_noisy);
    const auto dec_p = bind(tape, dec, false);
    const EncoderOut<T> enc = encode<T>(state.config, enc_p, xv);
    return decode<T>(state.config, dec_p, enc, enc.bottleneck).logits.value();
}

#define HDC_INSTANTIATE_MODEL(T)                                                                              \
    template struct ParamSet<T>;                                                                              \
    template struct ModelState<T>;                                                                            \
    template ModelState<T> init_model(const NetworkConfig&, const SeededRng&);                                \
    template void ema_update(ModelState<T>&, double);                                                         \
    template std::vector<Var<T>> bind(ad::Tape<T>&, const ParamSet<T>&, bool);                                \
    template EncoderOut<T> encode(const NetworkConfig&, std::span<const Var<T>>, const Var<T>&);              \
    template DecoderOut<T> decode(const NetworkConfig&, std::span<const Var<T>>, const EncoderOut<T>&,        \
                                  const Var<T>&);                                                              \
    template StudentVars<T> bind_student(ad::Tape<T>&, const ModelState<T>&, bool);                           \
    template TeacherVars<T> bind_teacher(ad::Tape<T>&, const ModelState<T>&, bool);                           \
    template StudentOutput<T> forward_student(const NetworkConfig&, const StudentVars<T>&, const Var<T>&,     \
                                              double, SeededRng&);                                            \
    template TeacherOutput<T> forward_teacher(const NetworkConfig&, const TeacherVars<T>&, const Var<T>&);    \
    template Tensor<T> batch_tensor(std::span<const Image>, std::size_t);                                     \
    template Tensor<T> predict_logits(const ModelState<T>&, Network, const Tensor<T>&);

HDC_INSTANTIATE_MODEL(float)
HDC_INSTANTIATE_MODEL(double)

template ModelState<double> cast_state(const ModelState<float>&);
template ModelState<float> cast_state(const ModelState<double>&);
template ModelState<float> cast_state(const ModelState<float>&);
template ModelState<double> cast_state(const ModelState<double>&);

}  // namespace hdc::model
