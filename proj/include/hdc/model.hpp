#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hdc/image.hpp"
#include "hdc/rng.hpp"
#include "hdc/tape.hpp"

namespace hdc::model {

/// Encoder: stem conv at full resolution, `depth` stride-2 convs, one extra conv at the bottleneck.
/// Channels at level i are width * min(2^i, 4), so the bottleneck has 4 * width channels for depth >= 2.
/// Each decoder walks back up: conv at level i+1, nearest 2x upsample, add the encoder skip of
/// level i, relu; a 1x1 head maps the full-resolution map to class logits.
struct NetworkConfig {
    std::size_t in_channels = 3;
    std::size_t classes = 2;
    std::size_t width = 16;
    std::size_t depth = 3;

    void validate() const;
    std::size_t channels(std::size_t level) const;
    std::size_t feature_dim() const { return channels(depth); }
    // ContractError unless both spatial sizes are positive multiples of 2^depth.
    void check_input(std::size_t height, std::size_t width) const;
    bool operator==(const NetworkConfig&) const = default;
};

template <class T>
struct ParamSet {
    std::vector<std::string> names;
    std::vector<Tensor<T>> tensors;

    std::size_t count() const;
    bool operator==(const ParamSet&) const = default;
};

/// Student = shared encoder + main decoder + noisy decoder. The teacher mirrors encoder + main
/// decoder, index-aligned with them, and is only ever written by ema_update.
template <class T>
struct ModelState {
    NetworkConfig config;
    ParamSet<T> encoder;
    ParamSet<T> decoder_main;
    ParamSet<T> decoder_noisy;
    ParamSet<T> teacher_encoder;
    ParamSet<T> teacher_decoder;

    std::size_t student_parameter_count() const;
    bool operator==(const ModelState&) const = default;
};

template <class T>
ModelState<T> init_model(const NetworkConfig& config, const SeededRng& rng);

template <class To, class From>
ModelState<To> cast_state(const ModelState<From>& s);

// decay in [0, 1]: teacher <- decay * teacher + (1 - decay) * (encoder, main decoder).
template <class T>
void ema_update(ModelState<T>& state, double decay);

std::uint64_t hash_params(const ParamSet<float>& p);

template <class T>
std::vector<ad::Var<T>> bind(ad::Tape<T>& tape, const ParamSet<T>& params, bool requires_grad);

template <class T>
struct EncoderOut {
    ad::Var<T> bottleneck;
    std::vector<ad::Var<T>> skips;  // skips[i] at resolution / 2^i, for i < depth
};

template <class T>
struct DecoderOut {
    ad::Var<T> logits;
    ad::Var<T> penultimate;
};

template <class T>
EncoderOut<T> encode(const NetworkConfig& cfg, std::span<const ad::Var<T>> params, const ad::Var<T>& x);

template <class T>
DecoderOut<T> decode(const NetworkConfig& cfg, std::span<const ad::Var<T>> params, const EncoderOut<T>& enc,
                     const ad::Var<T>& bottleneck);

template <class T>
struct StudentVars {
    std::vector<ad::Var<T>> encoder, decoder_main, decoder_noisy;
};

template <class T>
struct TeacherVars {
    std::vector<ad::Var<T>> encoder, decoder;
};

template <class T>
StudentVars<T> bind_student(ad::Tape<T>& tape, const ModelState<T>& s, bool requires_grad = true);

template <class T>
TeacherVars<T> bind_teacher(ad::Tape<T>& tape, const ModelState<T>& s, bool requires_grad = false);

template <class T>
struct StudentOutput {
    ad::Var<T> p1, p2;  // logits [B,C,H,W]
    ad::Var<T> zs;      // pooled bottleneck [B,d]
    ad::Var<T> f1, f2;  // pooled penultimate maps [B,width]
};

template <class T>
struct TeacherOutput {
    ad::Var<T> probs;  // softmax [B,C,H,W]
    ad::Var<T> zt;     // pooled bottleneck [B,d]
};

// The noisy decoder consumes f_noise(bottleneck, noise_gamma); skips stay clean.
template <class T>
StudentOutput<T> forward_student(const NetworkConfig& cfg, const StudentVars<T>& vars, const ad::Var<T>& x,
                                 double noise_gamma, SeededRng& rng);

template <class T>
TeacherOutput<T> forward_teacher(const NetworkConfig& cfg, const TeacherVars<T>& vars, const ad::Var<T>& x);

// Images replicated to `channels` identical planes: [B, channels, H, W].
template <class T>
Tensor<T> batch_tensor(std::span<const Image> images, std::size_t channels);

enum class Network { student_main, student_noisy, teacher };

// Tape-free inference helper; returns logits [B,C,H,W].
template <class T>
Tensor<T> predict_logits(const ModelState<T>& state, Network which, const Tensor<T>& x);

}  // namespace hdc::model
