#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hdc/config.hpp"
#include "hdc/image.hpp"
#include "hdc/losses.hpp"
#include "hdc/model.hpp"
#include "hdc/optimizer.hpp"
#include "hdc/rng.hpp"

namespace hdc::train {

struct LabeledBatch {
    std::vector<Image> images;
    std::vector<LabelMap> masks;
};

using UnlabeledBatch = std::vector<Image>;

/// Everything that evolves during training. Per-step randomness is derived from
/// (train.seed, iteration), so the iteration index doubles as the generator position.
struct TrainState {
    model::ModelState<float> model;
    optim::OptimizerState<float> optimizer;
    std::size_t iteration = 0;

    bool operator==(const TrainState&) const = default;
};

TrainState init_state(const ExperimentConfig& cfg);

struct StepRecord {
    std::size_t iter = 0;
    double l_sup = 0, l_cg = 0, l_mi = 0, l_pix = 0, l_total = 0;
    double lr = 0;
    double grad_norm = 0;

    bool operator==(const StepRecord&) const = default;
};

inline constexpr const char* kTrainLogHeader = "iter,l_sup,l_cg,l_mi,l_pix,l_total,lr,grad_norm";
std::string to_csv_row(const StepRecord& r);
std::string train_log_csv(const std::vector<StepRecord>& records);

// Step generator for a given iteration; substreams for sampling, augmentation and feature noise
// are derived from it with the tags below.
SeededRng step_rng(const TrainConfig& cfg, std::size_t iteration);

namespace tags {
inline constexpr std::uint64_t sample_labeled = 1;
inline constexpr std::uint64_t sample_unlabeled = 2;
inline constexpr std::uint64_t weak_labeled = 3;
inline constexpr std::uint64_t weak_unlabeled = 4;
inline constexpr std::uint64_t strong = 5;
inline constexpr std::uint64_t noise_labeled = 6;
inline constexpr std::uint64_t noise_unlabeled = 7;
}  // namespace tags

/// Augmented network inputs for one step. Unlabeled views are empty when every unsupervised
/// term is switched off.
template <class T>
struct StepViews {
    Tensor<T> labeled;
    std::vector<std::int32_t> labels;
    Tensor<T> weak;
    Tensor<T> strong;

    bool has_unlabeled() const { return weak.numel() > 0; }
};

// Whether each unsupervised term contributes (enabled with a positive weight where one applies).
struct ActiveTerms {
    bool cg = false, mi = false, pix = false;
    bool any() const { return cg || mi || pix; }
};
ActiveTerms active_terms(const losses::LossWeights& w);

template <class T>
StepViews<T> make_views(const LabeledBatch& lab, const UnlabeledBatch& unl, const ExperimentConfig& cfg,
                        const SeededRng& rng);

/// Builds every active loss term of one step on `tape`. The teacher pass is routed through
/// stop_gradient, so binding the teacher with requires_grad = true only serves audits.
template <class T>
losses::LossParts<T> build_losses(const ExperimentConfig& cfg, const model::StudentVars<T>& student,
                                  const model::TeacherVars<T>& teacher, const StepViews<T>& views,
                                  const SeededRng& rng);

template <class T>
struct StepGradients {
    double l_sup = 0, l_cg = 0, l_mi = 0, l_pix = 0, l_total = 0;
    std::vector<Tensor<T>> encoder, decoder_main, decoder_noisy;
    std::vector<Tensor<T>> teacher;  // filled only when the teacher was bound as a leaf
};

template <class T>
StepGradients<T> compute_gradients(const model::ModelState<T>& state, const ExperimentConfig& cfg,
                                   const StepViews<T>& views, const SeededRng& rng, bool audit_teacher = false);

// One optimizer step followed by the EMA teacher update. Throws NumericError on a non-finite
// loss or gradient.
StepRecord train_step(TrainState& state, const LabeledBatch& lab, const UnlabeledBatch& unl,
                      const ExperimentConfig& cfg);

void save_checkpoint(const TrainState& state, const ExperimentConfig& cfg, const std::filesystem::path& path);

struct LoadedCheckpoint {
    TrainState state;
    ExperimentConfig config;
};
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace hdc::train
