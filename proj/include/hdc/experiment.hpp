#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hdc/config.hpp"
#include "hdc/dataset.hpp"
#include "hdc/errors.hpp"
#include "hdc/metrics.hpp"
#include "hdc/trainer.hpp"

namespace hdc::exp {

/// Training pools held in memory. Unlabeled images are loaded without touching any mask file.
struct TrainingData {
    train::LabeledBatch labeled;
    train::UnlabeledBatch unlabeled;
};

struct SplitData {
    std::string name;
    std::vector<Image> images;
    std::vector<LabelMap> masks;
};

TrainingData load_training_data(const data::Manifest& m);
SplitData load_split(const data::Manifest& m, const std::string& split);

// Distinct pool indices, drawn by a partial Fisher-Yates shuffle.
std::vector<std::size_t> draw_indices(std::size_t pool, std::size_t k, SeededRng& rng);

// Batch of the step at `iteration`: labeled and unlabeled members are drawn from their pools.
std::pair<train::LabeledBatch, train::UnlabeledBatch> draw_step_batches(const TrainingData& d,
                                                                        const TrainConfig& cfg,
                                                                        std::size_t iteration);

std::vector<LabelMap> predict_masks(const model::ModelState<float>& state, model::Network which,
                                    std::span<const Image> images);

metrics::MetricReport evaluate_model(const model::ModelState<float>& state, model::Network which,
                                     const SplitData& split);

/// Thrown when a step produced a non-finite loss; the last records were written to dump_path.
class TrainingAborted : public NumericError {
  public:
    TrainingAborted(const std::string& what, std::filesystem::path dump, std::vector<train::StepRecord> tail)
        : NumericError(what), dump_(std::move(dump)), tail_(std::move(tail)) {}
    const std::filesystem::path& dump_path() const { return dump_; }
    const std::vector<train::StepRecord>& tail() const { return tail_; }

  private:
    std::filesystem::path dump_;
    std::vector<train::StepRecord> tail_;
};

struct RunOptions {
    std::optional<std::filesystem::path> out_dir;  // logs, checkpoints and reports; none when unset
    std::optional<train::TrainState> resume;
    std::size_t stop_at = 0;  // stop once this many steps are done (0: train.iterations)
    bool evaluate_test = true;
    std::function<void(const train::StepRecord&)> on_step;
};

struct ExperimentResult {
    std::vector<train::StepRecord> log;
    std::vector<std::pair<std::size_t, metrics::MetricReport>> validation;
    std::optional<metrics::MetricReport> test;
    train::TrainState state;
};

ExperimentResult run_experiment(const ExperimentConfig& cfg, const data::Manifest& manifest,
                                const RunOptions& opt = {});

// Same loop over already-loaded data.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const TrainingData& data,
                                const std::optional<SplitData>& val, const std::optional<SplitData>& test,
                                const RunOptions& opt = {});

// Labeled-only baseline: every unsupervised term switched off.
ExperimentConfig sup_only(ExperimentConfig base);

// The four loss-switch rows: pix, pix+cg, pix+mi, pix+cg+mi.
std::vector<std::pair<std::string, ExperimentConfig>> ablation_matrix(const ExperimentConfig& base);

}  // namespace hdc::exp
