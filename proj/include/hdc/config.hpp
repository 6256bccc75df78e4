#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hdc/errors.hpp"
#include "hdc/linalg.hpp"
#include "hdc/losses.hpp"
#include "hdc/model.hpp"
#include "hdc/optimizer.hpp"

namespace hdc {

struct TrainConfig {
    std::uint64_t seed = 0;
    std::size_t iterations = 2000;
    std::size_t batch_labeled = 8;
    std::size_t batch_unlabeled = 8;
    optim::Kind optimizer = optim::Kind::adamw;
    double lr = 1e-4;
    bool cosine = true;
    double momentum = 0.9;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::optional<double> weight_decay;  // unset: per-optimizer default
    double ema_decay = 0.99;
    std::size_t ema_ramp = 100;  // decay_t = ema_decay * min(1, t / ema_ramp)
    double noise_gamma = 0.3;
    double strong_strength = 1.0;  // distortion strength drawn from U(0, strong_strength)
    linalg::KernelKind kernel = linalg::KernelKind::rbf;
    int kernel_degree = 2;
    double kernel_offset = 1.0;
    std::size_t eval_every = 0;  // 0: evaluate only at the end
    model::Network eval_network = model::Network::student_main;
    std::size_t checkpoint_every = 0;

    optim::OptimizerConfig optimizer_config() const;
    double lr_at(std::size_t t) const;
    double ema_decay_at(std::size_t t) const;  // t = number of completed optimizer steps
    void validate() const;
};

struct ExperimentConfig {
    model::NetworkConfig model;
    TrainConfig train;
    losses::LossWeights loss;

    void validate() const;
};

ExperimentConfig default_config();

/// Raised for unknown keys, with the closest valid keys by edit distance.
class ConfigError : public ContractError {
  public:
    ConfigError(const std::string& what, std::vector<std::string> suggestions = {})
        : ContractError(what), suggestions_(std::move(suggestions)) {}
    const std::vector<std::string>& suggestions() const { return suggestions_; }

  private:
    std::vector<std::string> suggestions_;
};

const std::vector<std::string>& config_keys();
std::string config_doc(const std::string& key);
std::vector<std::string> nearest_keys(const std::string& key, std::size_t n = 3);

void set_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);
std::string get_value(const ExperimentConfig& cfg, const std::string& key);

// "key = value" lines, '#' starts a comment. Syntax errors name origin and line.
std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text,
                                                                   const std::string& origin = "<config>");

// "key=value" override strings.
std::pair<std::string, std::string> parse_override(const std::string& kv);

// Defaults, then the file (if any), then overrides in order.
ExperimentConfig load_config(const std::optional<std::filesystem::path>& file,
                             std::span<const std::string> overrides = {});
ExperimentConfig config_from_text(const std::string& text, const std::string& origin = "<config>");

// Every key with its effective value, one "key = value" line each; parses back to the same config.
std::string to_text(const ExperimentConfig& cfg);

}  // namespace hdc
