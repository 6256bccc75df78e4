#include "hdc/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

namespace hdc {

optim::OptimizerConfig TrainConfig::optimizer_config() const {
    optim::OptimizerConfig o;
    o.kind = optimizer;
    o.lr = lr;
    o.momentum = momentum;
    o.beta1 = beta1;
    o.beta2 = beta2;
    o.eps = adam_eps;
    o.weight_decay = weight_decay.value_or(optim::default_weight_decay(optimizer));
    return o;
}

double TrainConfig::lr_at(std::size_t t) const {
    return cosine ? optim::cosine_lr(lr, t, iterations) : lr;
}

double TrainConfig::ema_decay_at(std::size_t t) const {
    if (ema_ramp == 0) {
        return ema_decay;
    }
    return ema_decay * std::min(1.0, double(t) / double(ema_ramp));
}

void TrainConfig::validate() const {
    if (iterations < 1) {
        throw ContractError("train.iterations must be >= 1");
    }
    if (batch_labeled < 1 || batch_unlabeled < 2) {
        throw ContractError("train.batch_labeled must be >= 1 and train.batch_unlabeled >= 2");
    }
    if (!(ema_decay >= 0.0 && ema_decay <= 1.0)) {
        throw ContractError("train.ema_decay must lie in [0, 1]");
    }
    if (!(noise_gamma >= 0.0)) {
        throw ContractError("train.noise_gamma must be >= 0");
    }
    if (!(strong_strength >= 0.0 && strong_strength <= 1.0)) {
        throw ContractError("train.strong_strength must lie in [0, 1]");
    }
    if (kernel == linalg::KernelKind::polynomial && kernel_degree < 1) {
        throw ContractError("loss.kernel_degree must be >= 1");
    }
    optimizer_config().validate();
}

void ExperimentConfig::validate() const {
    model.validate();
    train.validate();
    loss.validate();
}

ExperimentConfig default_config() {
    return {};
}

namespace {

std::string fmt_double(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return "";
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
    double out = 0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size() || !std::isfinite(out)) {
        throw ConfigError(key + ": expected a finite number, got '" + v + "'");
    }
    return out;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size()) {
        throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
    }
    return out;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") {
        return true;
    }
    if (v == "false" || v == "0" || v == "no" || v == "off") {
        return false;
    }
    throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::string bool_str(bool b) {
    return b ? "true" : "false";
}

std::string network_str(model::Network n) {
    switch (n) {
        case model::Network::student_main:
            return "student_main";
        case model::Network::student_noisy:
            return "student_noisy";
        case model::Network::teacher:
            return "teacher";
    }
    return "?";
}

std::string kernel_str(linalg::KernelKind k) {
    switch (k) {
        case linalg::KernelKind::rbf:
            return "rbf";
        case linalg::KernelKind::linear:
            return "linear";
        case linalg::KernelKind::polynomial:
            return "polynomial";
    }
    return "?";
}

struct Entry {
    std::string key;
    std::string doc;
    std::function<std::string(const ExperimentConfig&)> get;
    std::function<void(ExperimentConfig&, const std::string&)> set;
};

template <class Field>
Entry num(std::string key, std::string doc, Field field) {
    Entry e{key, std::move(doc), nullptr, nullptr};
    e.get = [field](const ExperimentConfig& c) {
        using V = std::decay_t<decltype(field(const_cast<ExperimentConfig&>(c)))>;
        if constexpr (std::is_floating_point_v<V>) {
            return fmt_double(field(const_cast<ExperimentConfig&>(c)));
        } else {
            return std::to_string(field(const_cast<ExperimentConfig&>(c)));
        }
    };
    e.set = [field, key](ExperimentConfig& c, const std::string& v) {
        auto& ref = field(c);
        using V = std::decay_t<decltype(ref)>;
        if constexpr (std::is_floating_point_v<V>) {
            ref = to_double(key, v);
        } else {
            ref = static_cast<V>(to_uint(key, v));
        }
    };
    return e;
}

template <class Field>
Entry flag(std::string key, std::string doc, Field field) {
    Entry e{key, std::move(doc), nullptr, nullptr};
    e.get = [field](const ExperimentConfig& c) { return bool_str(field(const_cast<ExperimentConfig&>(c))); };
    e.set = [field, key](ExperimentConfig& c, const std::string& v) { field(c) = to_bool(key, v); };
    return e;
}

#define FIELD(expr) [](ExperimentConfig& c) -> auto& { return c.expr; }

const std::vector<Entry>& registry() {
    static const std::vector<Entry> entries = [] {
        std::vector<Entry> r;
        r.push_back(num("model.width", "base channel width (>= 4)", FIELD(model.width)));
        r.push_back(num("model.depth", "number of stride-2 encoder stages", FIELD(model.depth)));
        r.push_back(num("model.classes", "class count including background; must match the dataset",
                        FIELD(model.classes)));
        r.push_back(num("model.in_channels", "input planes (greyscale replicated)", FIELD(model.in_channels)));
        r.push_back(num("train.seed", "training seed", FIELD(train.seed)));
        r.push_back(num("train.iterations", "optimizer steps", FIELD(train.iterations)));
        r.push_back(num("train.batch_labeled", "labeled images per step", FIELD(train.batch_labeled)));
        r.push_back(num("train.batch_unlabeled", "unlabeled images per step (>= 2)", FIELD(train.batch_unlabeled)));
        r.push_back(Entry{"optim.kind", "adamw | sgd",
                          [](const ExperimentConfig& c) { return optim::kind_name(c.train.optimizer); },
                          [](ExperimentConfig& c, const std::string& v) {
                              try {
                                  c.train.optimizer = optim::parse_kind(v);
                              } catch (const ContractError& e) {
                                  throw ConfigError(std::string("optim.kind: ") + e.what());
                              }
                          }});
        r.push_back(num("optim.lr", "base learning rate", FIELD(train.lr)));
        r.push_back(flag("optim.cosine", "cosine annealing to 0 over train.iterations", FIELD(train.cosine)));
        r.push_back(num("optim.momentum", "sgd momentum", FIELD(train.momentum)));
        r.push_back(num("optim.beta1", "adamw first-moment decay", FIELD(train.beta1)));
        r.push_back(num("optim.beta2", "adamw second-moment decay", FIELD(train.beta2)));
        r.push_back(num("optim.eps", "adamw denominator epsilon", FIELD(train.adam_eps)));
        r.push_back(Entry{"optim.weight_decay", "decoupled weight decay; auto = 0.05 (adamw) or 1e-4 (sgd)",
                          [](const ExperimentConfig& c) {
                              return c.train.weight_decay ? fmt_double(*c.train.weight_decay) : std::string("auto");
                          },
                          [](ExperimentConfig& c, const std::string& v) {
                              if (v == "auto") {
                                  c.train.weight_decay.reset();
                              } else {
                                  c.train.weight_decay = to_double("optim.weight_decay", v);
                              }
                          }});
        r.push_back(num("train.ema_decay", "teacher EMA decay", FIELD(train.ema_decay)));
        r.push_back(num("train.ema_ramp", "steps over which the EMA decay ramps up from 0", FIELD(train.ema_ramp)));
        r.push_back(num("train.noise_gamma", "feature-noise half-range", FIELD(train.noise_gamma)));
        r.push_back(num("train.strong_strength", "upper bound of the strong-augmentation strength",
                        FIELD(train.strong_strength)));
        r.push_back(num("train.eval_every", "validation interval in steps (0 = none)", FIELD(train.eval_every)));
        r.push_back(num("train.checkpoint_every", "checkpoint interval in steps (0 = final only)",
                        FIELD(train.checkpoint_every)));
        r.push_back(Entry{"eval.network", "student_main | student_noisy | teacher",
                          [](const ExperimentConfig& c) { return network_str(c.train.eval_network); },
                          [](ExperimentConfig& c, const std::string& v) {
                              if (v == "student_main") {
                                  c.train.eval_network = model::Network::student_main;
                              } else if (v == "student_noisy") {
                                  c.train.eval_network = model::Network::student_noisy;
                              } else if (v == "teacher") {
                                  c.train.eval_network = model::Network::teacher;
                              } else {
                                  throw ConfigError("eval.network: unknown network '" + v + "'");
                              }
                          }});
        r.push_back(num("loss.beta_cg", "weight of the correlation-guidance term", FIELD(loss.beta_cg)));
        r.push_back(num("loss.beta_mi", "weight of the mutual-information term", FIELD(loss.beta_mi)));
        r.push_back(num("loss.cg_alpha", "half-exponent of the correlation penalty", FIELD(loss.cg_alpha)));
        r.push_back(num("loss.cg_eps", "floor inside the correlation-loss logarithm", FIELD(loss.cg_eps)));
        r.push_back(flag("loss.enable_cg", "correlation-guidance term on/off", FIELD(loss.enable_cg)));
        r.push_back(flag("loss.enable_mi", "mutual-information term on/off", FIELD(loss.enable_mi)));
        r.push_back(flag("loss.enable_pix", "pixel-consistency term on/off", FIELD(loss.enable_pix)));
        r.push_back(Entry{"loss.kernel", "rbf (median bandwidth) | linear | polynomial",
                          [](const ExperimentConfig& c) { return kernel_str(c.train.kernel); },
                          [](ExperimentConfig& c, const std::string& v) {
                              if (v == "rbf") {
                                  c.train.kernel = linalg::KernelKind::rbf;
                              } else if (v == "linear") {
                                  c.train.kernel = linalg::KernelKind::linear;
                              } else if (v == "polynomial") {
                                  c.train.kernel = linalg::KernelKind::polynomial;
                              } else {
                                  throw ConfigError("loss.kernel: unknown kernel '" + v + "'");
                              }
                          }});
        r.push_back(num("loss.kernel_degree", "polynomial kernel degree", FIELD(train.kernel_degree)));
        r.push_back(num("loss.kernel_offset", "polynomial kernel offset", FIELD(train.kernel_offset)));
        return r;
    }();
    return entries;
}

#undef FIELD

const Entry& find_entry(const std::string& key) {
    for (const auto& e : registry()) {
        if (e.key == key) {
            return e;
        }
    }
    const auto near = nearest_keys(key);
    std::string msg = "unknown config key '" + key + "'";
    if (!near.empty()) {
        msg += "; did you mean:";
        for (const auto& k : near) {
            msg += " " + k;
        }
    }
    throw ConfigError(msg, near);
}

std::size_t edit_distance(const std::string& a, const std::string& b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) {
        prev[j] = j;
    }
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

}  // namespace

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k;
        for (const auto& e : registry()) {
            k.push_back(e.key);
        }
        return k;
    }();
    return keys;
}

std::string config_doc(const std::string& key) {
    return find_entry(key).doc;
}

std::vector<std::string> nearest_keys(const std::string& key, std::size_t n) {
    std::vector<std::pair<std::size_t, std::string>> scored;
    for (const auto& e : registry()) {
        // Compare against the full key and its last component so "beta_cg" finds "loss.beta_cg".
        const auto dot = e.key.rfind('.');
        const std::size_t d = std::min(edit_distance(key, e.key), edit_distance(key, e.key.substr(dot + 1)));
        scored.emplace_back(d, e.key);
    }
    std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<std::string> out;
    for (std::size_t i = 0; i < scored.size() && out.size() < n; ++i) {
        out.push_back(scored[i].second);
    }
    return out;
}

void set_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    find_entry(key).set(cfg, value);
}

std::string get_value(const ExperimentConfig& cfg, const std::string& key) {
    return find_entry(key).get(cfg);
}

std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text,
                                                                   const std::string& origin) {
    std::vector<std::pair<std::string, std::string>> out;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.resize(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value', got '" + line + "'");
        }
        std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
        }
        out.emplace_back(std::move(key), std::move(value));
    }
    return out;
}

std::pair<std::string, std::string> parse_override(const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
        throw ConfigError("override '" + kv + "' is not of the form key=value");
    }
    return {trim(kv.substr(0, eq)), trim(kv.substr(eq + 1))};
}

ExperimentConfig config_from_text(const std::string& text, const std::string& origin) {
    ExperimentConfig cfg = default_config();
    for (const auto& [k, v] : parse_config_text(text, origin)) {
        set_value(cfg, k, v);
    }
    return cfg;
}

ExperimentConfig load_config(const std::optional<std::filesystem::path>& file, std::span<const std::string> overrides) {
    ExperimentConfig cfg = default_config();
    if (file) {
        std::ifstream in(*file);
        if (!in) {
            throw IoError(file->string() + ": cannot open config");
        }
        std::stringstream ss;
        ss << in.rdbuf();
        for (const auto& [k, v] : parse_config_text(ss.str(), file->string())) {
            set_value(cfg, k, v);
        }
    }
    for (const auto& o : overrides) {
        const auto [k, v] = parse_override(o);
        set_value(cfg, k, v);
    }
    return cfg;
}

std::string to_text(const ExperimentConfig& cfg) {
    std::string out;
    for (const auto& e : registry()) {
        out += e.key + " = " + e.get(cfg) + "\n";
    }
    return out;
}

}  // namespace hdc
