#include "hdc/experiment.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "hdc/parallel.hpp"

namespace hdc::exp {

namespace {

void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::trunc);
    if (!out) {
        throw IoError(p.string() + ": cannot open for writing");
    }
    out << text;
    if (!out) {
        throw IoError(p.string() + ": write failed");
    }
}

constexpr std::size_t kEvalBatch = 8;

std::string prefix_lines(const std::string& prefix, const std::string& text) {
    std::string out;
    std::size_t pos = 0, nl;
    while ((nl = text.find('\n', pos)) != std::string::npos) {
        out += prefix + text.substr(pos, nl - pos + 1);
        pos = nl + 1;
    }
    return out;
}

}  // namespace

TrainingData load_training_data(const data::Manifest& m) {
    TrainingData d;
    const auto lab = m.indices("train", true);
    for (auto& s : data::load_batch(m, lab, true)) {
        d.labeled.images.push_back(std::move(s.image));
        d.labeled.masks.push_back(std::move(*s.mask));
    }
    std::vector<std::size_t> unl;
    for (const auto i : m.indices("train")) {
        if (!m.entries[i].mask) {
            unl.push_back(i);
        }
    }
    for (auto& s : data::load_batch(m, unl, false)) {
        d.unlabeled.push_back(std::move(s.image));
    }
    if (d.labeled.images.empty()) {
        throw ContractError("training data: manifest has no labeled training samples");
    }
    return d;
}

SplitData load_split(const data::Manifest& m, const std::string& split) {
    SplitData s;
    s.name = split;
    const auto idx = m.indices(split);
    for (auto& x : data::load_batch(m, idx, true)) {
        s.images.push_back(std::move(x.image));
        s.masks.push_back(std::move(*x.mask));
    }
    if (s.images.empty()) {
        throw ContractError("split '" + split + "' is empty");
    }
    return s;
}

std::vector<std::size_t> draw_indices(std::size_t pool, std::size_t k, SeededRng& rng) {
    if (k > pool) {
        throw ContractError("draw_indices: cannot draw " + std::to_string(k) + " distinct items from " +
                            std::to_string(pool));
    }
    std::vector<std::size_t> idx(pool);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < k; ++i) {
        std::swap(idx[i], idx[i + rng.below(pool - i)]);
    }
    idx.resize(k);
    return idx;
}

std::pair<train::LabeledBatch, train::UnlabeledBatch> draw_step_batches(const TrainingData& d,
                                                                        const TrainConfig& cfg,
                                                                        std::size_t iteration) {
    const SeededRng rng = train::step_rng(cfg, iteration);
    SeededRng lr = rng.derive(train::tags::sample_labeled);
    SeededRng ur = rng.derive(train::tags::sample_unlabeled);
    train::LabeledBatch lab;
    const std::size_t nl = std::min(cfg.batch_labeled, d.labeled.images.size());
    for (const auto i : draw_indices(d.labeled.images.size(), nl, lr)) {
        lab.images.push_back(d.labeled.images[i]);
        lab.masks.push_back(d.labeled.masks[i]);
    }
    train::UnlabeledBatch unl;
    const std::size_t nu = std::min(cfg.batch_unlabeled, d.unlabeled.size());
    for (const auto i : draw_indices(d.unlabeled.size(), nu, ur)) {
        unl.push_back(d.unlabeled[i]);
    }
    return {std::move(lab), std::move(unl)};
}

std::vector<LabelMap> predict_masks(const model::ModelState<float>& state, model::Network which,
                                    std::span<const Image> images) {
    std::vector<LabelMap> out(images.size());
    const std::size_t batches = (images.size() + kEvalBatch - 1) / kEvalBatch;
    parallel_for(batches, [&](std::size_t b) {
        const std::size_t lo = b * kEvalBatch, hi = std::min(images.size(), lo + kEvalBatch);
        const auto x = model::batch_tensor<float>(images.subspan(lo, hi - lo), state.config.in_channels);
        const auto logits = model::predict_logits(state, which, x);
        const std::size_t C = logits.dim(1), H = logits.dim(2), W = logits.dim(3);
        for (std::size_t i = lo; i < hi; ++i) {
            LabelMap m(H, W);
            const float* base = logits.data.data() + (i - lo) * C * H * W;
            for (std::size_t p = 0; p < H * W; ++p) {
                std::size_t best = 0;
                for (std::size_t c = 1; c < C; ++c) {
                    if (base[c * H * W + p] > base[best * H * W + p]) {
                        best = c;
                    }
                }
                m.labels[p] = static_cast<std::uint8_t>(best);
            }
            out[i] = std::move(m);
        }
    });
    return out;
}

metrics::MetricReport evaluate_model(const model::ModelState<float>& state, model::Network which,
                                     const SplitData& split) {
    if (split.images.empty()) {
        throw ContractError("evaluate_model: split '" + split.name + "' is empty");
    }
    const auto pred = predict_masks(state, which, split.images);
    return metrics::evaluate_predictions(split.name, pred, split.masks, state.config.classes);
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const data::Manifest& manifest, const RunOptions& opt) {
    if (manifest.classes != cfg.model.classes) {
        throw ContractError("model.classes = " + std::to_string(cfg.model.classes) + " but the dataset has " +
                            std::to_string(manifest.classes) + " classes");
    }
    const TrainingData data = load_training_data(manifest);
    std::optional<SplitData> val, test;
    if (!manifest.indices("val").empty()) {
        val = load_split(manifest, "val");
    }
    if (opt.evaluate_test) {
        test = load_split(manifest, "test");
    }
    return run_experiment(cfg, data, val, test, opt);
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const TrainingData& data,
                                const std::optional<SplitData>& val, const std::optional<SplitData>& test,
                                const RunOptions& opt) {
    cfg.validate();
    ExperimentResult res;
    res.state = opt.resume ? *opt.resume : train::init_state(cfg);
    const std::size_t stop = opt.stop_at ? std::min(opt.stop_at, cfg.train.iterations) : cfg.train.iterations;
    const auto& out = opt.out_dir;
    if (out) {
        std::filesystem::create_directories(*out);
        write_text(*out / "effective-config", to_text(cfg));
    }
    std::ofstream log_file;
    if (out) {
        log_file.open(*out / "train_log.csv", std::ios::trunc);
        log_file << train::kTrainLogHeader << '\n';
    }
    std::string val_csv = std::string("iter,") + metrics::kMetricCsvHeader + "\n";

    while (res.state.iteration < stop) {
        const std::size_t it = res.state.iteration;
        const auto [lab, unl] = draw_step_batches(data, cfg.train, it);
        train::StepRecord rec;
        try {
            rec = train::train_step(res.state, lab, unl, cfg);
        } catch (const NumericError& e) {
            std::vector<train::StepRecord> tail(res.log.end() - std::min<std::ptrdiff_t>(10, res.log.size()),
                                                res.log.end());
            std::filesystem::path dump;
            if (out) {
                dump = *out / "abort_dump.csv";
                write_text(dump, train::train_log_csv(tail));
            }
            throw TrainingAborted(std::string("training aborted: ") + e.what(), dump, std::move(tail));
        }
        res.log.push_back(rec);
        if (log_file.is_open()) {
            log_file << train::to_csv_row(rec) << '\n';
        }
        if (opt.on_step) {
            opt.on_step(rec);
        }
        const std::size_t done = res.state.iteration;
        if (val && cfg.train.eval_every > 0 && done % cfg.train.eval_every == 0) {
            auto rep = evaluate_model(res.state.model, cfg.train.eval_network, *val);
            val_csv += prefix_lines(std::to_string(done) + ",", rep.to_csv(false));
            res.validation.emplace_back(done, std::move(rep));
        }
        if (out && cfg.train.checkpoint_every > 0 && done % cfg.train.checkpoint_every == 0 && done < stop) {
            train::save_checkpoint(res.state, cfg, *out / ("step_" + std::to_string(done) + ".ckpt"));
        }
    }
    if (out) {
        log_file.close();
        train::save_checkpoint(res.state, cfg, *out / "final.ckpt");
        if (!res.validation.empty()) {
            write_text(*out / "val_metrics.csv", val_csv);
        }
    }
    if (test && opt.evaluate_test) {
        res.test = evaluate_model(res.state.model, cfg.train.eval_network, *test);
        if (out) {
            write_text(*out / "test_metrics.csv", res.test->to_csv());
        }
    }
    return res;
}

ExperimentConfig sup_only(ExperimentConfig base) {
    base.loss.enable_cg = false;
    base.loss.enable_mi = false;
    base.loss.enable_pix = false;
    return base;
}

std::vector<std::pair<std::string, ExperimentConfig>> ablation_matrix(const ExperimentConfig& base) {
    std::vector<std::pair<std::string, ExperimentConfig>> rows;
    for (const auto& [name, cg, mi] : {std::tuple{"pix", false, false}, std::tuple{"pix+cg", true, false},
                                       std::tuple{"pix+mi", false, true}, std::tuple{"pix+cg+mi", true, true}}) {
        ExperimentConfig c = base;
        c.loss.enable_pix = true;
        c.loss.enable_cg = cg;
        c.loss.enable_mi = mi;
        rows.emplace_back(name, c);
    }
    return rows;
}

}  // namespace hdc::exp
