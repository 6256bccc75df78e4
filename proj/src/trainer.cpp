#include "hdc/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "hdc/augment.hpp"
#include "hdc/checkpoint.hpp"
#include "hdc/errors.hpp"
#include "hdc/ops.hpp"

namespace hdc::train {

using ad::Var;

namespace {

constexpr std::uint64_t kInitTag = 0x1417;
constexpr std::uint64_t kStepTag = 0x57E9;

double scalar(const Var<double>& v) {
    return v.valid() ? v.value().item() : 0.0;
}
double scalar(const Var<float>& v) {
    return v.valid() ? double(v.value().item()) : 0.0;
}

template <class T>
linalg::KernelSpec kernel_for(const TrainConfig& tc, const Var<T>& features) {
    switch (tc.kernel) {
        case linalg::KernelKind::linear:
            return linalg::KernelSpec::linear();
        case linalg::KernelKind::polynomial:
            return linalg::KernelSpec::polynomial(tc.kernel_degree, tc.kernel_offset);
        case linalg::KernelKind::rbf:
            break;
    }
    // Bandwidth is a constant of the step: read it off a stop-gradient copy.
    return linalg::KernelSpec::rbf(linalg::median_bandwidth(tensor_cast<double>(ad::stop_gradient(features).value())));
}

template <class T>
std::vector<Tensor<T>> collect(const ad::GradMap<T>& g, const std::vector<Var<T>>& vars) {
    std::vector<Tensor<T>> out;
    out.reserve(vars.size());
    for (const auto& v : vars) {
        out.push_back(g.at(v));
    }
    return out;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

ckpt::Section param_section(const std::string& name, const model::ParamSet<float>& p) {
    ckpt::Section s{name, ckpt::Section::Kind::tensors, {}, {}};
    for (std::size_t i = 0; i < p.tensors.size(); ++i) {
        s.tensors.push_back({p.names[i], p.tensors[i]});
    }
    return s;
}

model::ParamSet<float> read_params(const ckpt::Checkpoint& c, const std::string& name,
                                   const model::ParamSet<float>& layout) {
    const ckpt::Section& s = c.get(name);
    if (s.tensors.size() != layout.tensors.size()) {
        throw FormatError("section '" + name + "' holds " + std::to_string(s.tensors.size()) + " tensors, expected " +
                              std::to_string(layout.tensors.size()),
                          0);
    }
    model::ParamSet<float> p;
    for (std::size_t i = 0; i < s.tensors.size(); ++i) {
        if (s.tensors[i].name != layout.names[i] || s.tensors[i].value.shape != layout.tensors[i].shape) {
            throw FormatError("section '" + name + "' tensor " + std::to_string(i) + " ('" + s.tensors[i].name +
                                  "') does not match the configured architecture",
                              0);
        }
        p.names.push_back(s.tensors[i].name);
        p.tensors.push_back(s.tensors[i].value);
    }
    return p;
}

std::vector<Tensor<float>*> student_params(model::ModelState<float>& m) {
    std::vector<Tensor<float>*> out;
    for (auto* set : {&m.encoder, &m.decoder_main, &m.decoder_noisy}) {
        for (auto& t : set->tensors) {
            out.push_back(&t);
        }
    }
    return out;
}

}  // namespace

TrainState init_state(const ExperimentConfig& cfg) {
    cfg.validate();
    TrainState s;
    s.model = model::init_model<float>(cfg.model, SeededRng(cfg.train.seed).derive(kInitTag));
    return s;
}

std::string to_csv_row(const StepRecord& r) {
    return std::to_string(r.iter) + "," + fmt(r.l_sup) + "," + fmt(r.l_cg) + "," + fmt(r.l_mi) + "," + fmt(r.l_pix) +
           "," + fmt(r.l_total) + "," + fmt(r.lr) + "," + fmt(r.grad_norm);
}

std::string train_log_csv(const std::vector<StepRecord>& records) {
    std::string out = std::string(kTrainLogHeader) + "\n";
    for (const auto& r : records) {
        out += to_csv_row(r) + "\n";
    }
    return out;
}

SeededRng step_rng(const TrainConfig& cfg, std::size_t iteration) {
    return SeededRng(cfg.seed).derive(kStepTag).derive(iteration);
}

ActiveTerms active_terms(const losses::LossWeights& w) {
    return {w.enable_cg && w.beta_cg > 0.0, w.enable_mi && w.beta_mi > 0.0, w.enable_pix};
}

template <class T>
StepViews<T> make_views(const LabeledBatch& lab, const UnlabeledBatch& unl, const ExperimentConfig& cfg,
                        const SeededRng& rng) {
    if (lab.images.empty() || lab.images.size() != lab.masks.size()) {
        throw ContractError("make_views: labeled batch needs one mask per image");
    }
    StepViews<T> v;
    SeededRng weak_l = rng.derive(tags::weak_labeled);
    std::vector<Image> imgs;
    for (std::size_t i = 0; i < lab.images.size(); ++i) {
        auto w = aug::weak_augment(lab.images[i], lab.masks[i], weak_l);
        for (const auto c : w.mask->labels) {
            if (c >= cfg.model.classes) {
                throw ContractError("make_views: mask class " + std::to_string(c) + " >= model.classes " +
                                    std::to_string(cfg.model.classes));
            }
            v.labels.push_back(static_cast<std::int32_t>(c));
        }
        imgs.push_back(std::move(w.image));
    }
    v.labeled = model::batch_tensor<T>(imgs, cfg.model.in_channels);
    if (!active_terms(cfg.loss).any()) {
        return v;
    }
    if (unl.size() < 2) {
        throw ContractError("make_views: unlabeled batch needs at least 2 images");
    }
    SeededRng weak_u = rng.derive(tags::weak_unlabeled);
    SeededRng strong = rng.derive(tags::strong);
    std::vector<Image> weak, strong_imgs;
    for (const auto& img : unl) {
        weak.push_back(aug::weak_augment(img, std::nullopt, weak_u).image);
        strong_imgs.push_back(aug::strong_augment(weak.back(), strong, cfg.train.strong_strength));
    }
    v.weak = model::batch_tensor<T>(weak, cfg.model.in_channels);
    v.strong = model::batch_tensor<T>(strong_imgs, cfg.model.in_channels);
    return v;
}

template <class T>
losses::LossParts<T> build_losses(const ExperimentConfig& cfg, const model::StudentVars<T>& student,
                                  const model::TeacherVars<T>& teacher, const StepViews<T>& views,
                                  const SeededRng& rng) {
    ad::Tape<T>& tape = student.encoder.front().tape();
    losses::LossParts<T> parts;

    SeededRng noise_l = rng.derive(tags::noise_labeled);
    const auto sup = model::forward_student(cfg.model, student, tape.constant(views.labeled), cfg.train.noise_gamma,
                                            noise_l);
    parts.sup = losses::supervised_loss(sup.p1, sup.p2, std::span<const std::int32_t>(views.labels));

    const ActiveTerms on = active_terms(cfg.loss);
    if (!on.any()) {
        return parts;
    }
    const auto t = model::forward_teacher(cfg.model, teacher, tape.constant(views.weak));
    const Var<T> teacher_probs = ad::stop_gradient(t.probs);
    const Var<T> zt = ad::stop_gradient(t.zt);

    SeededRng noise_u = rng.derive(tags::noise_unlabeled);
    const auto s = model::forward_student(cfg.model, student, tape.constant(views.strong), cfg.train.noise_gamma,
                                          noise_u);
    if (on.pix) {
        parts.pix = losses::pixel_consistency_loss(ad::softmax_channels(s.p1), ad::softmax_channels(s.p2),
                                                   teacher_probs);
    }
    if (on.cg) {
        const auto corr =
            losses::correlation_matrix(ad::standardize_columns(s.zs), ad::standardize_columns(zt));
        parts.cg = losses::cg_loss(corr, cfg.loss.cg_alpha, T(cfg.loss.cg_eps));
    }
    if (on.mi) {
        parts.mi = losses::mi_loss(s.f1, s.f2, kernel_for(cfg.train, s.f1), kernel_for(cfg.train, s.f2));
    }
    return parts;
}

template <class T>
StepGradients<T> compute_gradients(const model::ModelState<T>& state, const ExperimentConfig& cfg,
                                   const StepViews<T>& views, const SeededRng& rng, bool audit_teacher) {
    ad::Tape<T> tape;
    const auto student = model::bind_student(tape, state, true);
    const auto teacher = model::bind_teacher(tape, state, audit_teacher);
    const auto parts = build_losses(cfg, student, teacher, views, rng);
    const Var<T> total = losses::total_loss(parts, cfg.loss);
    const auto g = tape.backward(total);
    StepGradients<T> out;
    out.l_sup = scalar(parts.sup);
    out.l_cg = scalar(parts.cg);
    out.l_mi = scalar(parts.mi);
    out.l_pix = scalar(parts.pix);
    out.l_total = scalar(total);
    out.encoder = collect(g, student.encoder);
    out.decoder_main = collect(g, student.decoder_main);
    out.decoder_noisy = collect(g, student.decoder_noisy);
    if (audit_teacher) {
        out.teacher = collect(g, teacher.encoder);
        auto dec = collect(g, teacher.decoder);
        out.teacher.insert(out.teacher.end(), dec.begin(), dec.end());
    }
    return out;
}

StepRecord train_step(TrainState& state, const LabeledBatch& lab, const UnlabeledBatch& unl,
                      const ExperimentConfig& cfg) {
    const SeededRng rng = step_rng(cfg.train, state.iteration);
    const StepViews<float> views = make_views<float>(lab, unl, cfg, rng);
    StepGradients<float> g = compute_gradients(state.model, cfg, views, rng);

    std::vector<Tensor<float>> grads;
    grads.reserve(g.encoder.size() + g.decoder_main.size() + g.decoder_noisy.size());
    for (auto* set : {&g.encoder, &g.decoder_main, &g.decoder_noisy}) {
        for (auto& t : *set) {
            grads.push_back(std::move(t));
        }
    }
    double sq = 0.0;
    for (const auto& t : grads) {
        for (const float v : t.data) {
            sq += double(v) * double(v);
        }
    }
    StepRecord rec;
    rec.iter = state.iteration;
    rec.l_sup = g.l_sup;
    rec.l_cg = g.l_cg;
    rec.l_mi = g.l_mi;
    rec.l_pix = g.l_pix;
    rec.l_total = g.l_total;
    rec.lr = cfg.train.lr_at(state.iteration);
    rec.grad_norm = std::sqrt(sq);
    if (!std::isfinite(rec.l_total) || !std::isfinite(rec.grad_norm)) {
        throw NumericError("non-finite loss or gradient at iteration " + std::to_string(state.iteration));
    }

    const auto params = student_params(state.model);
    optim::optimizer_step<float>(params, grads, cfg.train.optimizer_config(), state.optimizer, rec.lr);
    ++state.iteration;
    model::ema_update(state.model, cfg.train.ema_decay_at(state.iteration));
    return rec;
}

void save_checkpoint(const TrainState& state, const ExperimentConfig& cfg, const std::filesystem::path& path) {
    ckpt::Checkpoint c;
    c.sections.push_back({"config", ckpt::Section::Kind::text, {}, to_text(cfg)});
    std::ostringstream meta;
    const SeededRng rng = step_rng(cfg.train, state.iteration);
    meta << "iteration=" << state.iteration << "\nrng_seed=" << rng.seed() << "\nrng_counter=" << rng.counter()
         << "\noptimizer_steps=" << state.optimizer.steps << "\n";
    c.sections.push_back({"trainer", ckpt::Section::Kind::text, {}, meta.str()});
    c.sections.push_back(param_section("encoder", state.model.encoder));
    c.sections.push_back(param_section("decoder_main", state.model.decoder_main));
    c.sections.push_back(param_section("decoder_noisy", state.model.decoder_noisy));
    c.sections.push_back(param_section("teacher_encoder", state.model.teacher_encoder));
    c.sections.push_back(param_section("teacher_decoder", state.model.teacher_decoder));
    ckpt::Section first{"optimizer_first", ckpt::Section::Kind::tensors, {}, {}};
    ckpt::Section second{"optimizer_second", ckpt::Section::Kind::tensors, {}, {}};
    for (std::size_t i = 0; i < state.optimizer.first.size(); ++i) {
        first.tensors.push_back({std::to_string(i), state.optimizer.first[i]});
    }
    for (std::size_t i = 0; i < state.optimizer.second.size(); ++i) {
        second.tensors.push_back({std::to_string(i), state.optimizer.second[i]});
    }
    c.sections.push_back(std::move(first));
    c.sections.push_back(std::move(second));
    ckpt::save(c, path);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
    const ckpt::Checkpoint c = ckpt::load(path);
    LoadedCheckpoint out;
    out.config = config_from_text(c.get("config").text, path.string() + "#config");
    out.config.validate();
    // The configured architecture fixes the expected tensor names and shapes.
    const auto layout = model::init_model<float>(out.config.model, SeededRng(0));
    out.state.model.config = out.config.model;
    out.state.model.encoder = read_params(c, "encoder", layout.encoder);
    out.state.model.decoder_main = read_params(c, "decoder_main", layout.decoder_main);
    out.state.model.decoder_noisy = read_params(c, "decoder_noisy", layout.decoder_noisy);
    out.state.model.teacher_encoder = read_params(c, "teacher_encoder", layout.encoder);
    out.state.model.teacher_decoder = read_params(c, "teacher_decoder", layout.decoder_main);

    std::istringstream meta(c.get("trainer").text);
    std::string line;
    bool have_iter = false;
    while (std::getline(meta, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            continue;
        }
        const std::string k = line.substr(0, eq);
        const std::uint64_t v = std::stoull(line.substr(eq + 1));
        if (k == "iteration") {
            out.state.iteration = v;
            have_iter = true;
        } else if (k == "optimizer_steps") {
            out.state.optimizer.steps = v;
        }
    }
    if (!have_iter) {
        throw FormatError("trainer section lacks the iteration index", 0);
    }
    for (const auto& t : c.get("optimizer_first").tensors) {
        out.state.optimizer.first.push_back(t.value);
    }
    for (const auto& t : c.get("optimizer_second").tensors) {
        out.state.optimizer.second.push_back(t.value);
    }
    return out;
}

#define HDC_INSTANTIATE_TRAINER(T)                                                                                 \
    template StepViews<T> make_views(const LabeledBatch&, const UnlabeledBatch&, const ExperimentConfig&,          \
                                     const SeededRng&);                                                           \
    template losses::LossParts<T> build_losses(const ExperimentConfig&, const model::StudentVars<T>&,              \
                                               const model::TeacherVars<T>&, const StepViews<T>&,                 \
                                               const SeededRng&);                                                 \
    template StepGradients<T> compute_gradients(const model::ModelState<T>&, const ExperimentConfig&,              \
                                                const StepViews<T>&, const SeededRng&, bool);

HDC_INSTANTIATE_TRAINER(float)
HDC_INSTANTIATE_TRAINER(double)

}  // namespace hdc::train
