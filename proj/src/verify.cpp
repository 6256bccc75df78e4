#include "hdc/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>

#include "hdc/augment.hpp"
#include "hdc/entropy.hpp"
#include "hdc/experiment.hpp"
#include "hdc/gradcheck.hpp"
#include "hdc/linalg.hpp"
#include "hdc/metrics.hpp"
#include "hdc/ops.hpp"
#include "hdc/synth.hpp"
#include "hdc/trainer.hpp"

namespace hdc::verify {

using ad::Var;

namespace {

std::string fmt(const char* f, double v) {
    char buf[96];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

Image random_image(std::size_t h, std::size_t w, SeededRng& rng) {
    Image img(h, w);
    for (float& v : img.pixels) {
        v = static_cast<float>(rng.uniform());
    }
    return img;
}

LabelMap random_blob_mask(std::size_t h, std::size_t w, SeededRng& rng) {
    LabelMap m(h, w);
    const auto y0 = rng.below(h / 2), x0 = rng.below(w / 2);
    const auto y1 = y0 + 2 + rng.below(h / 2 - 1), x1 = x0 + 2 + rng.below(w / 2 - 1);
    for (std::size_t y = y0; y < std::min(y1, h); ++y) {
        for (std::size_t x = x0; x < std::min(x1, w); ++x) {
            m(y, x) = 1;
        }
    }
    return m;
}

ExperimentConfig small_config() {
    ExperimentConfig cfg;
    cfg.model.width = 4;
    cfg.model.depth = 2;
    cfg.train.batch_labeled = 4;
    cfg.train.batch_unlabeled = 4;
    return cfg;
}

enum class Term { sup, cg, mi, pix, total };
constexpr const char* kTermNames[] = {"sup", "cg", "mi", "pix", "total"};

template <class T>
Var<T> pick(const losses::LossParts<T>& p, Term t, const losses::LossWeights& w) {
    switch (t) {
        case Term::sup:
            return p.sup;
        case Term::cg:
            return p.cg;
        case Term::mi:
            return p.mi;
        case Term::pix:
            return p.pix;
        case Term::total:
            return losses::total_loss(p, w);
    }
    return p.sup;
}

bool all_zero(const std::vector<Tensor<float>>& ts) {
    for (const auto& t : ts) {
        for (const float v : t.data) {
            if (std::signbit(v) || v != 0.0f) {
                return false;
            }
        }
    }
    return true;
}

bool any_nonzero(const std::vector<Tensor<float>>& ts) {
    for (const auto& t : ts) {
        for (const float v : t.data) {
            if (v != 0.0f) {
                return true;
            }
        }
    }
    return false;
}

template <class T>
std::vector<Tensor<T>> grads_of(const ad::GradMap<T>& g, const std::vector<Var<T>>& vs) {
    std::vector<Tensor<T>> out;
    for (const auto& v : vs) {
        out.push_back(g.at(v));
    }
    return out;
}

bool ulp_close(double got, double want, int ulps) {
    if (got == want) {
        return true;
    }
    double x = want;
    for (int i = 0; i < ulps; ++i) {
        x = std::nextafter(x, got);
    }
    return (want < got) ? got <= x : got >= x;
}

linalg::Matrix random_psd(std::size_t b, std::size_t rank, SeededRng& rng) {
    linalg::Matrix a(Shape{b, rank});
    for (auto& v : a.data) {
        v = rng.normal();
    }
    linalg::Matrix k(Shape{b, b});
    for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t j = 0; j < b; ++j) {
            double s = 0;
            for (std::size_t r = 0; r < rank; ++r) {
                s += a.data[i * rank + r] * a.data[j * rank + r];
            }
            k.data[i * b + j] = s;
        }
    }
    return k;
}

}  // namespace

CheckResult timed(const std::function<CheckResult()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    CheckResult r = fn();
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

CheckResult gradient_suite(const SuiteOptions& opt) {
    CheckResult res{"gradient", true, "", 0};
    const ExperimentConfig cfg = small_config();
    double worst[5] = {0, 0, 0, 0, 0};
    std::size_t checked[5] = {0, 0, 0, 0, 0}, skipped[5] = {0, 0, 0, 0, 0};
    for (std::size_t seed = 0; seed < opt.gradient_seeds; ++seed) {
        SeededRng rng = SeededRng(seed).derive(0x67AD);
        auto state = model::init_model<double>(cfg.model, rng.derive(1));
        SeededRng jitter = rng.derive(2);
        for (auto* set : {&state.teacher_encoder, &state.teacher_decoder}) {
            for (auto& t : set->tensors) {
                for (auto& v : t.data) {
                    v += 0.05 * jitter.normal();
                }
            }
        }
        SeededRng data_rng = rng.derive(3);
        train::LabeledBatch lab;
        train::UnlabeledBatch unl;
        for (int i = 0; i < 4; ++i) {
            lab.images.push_back(random_image(16, 16, data_rng));
            lab.masks.push_back(random_blob_mask(16, 16, data_rng));
            unl.push_back(random_image(16, 16, data_rng));
        }
        const SeededRng step = rng.derive(4);
        const auto views = train::make_views<double>(lab, unl, cfg, step);

        std::vector<Tensor<double>> inputs;
        for (const auto* set : {&state.encoder, &state.decoder_main, &state.decoder_noisy}) {
            inputs.insert(inputs.end(), set->tensors.begin(), set->tensors.end());
        }
        const std::size_t ne = state.encoder.tensors.size(), nd = state.decoder_main.tensors.size();

        // Coordinates spread evenly over the encoder and both decoders.
        ad::Coords coords;
        SeededRng pick_rng = rng.derive(5);
        const std::size_t groups[3][2] = {{0, ne}, {ne, ne + nd}, {ne + nd, ne + 2 * nd}};
        for (const auto& g : groups) {
            for (int c = 0; c < 12; ++c) {
                const std::size_t k = g[0] + pick_rng.below(g[1] - g[0]);
                coords.emplace_back(k, pick_rng.below(inputs[k].numel()));
            }
        }
        for (int ti = 0; ti < 5; ++ti) {
            const Term term = static_cast<Term>(ti);
            ad::MultiScalarFn<double> f = [&](ad::Tape<double>& tape, const std::vector<Var<double>>& v) {
                model::StudentVars<double> sv;
                sv.encoder.assign(v.begin(), v.begin() + ne);
                sv.decoder_main.assign(v.begin() + ne, v.begin() + ne + nd);
                sv.decoder_noisy.assign(v.begin() + ne + nd, v.end());
                const auto tv = model::bind_teacher(tape, state, false);
                auto parts = train::build_losses(cfg, sv, tv, views, step);
                if (opt.inject_cg_sign_error) {
                    parts.cg = ad::flip_gradient(parts.cg);
                }
                return pick(parts, term, cfg.loss);
            };
            const auto rep = ad::finite_diff_check<double>(f, inputs, 1e-5, coords);
            worst[ti] = std::max(worst[ti], rep.max_rel_error);
            checked[ti] += rep.checked;
            skipped[ti] += rep.skipped;
        }
    }
    for (int ti = 0; ti < 5; ++ti) {
        const bool ok = worst[ti] < 1e-4 && checked[ti] > 0;
        res.pass = res.pass && ok;
        res.detail += std::string(ti ? " " : "") + kTermNames[ti] + "=" + fmt("%.2e", worst[ti]) + "(" +
                      std::to_string(checked[ti]) + " checked," + std::to_string(skipped[ti]) + " kink-skipped)";
    }
    res.detail += " seeds=" + std::to_string(opt.gradient_seeds);
    return res;
}

CheckResult entropy_suite(const SuiteOptions& opt) {
    CheckResult res{"entropy", true, "", 0};
    SeededRng rng(0xE27);
    double worst_a2 = 0, worst_bound = 0, min_eig = std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n < opt.entropy_matrices; ++n) {
        const std::size_t b = 2 + rng.below(15);
        const std::size_t rank = 1 + rng.below(b + 2);
        const auto k = linalg::trace_normalize(linalg::GramMatrix{random_psd(b, rank, rng), false});

        ad::Tape<double> tape;
        const double closed = ad::matrix_renyi_entropy_a2(tape.constant(k.entries)).value().item();
        const double eig = entropy::matrix_renyi_entropy(k, entropy::EntropyOrder(2.0));
        worst_a2 = std::max(worst_a2, std::abs(closed - eig));

        for (const double a : {0.5, 1.0, 2.0, 4.0}) {
            const double h = entropy::matrix_renyi_entropy(k, entropy::EntropyOrder(a));
            worst_bound = std::max({worst_bound, -h, h - std::log2(double(b))});
        }

        // Hadamard of two independent Gram matrices from different kernels.
        linalg::Matrix z(Shape{b, 3});
        for (auto& v : z.data) {
            v = rng.normal();
        }
        const auto spec = rng.coin() ? linalg::KernelSpec::rbf(linalg::median_bandwidth(z))
                                     : linalg::KernelSpec::polynomial(2, 1.0);
        const auto k2 = linalg::trace_normalize(linalg::gram_matrix(z, spec));
        const auto h = linalg::hadamard(k, k2);
        const auto ev = linalg::symmetric_eigenvalues(h.entries);
        min_eig = std::min(min_eig, ev.back());
    }
    const bool a2_ok = worst_a2 <= 1e-8;
    const bool bound_ok = worst_bound <= 1e-8;
    const bool psd_ok = min_eig >= -1e-8;
    res.pass = a2_ok && bound_ok && psd_ok;
    res.detail = "closed-form-vs-eigen=" + fmt("%.2e", worst_a2) + " bound-violation=" + fmt("%.2e", worst_bound) +
                 " min-hadamard-eig=" + fmt("%.2e", min_eig) + " matrices=" + std::to_string(opt.entropy_matrices);
    return res;
}

CheckResult stop_gradient_suite() {
    CheckResult res{"stop-gradient", true, "", 0};
    ExperimentConfig cfg;
    cfg.model.width = 8;
    cfg.model.depth = 3;
    const auto state = model::init_model<float>(cfg.model, SeededRng(91));
    train::LabeledBatch lab;
    train::UnlabeledBatch unl;
    for (std::uint64_t i = 0; i < 4; ++i) {
        auto s = synth::generate_sample(5, i, 32, 32);
        lab.images.push_back(s.image);
        lab.masks.push_back(s.mask);
        unl.push_back(synth::generate_sample(5, 100 + i, 32, 32).image);
    }
    const SeededRng step(17);

    auto run = [&](const ExperimentConfig& c, Term term) {
        const auto views = train::make_views<float>(lab, unl, c, step);
        ad::Tape<float> tape;
        const auto sv = model::bind_student(tape, state, true);
        const auto tv = model::bind_teacher(tape, state, true);
        const auto parts = train::build_losses(c, sv, tv, views, step);
        const auto g = tape.backward(pick(parts, term, c.loss));
        std::vector<Tensor<float>> teacher = grads_of(g, tv.encoder);
        auto td = grads_of(g, tv.decoder);
        teacher.insert(teacher.end(), td.begin(), td.end());
        bool teacher_absent = true;
        for (const auto* set : {&tv.encoder, &tv.decoder}) {
            for (const auto& v : *set) {
                teacher_absent = teacher_absent && !g.has(v);
            }
        }
        return std::tuple{grads_of(g, sv.encoder), grads_of(g, sv.decoder_main), grads_of(g, sv.decoder_noisy),
                          teacher, teacher_absent};
    };

    ExperimentConfig mi_only = cfg;
    mi_only.loss.enable_cg = false;
    mi_only.loss.enable_pix = false;
    const auto [enc, d1, d2, teacher, absent] = run(mi_only, Term::mi);
    const bool d1_zero = all_zero(d1), d2_live = any_nonzero(d2), enc_live = any_nonzero(enc);
    const bool mi_teacher = all_zero(teacher) && absent;
    res.detail = std::string("mi: main-decoder ") + (d1_zero ? "zero" : "NONZERO") + ", noisy-decoder " +
                 (d2_live ? "nonzero" : "ZERO") + ", encoder " + (enc_live ? "nonzero" : "ZERO") + ";";
    res.pass = d1_zero && d2_live && enc_live && mi_teacher;

    for (int ti = 0; ti < 5; ++ti) {
        const auto r = run(cfg, static_cast<Term>(ti));
        const bool ok = all_zero(std::get<3>(r)) && std::get<4>(r);
        res.pass = res.pass && ok;
        res.detail += std::string(" teacher<-") + kTermNames[ti] + (ok ? " zero" : " NONZERO");
    }
    return res;
}

CheckResult ema_suite() {
    CheckResult res{"ema", true, "", 0};
    struct Fixture {
        double decay, teacher, student, expected;
    };
    // Expected values worked by hand.
    const Fixture fixtures[] = {
        {0.0, 1.0, 0.0, 0.0},      {0.0, -2.5, 3.25, 3.25},   {0.5, 1.0, 0.0, 0.5},     {0.5, 3.0, -1.0, 1.0},
        {0.9, 1.0, 0.0, 0.9},      {0.9, 0.0, 1.0, 0.1},      {0.9, 2.0, 4.0, 2.2},     {1.0, 1.0, 0.0, 1.0},
        {1.0, -7.5, 100.0, -7.5},  {0.5, 0.25, 0.75, 0.5},
    };
    int failures = 0;
    auto check = [&](auto tag) {
        using T = decltype(tag);
        for (const auto& f : fixtures) {
            model::ModelState<T> s;
            s.encoder.names = {"x"};
            s.encoder.tensors = {Tensor<T>(Shape{1}, T(f.student))};
            s.decoder_main = s.encoder;
            s.decoder_noisy = s.encoder;
            s.teacher_encoder.names = {"x"};
            s.teacher_encoder.tensors = {Tensor<T>(Shape{1}, T(f.teacher))};
            s.teacher_decoder = s.teacher_encoder;
            const auto before = s.encoder;
            model::ema_update(s, f.decay);
            // Exact blend of the representable inputs; the decimal hand value is only 1e-15 away.
            const long double d = f.decay;
            const long double exact = d * (long double)T(f.teacher) + (1.0L - d) * (long double)T(f.student);
            const double want = double(T(exact));
            const bool ok = ulp_close(double(s.teacher_encoder.tensors[0].data[0]), want, 1) &&
                            ulp_close(double(s.teacher_decoder.tensors[0].data[0]), want, 1) &&
                            std::abs(double(exact) - f.expected) <= 1e-15 && s.encoder == before;
            failures += ok ? 0 : 1;
        }
    };
    check(float{});
    check(double{});

    // Constant student: the gap shrinks by decay^n.
    double worst_shrink = 0;
    for (const double decay : {0.5, 0.9, 0.99}) {
        model::ModelState<double> s;
        s.encoder.names = {"x"};
        s.encoder.tensors = {Tensor<double>(Shape{1}, 0.0)};
        s.decoder_main = s.encoder;
        s.teacher_encoder.names = {"x"};
        s.teacher_encoder.tensors = {Tensor<double>(Shape{1}, 1.0)};
        s.teacher_decoder = s.teacher_encoder;
        for (int n = 1; n <= 20; ++n) {
            model::ema_update(s, decay);
            const double gap = s.teacher_encoder.tensors[0].data[0];
            worst_shrink = std::max(worst_shrink, std::abs(gap - std::pow(decay, n)) / std::pow(decay, n));
        }
    }
    res.pass = failures == 0 && worst_shrink < 1e-12;
    res.detail = std::to_string(2 * std::size(fixtures) - failures) + "/" + std::to_string(2 * std::size(fixtures)) +
                 " fixtures within 1 ulp; decay^n shrink rel-err=" + fmt("%.1e", worst_shrink);
    return res;
}

CheckResult metric_suite(const SuiteOptions& opt) {
    using metrics::BinaryMask;
    CheckResult res{"metrics", true, "", 0};
    std::vector<std::string> failed;
    auto expect = [&](bool ok, const char* what) {
        if (!ok) {
            failed.emplace_back(what);
        }
    };

    {
        const std::pair<int, int> pa[] = {{0, 0}}, pb[] = {{3, 4}};
        const auto a = BinaryMask::from_points(8, 8, pa), b = BinaryMask::from_points(8, 8, pb);
        expect(metrics::hausdorff(a, b).value == 5.0, "3-4-5 HD");
        expect(metrics::asd(a, b).value == 5.0, "singleton ASD");
        expect(metrics::dice(a, b) == 0.0, "disjoint dice");
    }
    {
        std::vector<std::pair<int, int>> la, lb;
        for (int r = 1; r <= 10; ++r) {
            la.emplace_back(r, 2);
            lb.emplace_back(r, 5);
        }
        const auto a = BinaryMask::from_points(12, 12, la), b = BinaryMask::from_points(12, 12, lb);
        expect(metrics::asd(a, b).value == 3.0, "parallel-lines ASD");
        expect(metrics::hausdorff(a, b).value == 3.0, "parallel-lines HD");
    }
    {
        std::vector<std::pair<int, int>> la, lb;
        for (int c = 0; c < 99; ++c) {
            la.emplace_back(5, c);
            lb.emplace_back(6, c);
        }
        la.emplace_back(16, 50);  // isolated outlier, 10 px from the other line
        const auto a = BinaryMask::from_points(20, 100, la), b = BinaryMask::from_points(20, 100, lb);
        expect(a.boundary().size() == 100, "outlier fixture size");
        expect(metrics::hausdorff(a, b).value == 10.0, "outlier HD");
        expect(metrics::hausdorff(a, b, 95.0).value <= 1.0, "outlier HD95");
    }
    {
        BinaryMask a(4, 4), b(4, 4);
        for (std::size_t x = 0; x < 4; ++x) {
            a.set(1, x);
        }
        b.set(1, 0);
        b.set(1, 1);
        b.set(2, 0);
        b.set(2, 1);
        expect(metrics::dice(a, b) == 0.5, "4x4 dice");
        expect(metrics::dice(a, a) == 1.0, "self dice");
        const BinaryMask empty(4, 4);
        expect(metrics::dice(empty, empty) == 1.0, "empty dice");
        const auto d = metrics::hausdorff(a, empty);
        expect(d.degenerate && d.value == std::hypot(4.0, 4.0), "empty HD fallback");
    }

    SeededRng rng(0x3E7);
    std::size_t violations = 0;
    for (std::size_t n = 0; n < opt.metric_pairs; ++n) {
        auto blobs = [&] {
            BinaryMask m(24, 24);
            const auto k = 1 + rng.below(3);
            for (std::uint64_t j = 0; j < k; ++j) {
                const auto cy = rng.below(24), cx = rng.below(24), r = 1 + rng.below(6);
                for (std::size_t y = 0; y < 24; ++y) {
                    for (std::size_t x = 0; x < 24; ++x) {
                        const long dy = long(y) - long(cy), dx = long(x) - long(cx);
                        if (dy * dy + dx * dx <= long(r * r)) {
                            m.set(y, x);
                        }
                    }
                }
            }
            return m;
        };
        const auto a = blobs(), b = blobs();
        const double dab = metrics::dice(a, b), dba = metrics::dice(b, a);
        const auto sab = metrics::surface_distances(a, b), sba = metrics::surface_distances(b, a);
        const bool ok = dab == dba && dab >= 0.0 && dab <= 1.0 && sab.hd == sba.hd && sab.hd95 == sba.hd95 &&
                        std::abs(sab.asd - sba.asd) <= 1e-12 && sab.hd95 <= sab.hd && sab.asd <= sab.hd + 1e-12 &&
                        sab.hd == metrics::hausdorff(a, b).value && sab.hd95 == metrics::hausdorff(a, b, 95).value;
        violations += ok ? 0 : 1;
    }
    res.pass = failed.empty() && violations == 0;
    res.detail = "fixtures " + (failed.empty() ? std::string("ok") : "FAILED:") ;
    for (const auto& f : failed) {
        res.detail += " [" + f + "]";
    }
    res.detail += "; random pairs " + std::to_string(opt.metric_pairs - violations) + "/" +
                  std::to_string(opt.metric_pairs) + " satisfy symmetry and HD95<=HD, ASD<=HD";
    return res;
}

CheckResult loss_limit_suite() {
    CheckResult res{"loss-limits", true, "", 0};
    SeededRng rng(0x1337);
    double cg_err = 0, mi_abs = 0, pix_val = 0;
    for (int rep = 0; rep < 10; ++rep) {
        ad::Tape<double> tape;
        Tensor<double> z(Shape{8, 5});
        for (auto& v : z.data) {
            v = rng.normal();
        }
        const auto zs = ad::standardize_columns(tape.leaf(z));
        const auto zt = ad::standardize_columns(tape.constant(z));
        const double cg = losses::cg_loss(losses::correlation_matrix(zs, zt), 2, 1e-8).value().item();
        cg_err = std::max(cg_err, std::abs(cg - std::log2(1e-8)));

        Tensor<double> f1(Shape{6, 4}), f2(Shape{6, 4});
        const double row[4] = {rng.normal(), rng.normal(), rng.normal(), rng.normal()};
        for (std::size_t i = 0; i < 6; ++i) {
            for (std::size_t j = 0; j < 4; ++j) {
                f1.data[i * 4 + j] = row[j];
            }
        }
        for (auto& v : f2.data) {
            v = rng.normal();
        }
        const auto f2v = tape.leaf(f2);
        const auto spec2 = linalg::KernelSpec::rbf(linalg::median_bandwidth(f2));
        const double mi =
            losses::mi_loss(tape.leaf(f1), f2v, linalg::KernelSpec::rbf(1.0), spec2).value().item();
        mi_abs = std::max(mi_abs, std::abs(mi));

        Tensor<double> logits(Shape{2, 3, 4, 4});
        for (auto& v : logits.data) {
            v = rng.normal();
        }
        const auto p = ad::softmax_channels(tape.constant(logits));
        const double pix = losses::pixel_consistency_loss(p, p, p).value().item();
        pix_val = std::max(pix_val, std::abs(pix));
    }
    res.pass = cg_err <= 1e-9 && mi_abs <= 1e-12 && pix_val == 0.0;
    res.detail = "cg-at-perfect-correlation |L-log2(eps)|=" + fmt("%.1e", cg_err) + " mi-rank1=" + fmt("%.1e", mi_abs) +
                 " pix-at-agreement=" + fmt("%.1e", pix_val);
    return res;
}

std::vector<CheckResult> run_property_suites(const SuiteOptions& opt) {
    return {timed([&] { return gradient_suite(opt); }), timed([&] { return entropy_suite(opt); }),
            timed(stop_gradient_suite),                 timed(ema_suite),
            timed([&] { return metric_suite(opt); }),   timed(loss_limit_suite)};
}

CheckResult determinism_check(const std::filesystem::path& work_dir) {
    CheckResult res{"determinism", true, "", 0};
    data::GenerateOptions g;
    g.seed = 3;
    g.n_total = 40;
    g.labeled_fraction = 0.25;
    g.height = 32;
    g.width = 32;
    g.val = 0;
    g.test = 4;
    const auto manifest = data::generate_dataset(g, work_dir / "data");
    ExperimentConfig cfg;
    cfg.model.width = 8;
    cfg.train.iterations = 100;
    cfg.train.batch_labeled = 4;
    cfg.train.batch_unlabeled = 4;
    cfg.train.lr = 1e-3;
    cfg.train.seed = 11;

    exp::RunOptions plain;
    plain.evaluate_test = false;
    const auto a = exp::run_experiment(cfg, manifest, plain);
    const auto b = exp::run_experiment(cfg, manifest, plain);
    const bool same_log = a.log == b.log && train::train_log_csv(a.log) == train::train_log_csv(b.log);
    const bool same_state = a.state == b.state;

    exp::RunOptions half = plain;
    half.stop_at = 50;
    const auto first = exp::run_experiment(cfg, manifest, half);
    const auto ckpt = work_dir / "half.ckpt";
    train::save_checkpoint(first.state, cfg, ckpt);
    const auto loaded = train::load_checkpoint(ckpt);
    const bool roundtrip = loaded.state == first.state && to_text(loaded.config) == to_text(cfg);
    exp::RunOptions resume = plain;
    resume.resume = loaded.state;
    const auto second = exp::run_experiment(loaded.config, manifest, resume);
    const bool resumed_state = second.state == a.state;
    std::vector<train::StepRecord> joined = first.log;
    joined.insert(joined.end(), second.log.begin(), second.log.end());
    const bool resumed_log = joined == a.log;

    res.pass = same_log && same_state && roundtrip && resumed_state && resumed_log;
    res.detail = std::string("rerun log ") + (same_log ? "identical" : "DIFFERS") + ", rerun params " +
                 (same_state ? "identical" : "DIFFER") + ", checkpoint round-trip " + (roundtrip ? "exact" : "INEXACT") +
                 ", 50+50 vs 100 params " + (resumed_state ? "identical" : "DIFFER") + ", log " +
                 (resumed_log ? "identical" : "DIFFERS");
    return res;
}

// L_sup of the fixed batch itself: no augmentation, one fixed noise draw for the noisy decoder.
static double clean_sup(const train::TrainState& st, const ExperimentConfig& cfg, const train::LabeledBatch& lab) {
    ad::Tape<float> tape;
    const auto sv = model::bind_student(tape, st.model, false);
    const auto x = tape.constant(model::batch_tensor<float>(lab.images, cfg.model.in_channels));
    SeededRng rng(77);
    const auto out = model::forward_student(cfg.model, sv, x, cfg.train.noise_gamma, rng);
    std::vector<std::int32_t> y;
    for (const auto& m : lab.masks) {
        y.insert(y.end(), m.labels.begin(), m.labels.end());
    }
    return losses::supervised_loss(out.p1, out.p2, std::span<const std::int32_t>(y)).value().item();
}

CheckResult overfit_check(std::size_t steps, double threshold) {
    CheckResult res{"overfit-one-batch", false, "", 0};
    ExperimentConfig cfg;
    cfg.train.lr = 1e-3;
    train::LabeledBatch lab;
    train::UnlabeledBatch unl;
    for (std::uint64_t i = 0; i < cfg.train.batch_labeled; ++i) {
        auto s = synth::generate_sample(21, i, 64, 64);
        lab.images.push_back(std::move(s.image));
        lab.masks.push_back(std::move(s.mask));
    }
    for (std::uint64_t i = 0; i < cfg.train.batch_unlabeled; ++i) {
        unl.push_back(synth::generate_sample(21, 1000 + i, 64, 64).image);
    }
    auto state = train::init_state(cfg);
    const double first = clean_sup(state, cfg, lab);
    double best = first, best_step = std::numeric_limits<double>::infinity();
    std::size_t reached = 0;
    for (std::size_t t = 0; t < steps; ++t) {
        const auto rec = train::train_step(state, lab, unl, cfg);
        best_step = std::min(best_step, rec.l_sup);
        const double l = clean_sup(state, cfg, lab);
        best = std::min(best, l);
        if (l < threshold) {
            reached = t + 1;
            break;
        }
    }
    res.pass = reached > 0;
    res.detail = "l_sup " + fmt("%.4f", first) + " -> best " + fmt("%.4f", best) +
                 (reached ? " (below " + fmt("%.3g", threshold) + " at step " + std::to_string(reached) + ")"
                          : " (never below " + fmt("%.3g", threshold) + " in " + std::to_string(steps) + " steps)") +
                 ", best augmented step l_sup " + fmt("%.4f", best_step);
    return res;
}

}  // namespace hdc::verify
