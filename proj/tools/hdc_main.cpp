// hdc: dataset generation, training, evaluation and self-verification.
// stdout carries key=value summaries and CSV; prose goes to stderr.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <unistd.h>

#include "hdc/checkpoint.hpp"
#include "hdc/config.hpp"
#include "hdc/dataset.hpp"
#include "hdc/experiment.hpp"
#include "hdc/trainer.hpp"
#include "hdc/verify.hpp"

namespace fs = std::filesystem;
using namespace hdc;

namespace {

enum Exit { kOk = 0, kVerifyFailed = 1, kUsage = 2, kIo = 3, kNumeric = 4 };

struct Size {
    std::size_t height = 64, width = 64;
};

Size parse_size(const std::string& s) {
    const auto x = s.find_first_of("xX");
    if (x == std::string::npos) {
        throw ContractError("--size must look like HxW, got '" + s + "'");
    }
    try {
        std::size_t used_h = 0, used_w = 0;
        const long h = std::stol(s.substr(0, x), &used_h);
        const long w = std::stol(s.substr(x + 1), &used_w);
        if (used_h != x || used_w != s.size() - x - 1 || h <= 0 || w <= 0) {
            throw std::invalid_argument("range");
        }
        return {std::size_t(h), std::size_t(w)};
    } catch (const std::logic_error&) {
        throw ContractError("--size must look like HxW with positive integers, got '" + s + "'");
    }
}

model::Network parse_network(const std::string& s) {
    if (s == "student_main") return model::Network::student_main;
    if (s == "student_noisy") return model::Network::student_noisy;
    if (s == "teacher") return model::Network::teacher;
    throw ContractError("unknown network '" + s + "' (student_main, student_noisy, teacher)");
}

void summary(const std::string& line) {
    std::cout << line << '\n' << std::flush;
}

std::string fixed(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::string report_summary(const char* phase, const metrics::MetricReport& r) {
    const auto& m = r.mean();
    return std::string(phase) + " split=" + r.split + " dsc=" + fixed(m.dsc) + " hd=" + fixed(m.hd) +
           " hd95=" + fixed(m.hd95) + " asd=" + fixed(m.asd);
}

int cmd_gen_data(std::uint64_t seed, std::size_t n, double frac, const std::string& size, std::size_t val,
                 std::size_t test, std::size_t classes, const fs::path& out) {
    data::GenerateOptions opt;
    const Size sz = parse_size(size);
    opt.seed = seed;
    opt.n_total = n;
    opt.labeled_fraction = frac;
    opt.height = sz.height;
    opt.width = sz.width;
    opt.val = val;
    opt.test = test;
    opt.classes = classes;
    std::cerr << "generating " << n << " training samples (" << val << " val, " << test << " test) into " << out
              << "\n";
    const auto m = data::generate_dataset(opt, out);
    summary("manifest=" + (out / "manifest.txt").string());
    summary("labeled=" + std::to_string(m.labeled) + " unlabeled=" + std::to_string(m.unlabeled));
    return kOk;
}

int cmd_train(const std::optional<fs::path>& config, const fs::path& manifest_path, const fs::path& out,
              const std::vector<std::string>& overrides, bool quiet) {
    const auto cfg = load_config(config, overrides);
    const auto manifest = data::read_manifest(manifest_path);
    exp::RunOptions opt;
    opt.out_dir = out;
    const std::size_t every = std::max<std::size_t>(1, cfg.train.iterations / 20);
    if (!quiet) {
        opt.on_step = [every](const train::StepRecord& r) {
            if (r.iter % every == 0) {
                std::fprintf(stderr, "iter %zu  l_sup %.4f  l_total %.4f  lr %.2e\n", r.iter, r.l_sup, r.l_total,
                             r.lr);
            }
        };
    }
    std::cerr << "training " << cfg.train.iterations << " iterations; outputs in " << out << "\n";
    try {
        const auto res = exp::run_experiment(cfg, manifest, opt);
        summary("train iterations=" + std::to_string(res.state.iteration) +
                " log=" + (out / "train_log.csv").string() + " checkpoint=" + (out / "final.ckpt").string());
        if (!res.validation.empty()) {
            summary(report_summary("val", res.validation.back().second));
        }
        if (res.test) {
            summary(report_summary("final", *res.test));
        }
    } catch (const exp::TrainingAborted& e) {
        std::cerr << e.what() << "\nlast steps written to " << e.dump_path() << "\n";
        summary("aborted=1 dump=" + e.dump_path().string());
        return kNumeric;
    }
    return kOk;
}

int cmd_eval(const fs::path& ckpt, const fs::path& manifest_path, const std::string& split,
             const std::optional<std::string>& network, const std::optional<fs::path>& out) {
    const auto loaded = train::load_checkpoint(ckpt);
    const auto manifest = data::read_manifest(manifest_path);
    if (manifest.classes != loaded.state.model.config.classes) {
        throw ContractError("checkpoint has " + std::to_string(loaded.state.model.config.classes) +
                            " classes but the dataset has " + std::to_string(manifest.classes));
    }
    const auto which = network ? parse_network(*network) : loaded.config.train.eval_network;
    const auto data = exp::load_split(manifest, split);
    const auto report = exp::evaluate_model(loaded.state.model, which, data);
    const std::string csv = report.to_csv(true);
    if (out) {
        std::ofstream f(*out, std::ios::binary);
        f << csv;
        if (!f) {
            throw IoError("cannot write " + out->string());
        }
        std::cerr << "metrics written to " << *out << "\n";
    }
    std::cout << csv << std::flush;
    return kOk;
}

int cmd_verify(const std::string& fault, bool training, std::size_t seeds) {
    verify::SuiteOptions opt;
    opt.gradient_seeds = seeds;
    if (fault == "cg-sign") {
        opt.inject_cg_sign_error = true;
        std::cerr << "fault injected: sign flip in the cg-loss gradient\n";
    } else if (!fault.empty() && fault != "none") {
        throw ContractError("unknown fault '" + fault + "' (cg-sign)");
    }
    auto results = verify::run_property_suites(opt);
    if (training) {
        const fs::path dir = fs::temp_directory_path() / ("hdc-verify-" + std::to_string(::getpid()));
        results.push_back(verify::timed([&] { return verify::determinism_check(dir); }));
        fs::remove_all(dir);
    }
    bool all = true;
    for (const auto& r : results) {
        all = all && r.pass;
        char secs[32];
        std::snprintf(secs, sizeof secs, "%.2f", r.seconds);
        summary("suite=" + r.name + " result=" + (r.pass ? "pass" : "FAIL") + " seconds=" + secs +
                " detail=\"" + r.detail + "\"");
        if (!r.pass) {
            std::cerr << "failing property: " << r.name << "\n";
        }
    }
    summary(std::string("verify=") + (all ? "pass" : "fail"));
    return all ? kOk : kVerifyFailed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hybrid-decoder semi-supervised segmentation toolkit"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset with a manifest");
    std::uint64_t seed = 0;
    std::size_t n = 500, val = 10, test = 50, classes = 2;
    double frac = 0.1;
    std::string size = "64x64";
    fs::path gen_out;
    gen->add_option("--seed", seed, "Dataset seed");
    gen->add_option("--n", n, "Number of training samples")->check(CLI::PositiveNumber);
    gen->add_option("--labeled-frac", frac, "Fraction of training samples that keep their mask");
    gen->add_option("--size", size, "Image size HxW");
    gen->add_option("--val", val, "Validation samples");
    gen->add_option("--test", test, "Test samples");
    gen->add_option("--classes", classes, "Label classes including background (2 or 3)");
    gen->add_option("--out", gen_out, "Output directory")->required();

    auto* tr = app.add_subcommand("train", "Train a model from a config and manifest");
    std::optional<fs::path> config;
    fs::path manifest, train_out;
    std::vector<std::string> overrides;
    bool quiet = false;
    tr->add_option("--config", config, "Config file (key = value lines)");
    tr->add_option("--data", manifest, "Dataset manifest")->required();
    tr->add_option("--out", train_out, "Output directory")->required();
    tr->add_option("--override", overrides, "key=value overrides, applied after the config file");
    tr->add_flag("--quiet", quiet, "No per-step progress on stderr");

    auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a split");
    fs::path ckpt, eval_manifest;
    std::string split = "test";
    std::optional<std::string> network;
    std::optional<fs::path> eval_out;
    ev->add_option("--checkpoint", ckpt, "Checkpoint file")->required();
    ev->add_option("--data", eval_manifest, "Dataset manifest")->required();
    ev->add_option("--split", split, "Split to evaluate")->check(CLI::IsMember({"train", "val", "test"}));
    ev->add_option("--network", network, "student_main, student_noisy or teacher (default: eval.network)");
    ev->add_option("--out", eval_out, "Also write the CSV here");

    auto* ver = app.add_subcommand("verify", "Run the property suites");
    std::string fault;
    bool with_training = false;
    std::size_t seeds = 20;
    ver->add_option("--inject-fault", fault, "Test fixture: cg-sign");
    ver->add_flag("--training", with_training, "Also run the determinism/resume check");
    ver->add_option("--gradient-seeds", seeds, "Seeds for the gradient suite")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kUsage;
    }

    try {
        if (*gen) return cmd_gen_data(seed, n, frac, size, val, test, classes, gen_out);
        if (*tr) return cmd_train(config, manifest, train_out, overrides, quiet);
        if (*ev) return cmd_eval(ckpt, eval_manifest, split, network, eval_out);
        if (*ver) return cmd_verify(fault, with_training, seeds);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const ContractError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return kIo;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return kIo;
    } catch (const FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return kIo;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kNumeric;
    }
    return kUsage;
}
