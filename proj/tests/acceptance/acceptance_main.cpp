// Acceptance runner: one PASS/FAIL line per criterion on stdout, exit status 1 if any fails.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "hdc/config.hpp"
#include "hdc/dataset.hpp"
#include "hdc/experiment.hpp"
#include "hdc/verify.hpp"

namespace fs = std::filesystem;
using namespace hdc;

namespace {

struct Line {
    int id;
    const char* title;
    double budget_seconds;  // 0: no runtime bound
};

constexpr Line kCriteria[] = {
    {1, "gradient correctness", 120},
    {2, "entropy oracle", 30},
    {3, "stop-gradient partition", 0},
    {4, "EMA contract", 0},
    {5, "metric oracles", 60},
    {6, "loss-term limits", 0},
    {7, "directional experiment", 45 * 60},
    {8, "determinism and resume", 0},
    {9, "overfit one batch", 180},
};

void report(const Line& c, verify::CheckResult r) {
    std::string budget;
    if (c.budget_seconds > 0 && r.seconds > c.budget_seconds) {
        r.pass = false;
        budget = " [over the " + std::to_string(int(c.budget_seconds)) + " s budget]";
    }
    std::printf("criterion %d %-24s %s  (%.1f s) %s%s\n", c.id, c.title, r.pass ? "PASS" : "FAIL", r.seconds,
                r.detail.c_str(), budget.c_str());
    std::fflush(stdout);
}

struct RunSummary {
    std::string row;
    std::uint64_t seed;
    double dsc, hd95;
};

verify::CheckResult directional(const ExperimentConfig& base, const fs::path& work, std::size_t seeds) {
    verify::CheckResult res{"directional", true, "", 0};
    std::vector<RunSummary> runs;
    std::ofstream table(work / "directional_results.csv");
    table << "seed,row,test_dsc,test_hd95,test_asd,seconds\n";
    std::size_t hdc_wins = 0, full_best = 0;
    std::ostringstream detail;
    for (std::uint64_t seed = 0; seed < seeds; ++seed) {
        data::GenerateOptions g;
        g.seed = 1000 + seed;
        g.n_total = 500;
        g.labeled_fraction = 0.1;
        g.height = 64;
        g.width = 64;
        const auto manifest = data::generate_dataset(g, work / ("data_" + std::to_string(seed)));

        ExperimentConfig cfg = base;
        cfg.train.seed = seed;
        std::vector<std::pair<std::string, ExperimentConfig>> rows = {{"sup-only", exp::sup_only(cfg)}};
        for (auto& r : exp::ablation_matrix(cfg)) rows.push_back(std::move(r));

        std::map<std::string, double> dsc;
        for (const auto& [name, rc] : rows) {
            const auto t0 = std::chrono::steady_clock::now();
            exp::RunOptions opt;
            opt.out_dir = work / ("seed" + std::to_string(seed) + "_" + name);
            const auto out = exp::run_experiment(rc, manifest, opt);
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            const auto& m = out.test->mean();
            dsc[name] = m.dsc;
            char line[160];
            std::snprintf(line, sizeof line, "%llu,%s,%.6f,%.6f,%.6f,%.1f\n", (unsigned long long)seed, name.c_str(),
                          m.dsc, m.hd95, m.asd, secs);
            table << line << std::flush;
            std::fprintf(stderr, "  seed %llu %-10s dsc %.4f hd95 %.3f (%.0f s)\n", (unsigned long long)seed,
                         name.c_str(), m.dsc, m.hd95, secs);
        }
        // The full HDC objective is the pix+cg+mi row.
        const double full = dsc["pix+cg+mi"];
        hdc_wins += full > dsc["sup-only"] ? 1 : 0;
        bool best = true;
        for (const char* r : {"pix", "pix+cg", "pix+mi"}) best = best && full > dsc[r];
        full_best += best ? 1 : 0;
        char buf[200];
        std::snprintf(buf, sizeof buf, "%sseed%llu: hdc %.4f sup %.4f pix %.4f pix+cg %.4f pix+mi %.4f",
                      seed ? "; " : "", (unsigned long long)seed, full, dsc["sup-only"], dsc["pix"], dsc["pix+cg"],
                      dsc["pix+mi"]);
        detail << buf;
    }
    res.pass = hdc_wins == seeds && full_best * 3 >= 2 * seeds;
    res.detail = "hdc>sup on " + std::to_string(hdc_wins) + "/" + std::to_string(seeds) + " seeds, full row best on " +
                 std::to_string(full_best) + "/" + std::to_string(seeds) + " (" + detail.str() + ")";
    return res;
}

std::set<int> parse_ids(const std::string& s) {
    std::set<int> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.insert(std::stoi(tok));
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria runner"};
    std::string ids = "1,2,3,4,5,6,7,8,9";
    fs::path work = fs::temp_directory_path() / "hdc_acceptance";
    std::optional<fs::path> experiment_config;
    std::size_t seeds = 3;
    app.add_option("--criteria", ids, "Comma-separated criterion numbers");
    app.add_option("--work", work, "Scratch directory");
    app.add_option("--experiment-config", experiment_config, "Config for the directional experiment");
    app.add_option("--seeds", seeds, "Seeds for the directional experiment");
    CLI11_PARSE(app, argc, argv);

    const auto want = parse_ids(ids);
    fs::create_directories(work);
    const verify::SuiteOptions opt;
    bool all = true;
    auto run = [&](int id, const std::function<verify::CheckResult()>& fn) {
        if (!want.contains(id)) return;
        verify::CheckResult r;
        try {
            r = verify::timed(fn);
        } catch (const std::exception& e) {
            r = {"error", false, std::string("exception: ") + e.what(), 0};
        }
        report(kCriteria[id - 1], r);
        all = all && r.pass && !(kCriteria[id - 1].budget_seconds > 0 && r.seconds > kCriteria[id - 1].budget_seconds);
    };

    run(1, [&] { return verify::gradient_suite(opt); });
    run(2, [&] { return verify::entropy_suite(opt); });
    run(3, [] { return verify::stop_gradient_suite(); });
    run(4, [] { return verify::ema_suite(); });
    run(5, [&] { return verify::metric_suite(opt); });
    run(6, [] { return verify::loss_limit_suite(); });
    run(7, [&] {
        const auto cfg = load_config(experiment_config);
        return directional(cfg, work, seeds);
    });
    run(8, [&] {
        const auto dir = work / "determinism";
        fs::remove_all(dir);
        return verify::determinism_check(dir);
    });
    run(9, [] { return verify::overfit_check(300, 0.05); });

    std::printf("acceptance %s\n", all ? "PASS" : "FAIL");
    return all ? 0 : 1;
}
