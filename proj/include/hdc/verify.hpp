#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace hdc::verify {

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
};

struct SuiteOptions {
    std::size_t gradient_seeds = 20;
    std::size_t entropy_matrices = 100;
    std::size_t metric_pairs = 1000;
    // Mutation fixture: negate the correlation-loss gradient inside the checked graph.
    bool inject_cg_sign_error = false;
};

// Central differences (step 1e-5, double precision) of every loss term through the full model on
// 4 x 3 x 16 x 16 inputs; max relative error below 1e-4.
CheckResult gradient_suite(const SuiteOptions& opt = {});
// Order-2 closed form against the eigen path, entropy bounds, PSD Hadamard products.
CheckResult entropy_suite(const SuiteOptions& opt = {});
// Mutual-information gradient never reaches the main decoder; no loss reaches the teacher.
CheckResult stop_gradient_suite();
// Teacher update on scalar fixtures against hand-computed values.
CheckResult ema_suite();
// Metric fixtures plus symmetry and ordering properties on random mask pairs.
CheckResult metric_suite(const SuiteOptions& opt = {});
// Limits of the correlation, mutual-information and pixel losses.
CheckResult loss_limit_suite();

// All of the above, in that order.
std::vector<CheckResult> run_property_suites(const SuiteOptions& opt = {});

// Two identical runs give bitwise-identical logs; 50 steps + checkpoint + 50 steps equals 100.
// Uses a small dataset generated under `work_dir`.
CheckResult determinism_check(const std::filesystem::path& work_dir);

// Supervised loss on one fixed labeled batch drops below `threshold` within `steps` steps
// (default configuration with learning rate 1e-3).
CheckResult overfit_check(std::size_t steps = 300, double threshold = 0.05);

// Times `fn` and fills CheckResult::seconds.
CheckResult timed(const std::function<CheckResult()>& fn);

}  // namespace hdc::verify
