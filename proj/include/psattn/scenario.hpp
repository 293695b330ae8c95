#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "psattn/engine.hpp"
#include "psattn/serving.hpp"
#include "psattn/store.hpp"
#include "psattn/workload.hpp"

namespace psattn {

// Raised for problems in configuration files or CLI arguments, as opposed
// to invariant/tolerance failures at runtime; the CLI maps the two classes
// to different exit codes.
struct ConfigError : Error {
    using Error::Error;
};

enum class ReportFormat { CSV, JSON, Both };

struct ScenarioConfig {
    std::string name;  // scenario file stem, used for output file names
    WorkloadSpec workload;
    PSAConfig engine;
    StoreOptions store;
    ServingConfig serving;
    std::vector<double> epsilons;    // PSA sweep
    std::vector<std::size_t> ks;     // top-k sweep
    bool include_exact = true;
    double target_coverage = 0.95;   // tradeoff target c
    std::string out_dir = "out";     // overridden by PSATTN_OUT_DIR
    ReportFormat format = ReportFormat::Both;
};

// Parses the flat `key = value` config with [section] headers. Unknown
// sections or keys are errors (they are always typos).
ScenarioConfig load_scenario(const std::string& path);

struct ReportRow {
    std::string method;  // "exact" | "psa" | "topk"
    double param = 0.0;  // epsilon for psa/exact, k for topk
    double mean_blocks = 0.0;
    double p99_blocks = 0.0;
    double kv_fraction = 0.0;
    double mean_coverage = 0.0;
    double min_coverage = 0.0;
    double hit_ratio = 0.0;
    double tbt_p50_ms = 0.0;
    double tbt_p99_ms = 0.0;
    double overlap_eff = 0.0;
};

struct ComparisonReport {
    std::string scenario;
    std::uint64_t seed = 0;
    std::vector<ReportRow> rows;
};

// Runs the full method comparison (exact, PSA sweep, top-k sweep), one
// serving simulation per row over the same generated workload.
ComparisonReport run_scenario(const ScenarioConfig& cfg);

std::string comparison_csv(const ComparisonReport& report);
std::string comparison_json(const ComparisonReport& report);

struct TradeoffReport {
    std::string scenario;
    double target_coverage = 0.0;
    std::size_t n_queries = 0;
    std::size_t max_blocks = 0;
    // Smallest uniform k whose worst-query true coverage reaches the target.
    std::size_t k_min = 0;
    double worst_coverage_at_kmin = 0.0;
    double worst_coverage_below_kmin = 0.0;  // at k_min - 1; must violate the target
    double psa_mean_blocks = 0.0;
    double psa_p99_blocks = 0.0;
    double psa_mean_coverage = 0.0;
    double block_access_ratio = 0.0;  // k_min / psa_mean_blocks
};

TradeoffReport run_tradeoff(const ScenarioConfig& cfg);

std::string tradeoff_json(const TradeoffReport& report);

// CLI entry points; return process exit codes (0 ok, 1 config error,
// 2 invariant/tolerance failure).
int cmd_run(const std::string& cfg_path);
int cmd_tradeoff(const std::string& cfg_path);

// Shortest round-trip decimal representation; deterministic for a given
// binary, used for all numbers in CSV output.
std::string format_double(double v);

}  // namespace psattn
