#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "psattn/engine.hpp"
#include "psattn/store.hpp"
#include "psattn/workload.hpp"

namespace psattn {

// Which attention method a serving run drives. Exact is PSA with epsilon
// pinned to 1 (processes everything); TopK uses a fixed block budget.
struct MethodSpec {
    enum class Kind { PSA, TopK, Exact };
    Kind kind = Kind::PSA;
    double epsilon = 0.95;  // PSA only
    std::size_t k = 0;      // TopK only

    static MethodSpec psa(double eps) { return {Kind::PSA, eps, 0}; }
    static MethodSpec topk(std::size_t k) { return {Kind::TopK, 0.0, k}; }
    static MethodSpec exact() { return {Kind::Exact, 1.0, 0}; }
};

// Simulated per-step cost model. TBT is simulated time — injected per-block
// costs driven by observed hit/miss counts — never wall clock, so reports
// are byte-reproducible.
struct ServingConfig {
    double miss_cost_ms = 1.0;     // fast-pool miss: slow-tier transfer
    double hit_cost_ms = 0.0;      // fast-pool hit
    double compute_cost_ms = 0.1;  // attention compute per block
    bool overlap = true;           // model loader/compute overlap per layer
};

// One attention call: (request, decode step, layer).
struct StepRecord {
    RequestId request_id = 0;
    std::int32_t step = 0;
    std::int32_t layer = 0;
    std::size_t blocks_processed = 0;
    std::size_t total_blocks = 0;
    double estimated_coverage = 0.0;
    std::optional<double> true_coverage;
};

struct ServingReport {
    std::vector<double> tbt_ms;  // every (request, step) sample, in simulation order
    std::vector<StepRecord> calls;
    std::vector<RequestId> admission_order;
    CacheStats store_stats;
    double sim_time_ms = 0.0;
    std::size_t completed_requests = 0;
    // Aggregated analytic pipeline model over all (step, layer) executions;
    // their ratio is the reported overlap efficiency.
    double model_sequential_ms = 0.0;
    double model_pipelined_ms = 0.0;
    // Number of capacity-invariant assertions performed (one per event).
    std::size_t capacity_checks = 0;

    double overlap_efficiency() const {
        return model_pipelined_ms > 0.0 ? model_sequential_ms / model_pipelined_ms : 1.0;
    }
};

// FCFS decode loop: admits queued requests while one microbatch per live
// (request, layer) fits in the fast pool, steps all live requests in
// lockstep (one token each), and releases a request's blocks when it
// finishes. Throws "unschedulable request" if any request can never fit
// even alone.
ServingReport run_serving(const std::vector<Request>& requests, const PSAConfig& engine_cfg,
                          const StoreOptions& store_opts, const ServingConfig& serving_cfg,
                          const MethodSpec& method);

// Nearest-rank percentile (p in [0, 100]) of an unsorted sample set.
double percentile(std::vector<double> samples, double p);

}  // namespace psattn
