#pragma once

#include <atomic>
#include <span>
#include <vector>

#include "psattn/engine.hpp"

namespace psattn {

// One-shot termination flag: raised once by the compute/verify side when
// coverage clears the threshold, polled by the loader before it starts each
// prefetch. Never unset.
struct StopSignal {
    std::atomic<bool> flag{false};

    void raise() { flag.store(true, std::memory_order_release); }
    bool raised() const { return flag.load(std::memory_order_acquire); }
};

struct PipelineTimings {
    std::vector<double> load_ms;     // per microbatch actually loaded
    std::vector<double> compute_ms;  // per microbatch actually computed
    double total_wall_ms = 0.0;
    // Sum of all load and compute durations: what a strictly alternating
    // schedule would cost.
    double sequential_equiv_ms = 0.0;
    double overlap_efficiency = 1.0;  // sequential_equiv / total_wall
};

struct PipelineOptions {
    // Artificial per-microbatch compute padding; load cost comes from the
    // store's miss latency.
    double compute_pad_ms = 0.0;
};

struct ExecutionResult {
    PSAResult result;
    PipelineTimings timings;
};

// Strictly alternating load-then-compute execution; the baseline the
// pipelined executor is compared against.
ExecutionResult run_sequential(std::span<const float> q, std::span<const BlockId> block_ids,
                               const PSAConfig& cfg, TieredBlockStore& store,
                               const PipelineOptions& opts = {});

// Two-agent execution: a loader thread prefetches microbatch i+1 through a
// depth-1 hand-off slot while the caller thread computes microbatch i and
// checks coverage. Produces the same PSAResult as run_sequential; at most
// one loaded microbatch is ever discarded on early termination.
ExecutionResult run_pipelined(std::span<const float> q, std::span<const BlockId> block_ids,
                              const PSAConfig& cfg, TieredBlockStore& store,
                              const PipelineOptions& opts = {});

// Deterministic model of the two executors over given per-microbatch costs.
// Sequential: sum of all costs. Pipelined: depth-1 hand-off recurrence —
// the loader starts load i+1 only once compute has taken batch i, compute
// starts batch i when both the load is done and batch i-1 is finished.
struct PipelineModel {
    double sequential_ms = 0.0;
    double pipelined_ms = 0.0;
    double overlap_efficiency = 1.0;
};

PipelineModel simulate_pipeline(std::span<const double> load_ms,
                                std::span<const double> compute_ms);

}  // namespace psattn
