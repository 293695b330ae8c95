#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "psattn/attention.hpp"
#include "psattn/metadata.hpp"
#include "psattn/store.hpp"
#include "psattn/types.hpp"

namespace psattn {

// Estimated ranks blocks by metadata criticality (the production path).
// Oracle ranks by true per-block softmax mass computed in double precision
// from the backing tier; it exists so the coverage guarantee can be tested
// independently of estimator quality.
enum class RankingMode { Estimated, Oracle };

struct PSAConfig {
    double epsilon = 0.95;          // accumulated attention weight threshold
    std::int32_t microbatch_size = 1;
    std::int32_t block_size = 32;   // tokens per block (reporting/workload granule)
    Estimator estimator = Estimator::CuboidMean;
    RankingMode ranking_mode = RankingMode::Estimated;
    // Fill PSAResult::true_coverage from the double-precision oracle.
    bool audit_coverage = false;
    // <= 0 selects 1/sqrt(d).
    double scale_override = 0.0;

    void validate() const;

    double scale_for(std::size_t dim) const {
        return scale_override > 0.0 ? scale_override : default_scale(dim);
    }
};

// Running coverage bookkeeping in the log domain: the accumulated block mass,
// the smallest per-block mass seen so far (the bound on every unprocessed
// block), and how many blocks remain.
struct CoverageEstimator {
    double log_as_acc = -std::numeric_limits<double>::infinity();
    double log_as_min = std::numeric_limits<double>::infinity();
    std::size_t n_left = 0;

    void observe(double log_as);
    bool any_processed() const { return log_as_acc != -std::numeric_limits<double>::infinity(); }
};

// Estimated fraction of total attention weight already accumulated:
// AS_acc / (AS_acc + AS_min * N_left), evaluated in the log domain.
double estimate_coverage(const CoverageEstimator& ce);

struct IterationStats {
    std::size_t blocks = 0;
    std::uint64_t hits = 0;
    std::uint64_t misses = 0;
    double estimated_coverage = 0.0;
};

struct PSAResult {
    HeadVector output;
    std::size_t blocks_processed = 0;
    std::size_t total_blocks = 0;
    double estimated_coverage = 1.0;
    std::optional<double> true_coverage;
    bool terminated_early = false;
    std::vector<BlockId> processed_ids;
    std::vector<IterationStats> iterations;
};

// Processing order for one query plus the oracle block masses when the
// ranking mode or a coverage audit needs them (aligned with ranked_ids).
struct RankedPlan {
    std::vector<BlockId> ranked_ids;
    std::vector<double> oracle_log_as;
    double total_log_as = -std::numeric_limits<double>::infinity();
    double scale = 0.0;

    bool has_oracle() const { return !oracle_log_as.empty(); }
};

RankedPlan plan_blocks(std::span<const float> q, std::span<const BlockId> block_ids,
                       const PSAConfig& cfg, const TieredBlockStore& store);

// Compute-side state of one progressive run: merges block partials in ranked
// order, updates the coverage estimate at each microbatch boundary, and
// decides termination. Loading is the caller's job, which is what lets the
// sequential and pipelined executors share this path bit for bit.
class ProgressiveRun {
public:
    ProgressiveRun(std::span<const float> q, const RankedPlan& plan, const PSAConfig& cfg);

    // Consumes the next microbatch of loaded blocks (in ranked order) and
    // returns the updated coverage estimate. hits/misses annotate the
    // iteration record.
    double consume(std::span<const std::shared_ptr<const KVBlock>> microbatch,
                   std::uint64_t hits, std::uint64_t misses);

    bool finished() const { return stop_ || cursor_ == plan_->ranked_ids.size(); }
    std::size_t cursor() const { return cursor_; }
    std::size_t next_microbatch_size() const;

    PSAResult result() const;

private:
    std::span<const float> q_;
    const RankedPlan* plan_;
    const PSAConfig* cfg_;
    SoftmaxAccumulator acc_;
    CoverageEstimator estimator_;
    std::vector<IterationStats> iterations_;
    std::size_t cursor_ = 0;
    double last_estimate_ = 0.0;
    bool stop_ = false;
};

// One loaded microbatch plus the store hit/miss delta its loads caused.
// Exact attribution assumes the loading agent is the store's only client
// for the duration, which holds for every executor in this library.
struct LoadedBatch {
    std::vector<std::shared_ptr<const KVBlock>> blocks;
    std::uint64_t hits = 0;
    std::uint64_t misses = 0;
};

LoadedBatch load_microbatch(TieredBlockStore& store, const RankedPlan& plan,
                            std::size_t cursor, std::size_t count);

// Single-query progressive attention: rank, then process microbatches in
// rank order until the estimated coverage exceeds epsilon or blocks run out.
PSAResult psa_attention(std::span<const float> q, std::span<const BlockId> block_ids,
                        const PSAConfig& cfg, TieredBlockStore& store);

struct BatchResult {
    std::vector<PSAResult> results;
    // One entry per lockstep round, aggregated over the queries still live
    // in that round.
    std::vector<IterationStats> rounds;
};

// Lockstep batched variant: each round advances every live query by one
// microbatch; queries whose coverage exceeds epsilon drop out. Outputs are
// identical to per-query psa_attention runs.
BatchResult psa_attention_batched(std::span<const HeadVector> queries,
                                  std::span<const std::vector<BlockId>> per_query_blocks,
                                  const PSAConfig& cfg, TieredBlockStore& store);

// Top-k baseline: processes exactly the k highest-criticality blocks
// (clamped to the block count) under the same ranking and tie rules.
PSAResult topk_attention(std::span<const float> q, std::span<const BlockId> block_ids,
                         std::size_t k, const PSAConfig& cfg, TieredBlockStore& store);

PSAResult topk_attention(std::span<const float> q, std::span<const BlockId> block_ids,
                         std::size_t k, Estimator estimator, TieredBlockStore& store);

struct MultiHeadResult {
    std::vector<PSAResult> per_head;
    std::vector<BlockId> fetched_union;
};

// Runs one independent progressive instance per query head; query head h
// reads the KV head h / (n_query_heads / n_kv_heads), so grouped-query
// layouts share block lists across a head group.
MultiHeadResult psa_attention_multi_head(std::span<const HeadVector> head_queries,
                                         std::span<const std::vector<BlockId>> kv_head_blocks,
                                         const PSAConfig& cfg, TieredBlockStore& store);

}  // namespace psattn
