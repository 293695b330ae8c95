#include "psattn/engine.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace psattn {

namespace {

// log(exp(a) + exp(b)) without leaving the log domain.
double log_add_exp(double a, double b) {
    if (a == -std::numeric_limits<double>::infinity()) return b;
    if (b == -std::numeric_limits<double>::infinity()) return a;
    const double hi = std::max(a, b);
    const double lo = std::min(a, b);
    return hi + std::log1p(std::exp(lo - hi));
}

double log_sum_exp(std::span<const double> xs, std::size_t count) {
    double acc = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < count; ++i) acc = log_add_exp(acc, xs[i]);
    return acc;
}

}  // namespace

void PSAConfig::validate() const {
    if (!(epsilon > 0.0) || epsilon > 1.0)
        throw Error("config: epsilon must be in (0, 1], got " + std::to_string(epsilon));
    if (microbatch_size < 1)
        throw Error("config: microbatch_size must be >= 1, got " +
                    std::to_string(microbatch_size));
    if (block_size < 1)
        throw Error("config: block_size must be >= 1, got " + std::to_string(block_size));
}

void CoverageEstimator::observe(double log_as) {
    log_as_acc = log_add_exp(log_as_acc, log_as);
    log_as_min = std::min(log_as_min, log_as);
    if (n_left == 0) throw Error("coverage estimator: observed more blocks than planned");
    --n_left;
}

double estimate_coverage(const CoverageEstimator& ce) {
    if (!ce.any_processed())
        throw Error("estimate_coverage: no blocks processed yet");
    if (ce.n_left == 0) return 1.0;
    // AS_acc / (AS_acc + AS_min * N_left) == 1 / (1 + N_left * exp(log AS_min - log AS_acc)).
    // The exp saturates to inf (estimate 0) when the bound dwarfs the
    // accumulated mass, which is the conservative direction.
    const double ratio =
        static_cast<double>(ce.n_left) * std::exp(ce.log_as_min - ce.log_as_acc);
    return 1.0 / (1.0 + ratio);
}

RankedPlan plan_blocks(std::span<const float> q, std::span<const BlockId> block_ids,
                       const PSAConfig& cfg, const TieredBlockStore& store) {
    cfg.validate();
    if (block_ids.empty()) throw Error("plan_blocks: no blocks given");
    RankedPlan plan;
    plan.scale = cfg.scale_for(q.size());

    const bool want_oracle = cfg.ranking_mode == RankingMode::Oracle || cfg.audit_coverage;
    std::vector<double> oracle_by_input;
    if (want_oracle) {
        oracle_by_input.reserve(block_ids.size());
        for (BlockId id : block_ids) {
            auto block = store.peek_block(id);
            oracle_by_input.push_back(block_log_as_oracle(q, *block, plan.scale));
        }
    }

    std::vector<std::size_t> order;
    if (cfg.ranking_mode == RankingMode::Oracle) {
        order = rank_by_scores(oracle_by_input, block_ids);
    } else {
        const std::vector<BlockMetadata> metas = store.metadata_for(block_ids);
        order = rank_blocks(q, metas, cfg.estimator, plan.scale);
    }

    plan.ranked_ids.reserve(block_ids.size());
    for (std::size_t idx : order) plan.ranked_ids.push_back(block_ids[idx]);
    if (want_oracle) {
        plan.oracle_log_as.reserve(block_ids.size());
        for (std::size_t idx : order) plan.oracle_log_as.push_back(oracle_by_input[idx]);
        plan.total_log_as = log_sum_exp(plan.oracle_log_as, plan.oracle_log_as.size());
    }
    return plan;
}

ProgressiveRun::ProgressiveRun(std::span<const float> q, const RankedPlan& plan,
                               const PSAConfig& cfg)
    : q_(q), plan_(&plan), cfg_(&cfg) {
    estimator_.n_left = plan.ranked_ids.size();
}

std::size_t ProgressiveRun::next_microbatch_size() const {
    if (finished()) return 0;
    const std::size_t remaining = plan_->ranked_ids.size() - cursor_;
    return std::min(remaining, static_cast<std::size_t>(cfg_->microbatch_size));
}

double ProgressiveRun::consume(std::span<const std::shared_ptr<const KVBlock>> microbatch,
                               std::uint64_t hits, std::uint64_t misses) {
    if (microbatch.empty()) throw Error("progressive run: empty microbatch");
    if (cursor_ + microbatch.size() > plan_->ranked_ids.size())
        throw Error("progressive run: more blocks fed than planned");
    for (const auto& block : microbatch) {
        if (block->block_id != plan_->ranked_ids[cursor_])
            throw Error("progressive run: block fed out of rank order");
        ScoredBlockResult part =
            block_partial_attention(q_, *block, static_cast<float>(plan_->scale));
        merge_partial(acc_, part);
        // In oracle ranking mode the termination decision uses the oracle
        // masses themselves, so the guarantee test is not at the mercy of
        // float rounding in the compute path.
        const double log_as = plan_->has_oracle() ? plan_->oracle_log_as[cursor_]
                                                  : static_cast<double>(part.log_as);
        estimator_.observe(log_as);
        ++cursor_;
    }
    last_estimate_ = estimate_coverage(estimator_);
    iterations_.push_back({microbatch.size(), hits, misses, last_estimate_});
    if (last_estimate_ > cfg_->epsilon) stop_ = true;
    return last_estimate_;
}

PSAResult ProgressiveRun::result() const {
    if (cursor_ == 0) throw Error("progressive run: no blocks processed");
    PSAResult res;
    res.output = finalize(acc_);
    res.blocks_processed = cursor_;
    res.total_blocks = plan_->ranked_ids.size();
    res.estimated_coverage = last_estimate_;
    res.terminated_early = cursor_ < plan_->ranked_ids.size();
    res.processed_ids.assign(plan_->ranked_ids.begin(),
                             plan_->ranked_ids.begin() + static_cast<std::ptrdiff_t>(cursor_));
    res.iterations = iterations_;
    if (cfg_->audit_coverage) {
        if (!plan_->has_oracle())
            throw Error("progressive run: audit requested without oracle plan data");
        res.true_coverage =
            std::exp(log_sum_exp(plan_->oracle_log_as, cursor_) - plan_->total_log_as);
    }
    return res;
}

LoadedBatch load_microbatch(TieredBlockStore& store, const RankedPlan& plan,
                            std::size_t cursor, std::size_t count) {
    LoadedBatch out;
    out.blocks.reserve(count);
    const CacheStats before = store.stats();
    for (std::size_t i = 0; i < count; ++i)
        out.blocks.push_back(store.load_block(plan.ranked_ids[cursor + i]));
    const CacheStats after = store.stats();
    out.hits = after.hits - before.hits;
    out.misses = after.misses - before.misses;
    return out;
}

PSAResult psa_attention(std::span<const float> q, std::span<const BlockId> block_ids,
                        const PSAConfig& cfg, TieredBlockStore& store) {
    const RankedPlan plan = plan_blocks(q, block_ids, cfg, store);
    ProgressiveRun run(q, plan, cfg);
    while (!run.finished()) {
        LoadedBatch batch = load_microbatch(store, plan, run.cursor(), run.next_microbatch_size());
        run.consume(batch.blocks, batch.hits, batch.misses);
    }
    return run.result();
}

BatchResult psa_attention_batched(std::span<const HeadVector> queries,
                                  std::span<const std::vector<BlockId>> per_query_blocks,
                                  const PSAConfig& cfg, TieredBlockStore& store) {
    if (queries.size() != per_query_blocks.size())
        throw Error("batched attention: query/block list count mismatch");
    if (queries.empty()) throw Error("batched attention: empty batch");

    std::vector<RankedPlan> plans;
    std::vector<ProgressiveRun> runs;
    plans.reserve(queries.size());
    runs.reserve(queries.size());
    for (std::size_t i = 0; i < queries.size(); ++i)
        plans.push_back(plan_blocks(queries[i], per_query_blocks[i], cfg, store));
    for (std::size_t i = 0; i < queries.size(); ++i)
        runs.emplace_back(queries[i], plans[i], cfg);

    BatchResult out;
    bool any_live = true;
    while (any_live) {
        any_live = false;
        IterationStats round;
        for (std::size_t i = 0; i < runs.size(); ++i) {
            if (runs[i].finished()) continue;
            LoadedBatch batch = load_microbatch(store, plans[i], runs[i].cursor(),
                                                runs[i].next_microbatch_size());
            round.estimated_coverage = runs[i].consume(batch.blocks, batch.hits, batch.misses);
            round.blocks += batch.blocks.size();
            round.hits += batch.hits;
            round.misses += batch.misses;
            if (!runs[i].finished()) any_live = true;
        }
        if (round.blocks > 0) out.rounds.push_back(round);
    }
    out.results.reserve(runs.size());
    for (const auto& run : runs) out.results.push_back(run.result());
    return out;
}

PSAResult topk_attention(std::span<const float> q, std::span<const BlockId> block_ids,
                         std::size_t k, const PSAConfig& cfg, TieredBlockStore& store) {
    const RankedPlan plan = plan_blocks(q, block_ids, cfg, store);
    if (k == 0) throw Error("topk_attention: k must be >= 1");
    const std::size_t take = std::min(k, plan.ranked_ids.size());

    // Same compute path as the progressive run, with the budget replacing
    // the coverage threshold as the stop rule.
    PSAConfig fixed = cfg;
    fixed.epsilon = 1.0;  // never stop on coverage
    ProgressiveRun run(q, plan, fixed);
    while (run.cursor() < take) {
        const std::size_t count =
            std::min(run.next_microbatch_size(), take - run.cursor());
        LoadedBatch batch = load_microbatch(store, plan, run.cursor(), count);
        run.consume(batch.blocks, batch.hits, batch.misses);
    }
    PSAResult res = run.result();
    res.terminated_early = take < plan.ranked_ids.size();
    return res;
}

PSAResult topk_attention(std::span<const float> q, std::span<const BlockId> block_ids,
                         std::size_t k, Estimator estimator, TieredBlockStore& store) {
    PSAConfig cfg;
    cfg.estimator = estimator;
    return topk_attention(q, block_ids, k, cfg, store);
}

MultiHeadResult psa_attention_multi_head(std::span<const HeadVector> head_queries,
                                         std::span<const std::vector<BlockId>> kv_head_blocks,
                                         const PSAConfig& cfg, TieredBlockStore& store) {
    if (head_queries.empty()) throw Error("multi-head attention: no query heads");
    if (kv_head_blocks.empty()) throw Error("multi-head attention: no kv heads");
    if (head_queries.size() % kv_head_blocks.size() != 0)
        throw Error("multi-head attention: query head count must be a multiple of kv head count");
    const std::size_t group = head_queries.size() / kv_head_blocks.size();

    MultiHeadResult out;
    out.per_head.reserve(head_queries.size());
    for (std::size_t h = 0; h < head_queries.size(); ++h) {
        const auto& ids = kv_head_blocks[h / group];
        out.per_head.push_back(psa_attention(head_queries[h], ids, cfg, store));
        for (BlockId id : out.per_head.back().processed_ids) out.fetched_union.push_back(id);
    }
    std::sort(out.fetched_union.begin(), out.fetched_union.end());
    out.fetched_union.erase(std::unique(out.fetched_union.begin(), out.fetched_union.end()),
                            out.fetched_union.end());
    return out;
}

}  // namespace psattn
