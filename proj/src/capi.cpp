#include "psattn.h"

#include <cstring>
#include <memory>
#include <span>
#include <string>

#include "psattn/engine.hpp"
#include "psattn/equivalence.hpp"
#include "psattn/scenario.hpp"
#include "psattn/store.hpp"

namespace {

thread_local std::string g_last_error;

void set_error(const char* msg) { g_last_error = msg; }

// Runs a callable, translating exceptions into status codes.
template <typename F>
int guarded(F&& fn) {
    try {
        return fn();
    } catch (const psattn::NotFoundError& err) {
        set_error(err.what());
        return PSATTN_ERR_NOT_FOUND;
    } catch (const psattn::ConfigError& err) {
        set_error(err.what());
        return PSATTN_ERR_INVALID_ARGUMENT;
    } catch (const std::exception& err) {
        set_error(err.what());
        return PSATTN_ERR_RUNTIME;
    } catch (...) {
        set_error("unknown error");
        return PSATTN_ERR_RUNTIME;
    }
}

int require(bool ok, const char* msg) {
    if (!ok) {
        set_error(msg);
        return PSATTN_ERR_INVALID_ARGUMENT;
    }
    return PSATTN_OK;
}

psattn::PSAConfig to_cpp(const psattn_config& c) {
    psattn::PSAConfig cfg;
    cfg.epsilon = c.epsilon;
    cfg.microbatch_size = c.microbatch_size;
    cfg.block_size = c.block_size;
    switch (c.estimator) {
        case PSATTN_EST_MEAN: cfg.estimator = psattn::Estimator::Mean; break;
        case PSATTN_EST_CUBOID_UPPER: cfg.estimator = psattn::Estimator::CuboidUpperBound; break;
        case PSATTN_EST_CUBOID_MEAN: cfg.estimator = psattn::Estimator::CuboidMean; break;
        default: throw psattn::ConfigError("config: unknown estimator code");
    }
    switch (c.ranking_mode) {
        case PSATTN_RANK_ESTIMATED: cfg.ranking_mode = psattn::RankingMode::Estimated; break;
        case PSATTN_RANK_ORACLE: cfg.ranking_mode = psattn::RankingMode::Oracle; break;
        default: throw psattn::ConfigError("config: unknown ranking mode code");
    }
    cfg.audit_coverage = c.audit_coverage != 0;
    cfg.scale_override = c.scale_override;
    try {
        cfg.validate();
    } catch (const psattn::Error& err) {
        throw psattn::ConfigError(err.what());
    }
    return cfg;
}

void fill_stats(const psattn::PSAResult& res, psattn_run_stats* out) {
    if (out == nullptr) return;
    out->blocks_processed = res.blocks_processed;
    out->total_blocks = res.total_blocks;
    out->estimated_coverage = res.estimated_coverage;
    out->true_coverage = res.true_coverage.value_or(-1.0);
    out->terminated_early = res.terminated_early ? 1 : 0;
}

}  // namespace

struct psattn_store {
    psattn::TieredBlockStore impl;
    explicit psattn_store(const psattn::StoreOptions& opts) : impl(opts) {}
};

extern "C" {

const char* psattn_last_error(void) { return g_last_error.c_str(); }

const char* psattn_version(void) { return "1.0.0"; }

void psattn_store_options_default(psattn_store_options* options) {
    if (options == nullptr) return;
    options->fast_capacity_slots = 256;
    options->n_layers = 1;
    options->pool_policy = PSATTN_POOL_UNIFIED;
    options->eviction_policy = PSATTN_EVICT_LRU;
    options->miss_latency_ms = 0.0;
}

int psattn_store_create(const psattn_store_options* options, psattn_store** out_store) {
    if (int rc = require(options != nullptr && out_store != nullptr,
                         "psattn_store_create: null argument"))
        return rc;
    return guarded([&] {
        if (options->fast_capacity_slots < 0)
            throw psattn::ConfigError("store options: fast_capacity_slots must be >= 0");
        psattn::StoreOptions opts;
        opts.fast_capacity_slots = static_cast<std::size_t>(options->fast_capacity_slots);
        opts.n_layers = options->n_layers;
        switch (options->pool_policy) {
            case PSATTN_POOL_UNIFIED: opts.policy = psattn::PoolPolicy::Unified; break;
            case PSATTN_POOL_LAYER_PARTITIONED:
                opts.policy = psattn::PoolPolicy::LayerPartitioned;
                break;
            default: throw psattn::ConfigError("store options: unknown pool policy code");
        }
        switch (options->eviction_policy) {
            case PSATTN_EVICT_LRU: opts.eviction = psattn::EvictionPolicy::LRU; break;
            case PSATTN_EVICT_FIFO: opts.eviction = psattn::EvictionPolicy::FIFO; break;
            default: throw psattn::ConfigError("store options: unknown eviction policy code");
        }
        opts.miss_sleep_ms = options->miss_latency_ms;
        *out_store = new psattn_store(opts);
        return PSATTN_OK;
    });
}

void psattn_store_destroy(psattn_store* store) { delete store; }

int psattn_store_put_block(psattn_store* store, int64_t block_id, int32_t layer_id,
                           int64_t owner_request, int32_t n_tokens, int32_t dim,
                           const float* keys, const float* values) {
    if (int rc = require(store != nullptr && keys != nullptr && values != nullptr,
                         "psattn_store_put_block: null argument"))
        return rc;
    if (int rc = require(n_tokens > 0 && dim > 0,
                         "psattn_store_put_block: n_tokens and dim must be positive"))
        return rc;
    return guarded([&] {
        auto block = std::make_shared<psattn::KVBlock>();
        block->block_id = block_id;
        block->layer_id = layer_id;
        block->n_tokens = n_tokens;
        block->dim = dim;
        const std::size_t n =
            static_cast<std::size_t>(n_tokens) * static_cast<std::size_t>(dim);
        block->keys.assign(keys, keys + n);
        block->values.assign(values, values + n);
        store->impl.put_block(std::move(block), owner_request);
        return PSATTN_OK;
    });
}

int psattn_store_release_request(psattn_store* store, int64_t request_id) {
    if (int rc = require(store != nullptr, "psattn_store_release_request: null store"))
        return rc;
    return guarded([&] {
        store->impl.release_request(request_id);
        return PSATTN_OK;
    });
}

int psattn_store_contains(psattn_store* store, int64_t block_id, int* out_resident_fast) {
    if (int rc = require(store != nullptr && out_resident_fast != nullptr,
                         "psattn_store_contains: null argument"))
        return rc;
    return guarded([&] {
        if (!store->impl.contains(block_id))
            throw psattn::NotFoundError("psattn_store_contains: unknown block id " +
                                        std::to_string(block_id));
        *out_resident_fast = store->impl.resident_fast(block_id) ? 1 : 0;
        return PSATTN_OK;
    });
}

int psattn_store_stats(psattn_store* store, psattn_cache_stats* out_stats) {
    if (int rc = require(store != nullptr && out_stats != nullptr,
                         "psattn_store_stats: null argument"))
        return rc;
    return guarded([&] {
        const psattn::CacheStats stats = store->impl.stats();
        out_stats->hits = stats.hits;
        out_stats->misses = stats.misses;
        out_stats->evictions = stats.evictions;
        out_stats->bytes_transferred = stats.bytes_transferred;
        return PSATTN_OK;
    });
}

void psattn_config_default(psattn_config* cfg) {
    if (cfg == nullptr) return;
    cfg->epsilon = 0.95;
    cfg->microbatch_size = 1;
    cfg->block_size = 32;
    cfg->estimator = PSATTN_EST_CUBOID_MEAN;
    cfg->ranking_mode = PSATTN_RANK_ESTIMATED;
    cfg->audit_coverage = 0;
    cfg->scale_override = 0.0;
}

int psattn_run_query(psattn_store* store, const float* q, int32_t dim,
                     const int64_t* block_ids, size_t n_blocks, const psattn_config* cfg,
                     float* out, psattn_run_stats* out_stats) {
    if (int rc = require(store != nullptr && q != nullptr && block_ids != nullptr &&
                             out != nullptr && dim > 0 && n_blocks > 0,
                         "psattn_run_query: null or empty argument"))
        return rc;
    return guarded([&] {
        psattn_config defaults;
        psattn_config_default(&defaults);
        const psattn::PSAConfig config = to_cpp(cfg != nullptr ? *cfg : defaults);
        const auto res = psattn::psa_attention(
            std::span<const float>(q, static_cast<std::size_t>(dim)),
            std::span<const psattn::BlockId>(block_ids, n_blocks), config, store->impl);
        std::memcpy(out, res.output.data(), res.output.size() * sizeof(float));
        fill_stats(res, out_stats);
        return PSATTN_OK;
    });
}

int psattn_run_topk(psattn_store* store, const float* q, int32_t dim,
                    const int64_t* block_ids, size_t n_blocks, size_t k,
                    const psattn_config* cfg, float* out, psattn_run_stats* out_stats) {
    if (int rc = require(store != nullptr && q != nullptr && block_ids != nullptr &&
                             out != nullptr && dim > 0 && n_blocks > 0 && k > 0,
                         "psattn_run_topk: null or empty argument"))
        return rc;
    return guarded([&] {
        psattn_config defaults;
        psattn_config_default(&defaults);
        const psattn::PSAConfig config = to_cpp(cfg != nullptr ? *cfg : defaults);
        const auto res = psattn::topk_attention(
            std::span<const float>(q, static_cast<std::size_t>(dim)),
            std::span<const psattn::BlockId>(block_ids, n_blocks), k, config, store->impl);
        std::memcpy(out, res.output.data(), res.output.size() * sizeof(float));
        fill_stats(res, out_stats);
        return PSATTN_OK;
    });
}

int psattn_cmd_run(const char* config_path) {
    if (config_path == nullptr) {
        set_error("psattn_cmd_run: null config path");
        return 1;
    }
    return psattn::cmd_run(config_path);
}

int psattn_cmd_tradeoff(const char* config_path) {
    if (config_path == nullptr) {
        set_error("psattn_cmd_tradeoff: null config path");
        return 1;
    }
    return psattn::cmd_tradeoff(config_path);
}

int psattn_cmd_equivalence(const psattn_equivalence_options* opts) {
    psattn::EquivalenceOptions eo;
    if (opts != nullptr) {
        if (opts->dim > 0) eo.dim = static_cast<std::size_t>(opts->dim);
        if (opts->n_blocks > 0) eo.n_blocks = static_cast<std::size_t>(opts->n_blocks);
        if (opts->seed != 0) eo.seed = opts->seed;
        eo.inject_error = opts->inject_error != 0;
    }
    return psattn::cmd_equivalence(eo);
}

}  // extern "C"
