/* C API for the progressive sparse attention library.
 *
 * All functions return a status code; on failure, psattn_last_error() gives
 * a thread-local human-readable message. Handles are opaque and must be
 * destroyed with their matching destroy function.
 */
#ifndef PSATTN_H
#define PSATTN_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes. */
#define PSATTN_OK 0
#define PSATTN_ERR_INVALID_ARGUMENT 1 /* null pointers, bad config values */
#define PSATTN_ERR_NOT_FOUND 2        /* unknown block or request id */
#define PSATTN_ERR_RUNTIME 3          /* contract violation at runtime */

/* Message for the most recent failure on this thread; never NULL. */
const char* psattn_last_error(void);

const char* psattn_version(void);

/* ---- Two-tier block store ---- */

typedef struct psattn_store psattn_store;

enum { PSATTN_POOL_UNIFIED = 0, PSATTN_POOL_LAYER_PARTITIONED = 1 };
enum { PSATTN_EVICT_LRU = 0, PSATTN_EVICT_FIFO = 1 };

typedef struct {
    int32_t fast_capacity_slots; /* fast-tier slots (blocks) */
    int32_t n_layers;            /* >= 1 */
    int32_t pool_policy;         /* PSATTN_POOL_* */
    int32_t eviction_policy;     /* PSATTN_EVICT_* */
    double miss_latency_ms;      /* injected sleep per fast-pool miss */
} psattn_store_options;

void psattn_store_options_default(psattn_store_options* options);

int psattn_store_create(const psattn_store_options* options, psattn_store** out_store);
void psattn_store_destroy(psattn_store* store);

/* Copies n_tokens*dim floats from keys and values. The block id must be
 * unused; owner_request groups blocks for psattn_store_release_request. */
int psattn_store_put_block(psattn_store* store, int64_t block_id, int32_t layer_id,
                           int64_t owner_request, int32_t n_tokens, int32_t dim,
                           const float* keys, const float* values);

/* Removes every block owned by the request from both tiers. */
int psattn_store_release_request(psattn_store* store, int64_t request_id);

/* *out_resident_fast: 1 if currently in the fast pool, else 0. Unknown ids
 * fail with PSATTN_ERR_NOT_FOUND. */
int psattn_store_contains(psattn_store* store, int64_t block_id, int* out_resident_fast);

typedef struct {
    uint64_t hits;
    uint64_t misses;
    uint64_t evictions;
    uint64_t bytes_transferred;
} psattn_cache_stats;

int psattn_store_stats(psattn_store* store, psattn_cache_stats* out_stats);

/* ---- Progressive attention engine ---- */

enum { PSATTN_EST_MEAN = 0, PSATTN_EST_CUBOID_UPPER = 1, PSATTN_EST_CUBOID_MEAN = 2 };
enum { PSATTN_RANK_ESTIMATED = 0, PSATTN_RANK_ORACLE = 1 };

typedef struct {
    double epsilon;        /* coverage threshold in (0, 1] */
    int32_t microbatch_size;
    int32_t block_size;
    int32_t estimator;     /* PSATTN_EST_* */
    int32_t ranking_mode;  /* PSATTN_RANK_* */
    int32_t audit_coverage; /* nonzero: fill true_coverage via double oracle */
    double scale_override; /* <= 0 selects 1/sqrt(dim) */
} psattn_config;

void psattn_config_default(psattn_config* cfg);

typedef struct {
    uint64_t blocks_processed;
    uint64_t total_blocks;
    double estimated_coverage;
    double true_coverage; /* -1 unless audit_coverage was set */
    int32_t terminated_early;
} psattn_run_stats;

/* Runs single-query progressive attention over the given blocks; writes dim
 * floats to out. out_stats may be NULL. */
int psattn_run_query(psattn_store* store, const float* q, int32_t dim,
                     const int64_t* block_ids, size_t n_blocks, const psattn_config* cfg,
                     float* out, psattn_run_stats* out_stats);

/* Top-k baseline: processes exactly min(k, n_blocks) highest-criticality
 * blocks. */
int psattn_run_topk(psattn_store* store, const float* q, int32_t dim,
                    const int64_t* block_ids, size_t n_blocks, size_t k,
                    const psattn_config* cfg, float* out, psattn_run_stats* out_stats);

/* ---- Benchmark commands (what the CLI calls) ----
 * Return process exit codes: 0 success, 1 config error, 2 invariant or
 * tolerance failure. Diagnostics go to stderr, results to stdout/files. */

int psattn_cmd_run(const char* config_path);
int psattn_cmd_tradeoff(const char* config_path);

typedef struct {
    int32_t dim;        /* <= 0: default 64 */
    int32_t n_blocks;   /* <= 0: default 128 */
    uint64_t seed;      /* 0: default 1 */
    int32_t inject_error; /* nonzero: corrupt a merged normalizer (negative control) */
} psattn_equivalence_options;

int psattn_cmd_equivalence(const psattn_equivalence_options* opts);

#ifdef __cplusplus
}
#endif

#endif /* PSATTN_H */
