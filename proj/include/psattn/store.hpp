#pragma once

#include <cstdint>
#include <list>
#include <memory>
#include <mutex>
#include <ostream>
#include <span>
#include <unordered_map>
#include <vector>

#include "psattn/types.hpp"

namespace psattn {

// Slot management for the fast tier: one pool shared by all layers, or an
// equal split with no borrowing across layers.
enum class PoolPolicy { Unified, LayerPartitioned };

enum class EvictionPolicy { LRU, FIFO };

struct StoreOptions {
    std::size_t fast_capacity_slots = 0;
    std::int32_t n_layers = 1;
    PoolPolicy policy = PoolPolicy::Unified;
    EvictionPolicy eviction = EvictionPolicy::LRU;
    // Real sleep per missed block load, for overlap experiments. Zero keeps
    // loads instantaneous.
    double miss_sleep_ms = 0.0;
};

struct LayerCacheStats {
    std::uint64_t hits = 0;
    std::uint64_t misses = 0;
    std::uint64_t evictions = 0;
    std::uint64_t bytes_transferred = 0;
};

struct CacheStats {
    std::uint64_t hits = 0;
    std::uint64_t misses = 0;
    std::uint64_t evictions = 0;
    std::uint64_t bytes_transferred = 0;
    std::vector<LayerCacheStats> per_layer;

    std::uint64_t accesses() const { return hits + misses; }
    double hit_ratio() const {
        const auto total = accesses();
        return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
    }
};

// Two-tier block store: a fixed-capacity fast pool over a slow backing map.
// Blocks are immutable once put; loads hand out shared pointers, so evicting
// a slot never invalidates a reader. Block metadata is built at put time and
// stays resident regardless of tier.
//
// Thread safety: all public operations are atomic with respect to each
// other. The injected miss sleep happens outside the lock so concurrent
// loads overlap.
class TieredBlockStore {
public:
    explicit TieredBlockStore(const StoreOptions& options);

    // Stores the block in the backing tier, builds its metadata, and
    // write-allocates it into the fast pool. Fails on duplicate ids.
    void put_block(std::shared_ptr<const KVBlock> block, RequestId owner = 0);

    // Fetches block content, counting a hit or a miss and updating recency.
    // A miss copies from the backing tier, evicting from the relevant pool
    // if it is full.
    std::shared_ptr<const KVBlock> load_block(BlockId block_id, std::int32_t layer_id = -1);

    // Introspection read: no stats, no recency update, no latency.
    std::shared_ptr<const KVBlock> peek_block(BlockId block_id) const;

    BlockMetadata metadata(BlockId block_id) const;
    std::vector<BlockMetadata> metadata_for(std::span<const BlockId> ids) const;

    // Drops every block owned by the request from both tiers and the
    // metadata index.
    void release_request(RequestId request_id);

    bool contains(BlockId block_id) const;
    bool resident_fast(BlockId block_id) const;

    CacheStats stats() const;

    std::size_t fast_occupancy() const;
    std::size_t domain_capacity(std::int32_t layer_id) const;

    // One line per access: seq,layer_id,block_id,hit|miss,evicted_id|-
    void enable_trace(std::ostream* sink);

    const StoreOptions& options() const { return options_; }

private:
    struct Domain {
        std::size_t capacity = 0;
        // Front = most recently used (LRU) / most recently inserted (FIFO).
        std::list<BlockId> order;
        std::unordered_map<BlockId, std::list<BlockId>::iterator> slots;
    };

    Domain& domain_for(std::int32_t layer_id);
    const Domain& domain_for(std::int32_t layer_id) const;
    // Returns the evicted id, if any. Caller holds the lock.
    BlockId insert_fast(Domain& domain, BlockId block_id, bool* evicted);
    void count_eviction(BlockId victim);

    StoreOptions options_;
    mutable std::mutex mutex_;
    std::unordered_map<BlockId, std::shared_ptr<const KVBlock>> backing_;
    std::unordered_map<BlockId, BlockMetadata> metadata_;
    std::unordered_map<RequestId, std::vector<BlockId>> owned_;
    std::vector<Domain> domains_;
    CacheStats stats_;
    std::ostream* trace_ = nullptr;
    std::uint64_t trace_seq_ = 0;
};

}  // namespace psattn
