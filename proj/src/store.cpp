#include "psattn/store.hpp"

#include <algorithm>
#include <chrono>
#include <thread>

#include "psattn/metadata.hpp"

namespace psattn {

TieredBlockStore::TieredBlockStore(const StoreOptions& options) : options_(options) {
    if (options_.n_layers <= 0) throw Error("TieredBlockStore: n_layers must be positive");
    if (options_.policy == PoolPolicy::Unified) {
        domains_.resize(1);
        domains_[0].capacity = options_.fast_capacity_slots;
    } else {
        domains_.resize(static_cast<std::size_t>(options_.n_layers));
        const std::size_t per_layer = options_.fast_capacity_slots / static_cast<std::size_t>(options_.n_layers);
        for (auto& d : domains_) d.capacity = per_layer;
    }
    stats_.per_layer.resize(static_cast<std::size_t>(options_.n_layers));
}

TieredBlockStore::Domain& TieredBlockStore::domain_for(std::int32_t layer_id) {
    if (layer_id < 0 || layer_id >= options_.n_layers) throw Error("TieredBlockStore: layer_id out of range");
    return options_.policy == PoolPolicy::Unified ? domains_[0]
                                                  : domains_[static_cast<std::size_t>(layer_id)];
}

const TieredBlockStore::Domain& TieredBlockStore::domain_for(std::int32_t layer_id) const {
    if (layer_id < 0 || layer_id >= options_.n_layers) throw Error("TieredBlockStore: layer_id out of range");
    return options_.policy == PoolPolicy::Unified ? domains_[0]
                                                  : domains_[static_cast<std::size_t>(layer_id)];
}

void TieredBlockStore::count_eviction(BlockId victim) {
    stats_.evictions += 1;
    auto it = metadata_.find(victim);
    if (it != metadata_.end()) {
        stats_.per_layer[static_cast<std::size_t>(it->second.layer_id)].evictions += 1;
    }
}

BlockId TieredBlockStore::insert_fast(Domain& domain, BlockId block_id, bool* evicted) {
    *evicted = false;
    if (domain.capacity == 0) return 0;
    BlockId victim = 0;
    if (domain.slots.size() == domain.capacity) {
        victim = domain.order.back();
        domain.order.pop_back();
        domain.slots.erase(victim);
        *evicted = true;
    }
    domain.order.push_front(block_id);
    domain.slots.emplace(block_id, domain.order.begin());
    return victim;
}

void TieredBlockStore::put_block(std::shared_ptr<const KVBlock> block, RequestId owner) {
    if (!block) throw Error("put_block: null block");
    BlockMetadata meta = build_metadata(*block);
    std::lock_guard lock(mutex_);
    if (block->layer_id < 0 || block->layer_id >= options_.n_layers) {
        throw Error("put_block: layer_id out of range");
    }
    if (backing_.count(block->block_id)) {
        throw Error("put_block: duplicate block id " + std::to_string(block->block_id));
    }
    const BlockId id = block->block_id;
    const std::int32_t layer = block->layer_id;
    backing_.emplace(id, std::move(block));
    metadata_.emplace(id, std::move(meta));
    owned_[owner].push_back(id);

    bool evicted = false;
    const BlockId victim = insert_fast(domain_for(layer), id, &evicted);
    if (evicted) count_eviction(victim);
}

std::shared_ptr<const KVBlock> TieredBlockStore::load_block(BlockId block_id, std::int32_t layer_id) {
    std::shared_ptr<const KVBlock> block;
    bool miss = false;
    {
        std::lock_guard lock(mutex_);
        auto it = backing_.find(block_id);
        if (it == backing_.end()) throw NotFoundError("load_block: unknown block id " + std::to_string(block_id));
        block = it->second;
        if (layer_id >= 0 && block->layer_id != layer_id)
            throw Error("load_block: layer_id does not match block");
        const std::int32_t layer = block->layer_id;

        Domain& domain = domain_for(layer);
        auto& layer_stats = stats_.per_layer[static_cast<std::size_t>(layer)];
        auto slot = domain.slots.find(block_id);
        BlockId victim = 0;
        bool evicted = false;
        if (slot != domain.slots.end()) {
            stats_.hits += 1;
            layer_stats.hits += 1;
            if (options_.eviction == EvictionPolicy::LRU) {
                domain.order.splice(domain.order.begin(), domain.order, slot->second);
            }
        } else {
            miss = true;
            stats_.misses += 1;
            layer_stats.misses += 1;
            stats_.bytes_transferred += block->payload_bytes();
            layer_stats.bytes_transferred += block->payload_bytes();
            victim = insert_fast(domain, block_id, &evicted);
            if (evicted) count_eviction(victim);
        }
        if (trace_) {
            *trace_ << trace_seq_++ << ',' << layer << ',' << block_id << ','
                    << (miss ? "miss" : "hit") << ',';
            if (evicted) *trace_ << victim;
            else *trace_ << '-';
            *trace_ << '\n';
        }
    }
    if (miss && options_.miss_sleep_ms > 0.0) {
        std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(options_.miss_sleep_ms));
    }
    return block;
}

std::shared_ptr<const KVBlock> TieredBlockStore::peek_block(BlockId block_id) const {
    std::lock_guard lock(mutex_);
    auto it = backing_.find(block_id);
    if (it == backing_.end()) throw NotFoundError("peek_block: unknown block id " + std::to_string(block_id));
    return it->second;
}

BlockMetadata TieredBlockStore::metadata(BlockId block_id) const {
    std::lock_guard lock(mutex_);
    auto it = metadata_.find(block_id);
    if (it == metadata_.end()) throw NotFoundError("metadata: unknown block id " + std::to_string(block_id));
    return it->second;
}

std::vector<BlockMetadata> TieredBlockStore::metadata_for(std::span<const BlockId> ids) const {
    std::lock_guard lock(mutex_);
    std::vector<BlockMetadata> metas;
    metas.reserve(ids.size());
    for (BlockId id : ids) {
        auto it = metadata_.find(id);
        if (it == metadata_.end()) throw NotFoundError("metadata: unknown block id " + std::to_string(id));
        metas.push_back(it->second);
    }
    return metas;
}

void TieredBlockStore::release_request(RequestId request_id) {
    std::lock_guard lock(mutex_);
    auto it = owned_.find(request_id);
    if (it == owned_.end()) throw NotFoundError("release_request: unknown request " + std::to_string(request_id));
    for (BlockId id : it->second) {
        auto meta = metadata_.find(id);
        if (meta != metadata_.end()) {
            Domain& domain = domain_for(meta->second.layer_id);
            auto slot = domain.slots.find(id);
            if (slot != domain.slots.end()) {
                domain.order.erase(slot->second);
                domain.slots.erase(slot);
            }
            metadata_.erase(meta);
        }
        backing_.erase(id);
    }
    owned_.erase(it);
}

bool TieredBlockStore::contains(BlockId block_id) const {
    std::lock_guard lock(mutex_);
    return backing_.count(block_id) > 0;
}

bool TieredBlockStore::resident_fast(BlockId block_id) const {
    std::lock_guard lock(mutex_);
    auto it = metadata_.find(block_id);
    if (it == metadata_.end()) return false;
    const Domain& domain = domain_for(it->second.layer_id);
    return domain.slots.count(block_id) > 0;
}

CacheStats TieredBlockStore::stats() const {
    std::lock_guard lock(mutex_);
    return stats_;
}

std::size_t TieredBlockStore::fast_occupancy() const {
    std::lock_guard lock(mutex_);
    std::size_t total = 0;
    for (const auto& d : domains_) total += d.slots.size();
    return total;
}

std::size_t TieredBlockStore::domain_capacity(std::int32_t layer_id) const {
    std::lock_guard lock(mutex_);
    return domain_for(layer_id).capacity;
}

void TieredBlockStore::enable_trace(std::ostream* sink) {
    std::lock_guard lock(mutex_);
    trace_ = sink;
}

}  // namespace psattn
