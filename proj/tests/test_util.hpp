// Shared input builders for the test binaries. Reference computations
// (oracles) stay inside the individual test files on purpose, so each test
// checks the library against logic written independently of it.
#pragma once

#include <cmath>
#include <cstring>
#include <memory>
#include <span>
#include <vector>

#include "psattn/rng.hpp"
#include "psattn/store.hpp"
#include "psattn/types.hpp"

namespace testutil {

// Random block with N(0,1) keys/values; when `bias` is non-null, `bias` is
// added to every key row (a planted high-attention direction).
inline std::shared_ptr<psattn::KVBlock> make_block(psattn::Rng& rng, psattn::BlockId id,
                                                   std::int32_t layer, std::int32_t n_tokens,
                                                   std::int32_t dim,
                                                   const float* bias = nullptr) {
    auto block = std::make_shared<psattn::KVBlock>();
    block->block_id = id;
    block->layer_id = layer;
    block->n_tokens = n_tokens;
    block->dim = dim;
    const std::size_t n = static_cast<std::size_t>(n_tokens) * static_cast<std::size_t>(dim);
    block->keys.resize(n);
    block->values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        block->keys[i] = static_cast<float>(rng.normal()) +
                         (bias != nullptr ? bias[i % static_cast<std::size_t>(dim)] : 0.0f);
        block->values[i] = static_cast<float>(rng.normal());
    }
    return block;
}

// `count` fresh random blocks (ids first_id..first_id+count-1) on one layer,
// put into the store; returns the id list.
inline std::vector<psattn::BlockId> fill_store(psattn::TieredBlockStore& store, psattn::Rng& rng,
                                               psattn::BlockId first_id, std::size_t count,
                                               std::int32_t n_tokens, std::int32_t dim,
                                               std::int32_t layer = 0,
                                               psattn::RequestId owner = 0) {
    std::vector<psattn::BlockId> ids;
    ids.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const psattn::BlockId id = first_id + static_cast<psattn::BlockId>(i);
        store.put_block(make_block(rng, id, layer, n_tokens, dim), owner);
        ids.push_back(id);
    }
    return ids;
}

// Norm-relative error: ||a - b|| / max(||b||, tiny).
template <typename A, typename B>
double rel_error(const A& a, const B& b) {
    if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
    double diff2 = 0.0, ref2 = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        diff2 += d * d;
        ref2 += static_cast<double>(b[i]) * static_cast<double>(b[i]);
    }
    return std::sqrt(diff2) / std::max(std::sqrt(ref2), 1e-30);
}

template <typename T>
bool bitwise_equal(const std::vector<T>& a, const std::vector<T>& b) {
    return a.size() == b.size() &&
           (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(T)) == 0);
}

}  // namespace testutil
