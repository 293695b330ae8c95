#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "psattn/types.hpp"

namespace psattn {

// Synthetic decode workload. Keys are drawn so that attention-weight
// concentration is controllable: per (request, layer), `planted_blocks`
// blocks get keys aligned with a hidden direction (strength `skew`), the
// rest are isotropic noise. Queries start near that direction and drift as
// q_{t+1} = normalize(rho * q_t + sqrt(1 - rho^2) * noise), so `rho` sets the
// temporal similarity of consecutive decode steps.
struct WorkloadSpec {
    std::int32_t n_requests = 1;
    std::int32_t dim = 64;
    std::int32_t block_size = 32;
    std::int32_t n_layers = 1;
    std::int32_t context_min = 1024;  // tokens, uniform in [min, max]
    std::int32_t context_max = 1024;
    std::int32_t decode_steps = 8;
    double rho = 0.0;           // in [0, 1)
    double arrival_rate = 0.0;  // requests/s Poisson; 0 = all arrive at t=0
    double skew = 0.0;          // 0 = fully isotropic keys
    std::int32_t planted_blocks = 0;      // per (request, layer); clamped to block count
    std::int32_t planted_blocks_alt = 0;  // when > 0, odd-indexed requests use this count
    std::uint64_t seed = 1;

    void validate() const;
};

struct Request {
    RequestId request_id = 0;
    std::int32_t context_tokens = 0;
    std::int32_t decode_steps = 0;
    double arrival_s = 0.0;
    // layer_blocks[l] lists the block ids of layer l, in sequence order.
    std::vector<std::vector<BlockId>> layer_blocks;
    // step_queries[t][l] is the decode-step-t query for layer l.
    std::vector<std::vector<HeadVector>> step_queries;
    // Block contents, to be put into a store when the request is admitted.
    std::vector<std::shared_ptr<const KVBlock>> blocks;
    // Filled by the serving loop: one sample per completed decode step.
    std::vector<double> tbt_ms;

    std::size_t blocks_per_layer() const { return layer_blocks.empty() ? 0 : layer_blocks[0].size(); }
};

std::vector<Request> generate_workload(const WorkloadSpec& spec);

}  // namespace psattn
