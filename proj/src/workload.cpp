#include "psattn/workload.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "psattn/rng.hpp"

namespace psattn {

void WorkloadSpec::validate() const {
    if (n_requests < 1) throw Error("workload: n_requests must be >= 1");
    if (dim < 1) throw Error("workload: dim must be >= 1");
    if (block_size < 1) throw Error("workload: block_size must be >= 1");
    if (n_layers < 1) throw Error("workload: n_layers must be >= 1");
    if (context_min < 1 || context_max < context_min)
        throw Error("workload: need 1 <= context_min <= context_max");
    if (decode_steps < 1) throw Error("workload: decode_steps must be >= 1");
    if (!(rho >= 0.0) || rho >= 1.0)
        throw Error("workload: rho must be in [0, 1), got " + std::to_string(rho));
    if (arrival_rate < 0.0) throw Error("workload: arrival_rate must be >= 0");
    if (skew < 0.0) throw Error("workload: skew must be >= 0");
    if (planted_blocks < 0 || planted_blocks_alt < 0)
        throw Error("workload: planted block counts must be >= 0");
}

namespace {

HeadVector scaled_unit(const std::vector<double>& dir, double scale) {
    HeadVector out(dir.size());
    for (std::size_t i = 0; i < dir.size(); ++i)
        out[i] = static_cast<float>(dir[i] * scale);
    return out;
}

void renormalize(std::vector<double>& v) {
    double norm_sq = 0.0;
    for (double x : v) norm_sq += x * x;
    const double norm = std::sqrt(norm_sq);
    if (norm == 0.0) {
        v[0] = 1.0;
        return;
    }
    for (double& x : v) x /= norm;
}

}  // namespace

std::vector<Request> generate_workload(const WorkloadSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    const std::size_t d = static_cast<std::size_t>(spec.dim);

    std::vector<Request> requests;
    requests.reserve(static_cast<std::size_t>(spec.n_requests));
    BlockId next_block_id = 0;
    double clock_s = 0.0;

    for (std::int32_t r = 0; r < spec.n_requests; ++r) {
        Request req;
        req.request_id = r;
        req.decode_steps = spec.decode_steps;
        if (spec.arrival_rate > 0.0 && r > 0) clock_s += rng.exponential(spec.arrival_rate);
        req.arrival_s = clock_s;
        req.context_tokens =
            spec.context_min +
            static_cast<std::int32_t>(rng.uniform() *
                                      static_cast<double>(spec.context_max - spec.context_min + 1));
        req.context_tokens = std::min(req.context_tokens, spec.context_max);

        const std::int32_t n_blocks =
            (req.context_tokens + spec.block_size - 1) / spec.block_size;
        std::int32_t planted = (spec.planted_blocks_alt > 0 && r % 2 == 1)
                                   ? spec.planted_blocks_alt
                                   : spec.planted_blocks;
        planted = std::min(planted, n_blocks);

        req.layer_blocks.resize(static_cast<std::size_t>(spec.n_layers));
        req.step_queries.assign(static_cast<std::size_t>(spec.decode_steps),
                                std::vector<HeadVector>(static_cast<std::size_t>(spec.n_layers)));

        for (std::int32_t l = 0; l < spec.n_layers; ++l) {
            // Hidden direction the planted keys (and initial query) align with.
            std::vector<double> direction(d);
            {
                HeadVector u = rng.unit_vector(d);
                for (std::size_t i = 0; i < d; ++i) direction[i] = u[i];
            }
            std::vector<std::size_t> planted_idx = rng.sample_without_replacement(
                static_cast<std::size_t>(n_blocks), static_cast<std::size_t>(planted));

            auto& ids = req.layer_blocks[static_cast<std::size_t>(l)];
            ids.reserve(static_cast<std::size_t>(n_blocks));
            std::size_t planted_cursor = 0;
            for (std::int32_t b = 0; b < n_blocks; ++b) {
                const bool is_planted =
                    planted_cursor < planted_idx.size() &&
                    planted_idx[planted_cursor] == static_cast<std::size_t>(b);
                if (is_planted) ++planted_cursor;

                auto block = std::make_shared<KVBlock>();
                block->block_id = next_block_id++;
                block->layer_id = l;
                block->dim = spec.dim;
                block->n_tokens = std::min(spec.block_size,
                                           req.context_tokens - b * spec.block_size);
                const std::size_t n = static_cast<std::size_t>(block->n_tokens);
                block->keys.resize(n * d);
                block->values.resize(n * d);

                // Each block gets its own value centroid so outputs differ
                // visibly depending on which blocks were processed.
                HeadVector value_center = rng.normal_vector(d, 1.0);
                for (std::size_t t = 0; t < n; ++t) {
                    for (std::size_t i = 0; i < d; ++i) {
                        const double noise = rng.normal();
                        const double aligned = is_planted ? spec.skew * direction[i] : 0.0;
                        block->keys[t * d + i] = static_cast<float>(aligned + noise);
                        block->values[t * d + i] =
                            value_center[i] + 0.25f * static_cast<float>(rng.normal());
                    }
                }
                ids.push_back(block->block_id);
                req.blocks.push_back(std::move(block));
            }

            // Query stream: starts near the planted direction, then drifts
            // with correlation rho; magnitude pinned to sqrt(d) so scores
            // scale like skew after 1/sqrt(d) normalization.
            std::vector<double> dir = direction;
            {
                HeadVector g = rng.unit_vector(d);
                for (std::size_t i = 0; i < d; ++i) dir[i] += 0.1 * g[i];
                renormalize(dir);
            }
            const double q_scale = std::sqrt(static_cast<double>(d));
            const double carry = spec.rho;
            const double fresh = std::sqrt(1.0 - spec.rho * spec.rho);
            for (std::int32_t t = 0; t < spec.decode_steps; ++t) {
                if (t > 0) {
                    HeadVector w = rng.unit_vector(d);
                    for (std::size_t i = 0; i < d; ++i)
                        dir[i] = carry * dir[i] + fresh * w[i];
                    renormalize(dir);
                }
                req.step_queries[static_cast<std::size_t>(t)][static_cast<std::size_t>(l)] =
                    scaled_unit(dir, q_scale);
            }
        }
        requests.push_back(std::move(req));
    }
    return requests;
}

}  // namespace psattn
