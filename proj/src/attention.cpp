#include "psattn/attention.hpp"

#include <cmath>

namespace psattn {

std::vector<double> exact_attention(std::span<const float> q,
                                    std::span<const HeadVector> keys,
                                    std::span<const HeadVector> values,
                                    double scale) {
    if (keys.empty()) throw Error("exact_attention: empty context");
    if (keys.size() != values.size()) throw Error("exact_attention: keys/values length mismatch");

    const std::size_t d = q.size();
    std::vector<double> scores(keys.size());
    double max_score = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < keys.size(); ++t) {
        check_dim(keys[t].size(), d, "exact_attention keys");
        check_dim(values[t].size(), d, "exact_attention values");
        const double s = dot_scaled<double>(q, keys[t].data(), scale);
        scores[t] = s;
        if (s > max_score) max_score = s;
    }

    std::vector<double> out(d, 0.0);
    double exp_sum = 0.0;
    for (std::size_t t = 0; t < keys.size(); ++t) {
        const double w = std::exp(scores[t] - max_score);
        exp_sum += w;
        for (std::size_t i = 0; i < d; ++i) out[i] += w * static_cast<double>(values[t][i]);
    }
    for (auto& x : out) x /= exp_sum;
    return out;
}

std::vector<double> exact_attention_blocks(std::span<const float> q,
                                           std::span<const KVBlock* const> blocks,
                                           double scale) {
    if (blocks.empty()) throw Error("exact_attention: empty context");
    const std::size_t d = q.size();

    double max_score = -std::numeric_limits<double>::infinity();
    for (const KVBlock* b : blocks) {
        check_dim(static_cast<std::size_t>(b->dim), d, "exact_attention blocks");
        for (std::int32_t t = 0; t < b->n_tokens; ++t) {
            const double s = dot_scaled<double>(q, b->key_row(t), scale);
            if (s > max_score) max_score = s;
        }
    }

    std::vector<double> out(d, 0.0);
    double exp_sum = 0.0;
    for (const KVBlock* b : blocks) {
        for (std::int32_t t = 0; t < b->n_tokens; ++t) {
            const double w = std::exp(dot_scaled<double>(q, b->key_row(t), scale) - max_score);
            exp_sum += w;
            const float* v = b->value_row(t);
            for (std::size_t i = 0; i < d; ++i) out[i] += w * static_cast<double>(v[i]);
        }
    }
    for (auto& x : out) x /= exp_sum;
    return out;
}

double block_log_as_oracle(std::span<const float> q, const KVBlock& block, double scale) {
    if (block.n_tokens <= 0) throw Error("block_log_as_oracle: empty block");
    check_dim(q.size(), static_cast<std::size_t>(block.dim), "block_log_as_oracle");

    double max_score = -std::numeric_limits<double>::infinity();
    std::vector<double> scores(static_cast<std::size_t>(block.n_tokens));
    for (std::int32_t t = 0; t < block.n_tokens; ++t) {
        const double s = dot_scaled<double>(q, block.key_row(t), scale);
        scores[static_cast<std::size_t>(t)] = s;
        if (s > max_score) max_score = s;
    }
    double exp_sum = 0.0;
    for (double s : scores) exp_sum += std::exp(s - max_score);
    return max_score + std::log(exp_sum);
}

}  // namespace psattn
