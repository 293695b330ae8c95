#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "psattn/types.hpp"

namespace psattn {

// Partial attention over one block.
//
// The block's unnormalized softmax mass AS = sum_i exp(score_i) overflows for
// large scores, so it is carried as (max_score, exp_sum) with
// log_as = max_score + ln(exp_sum). exp(log_as) recovers AS.
template <typename T>
struct ScoredBlockT {
    std::vector<T> out_unnorm;  // sum_i exp(score_i - max_score) * v_i
    T max_score = -std::numeric_limits<T>::infinity();
    T exp_sum = 0;              // sum_i exp(score_i - max_score)
    T log_as = -std::numeric_limits<T>::infinity();
};

// Running merge state over blocks. exp_sum == 0 iff nothing accumulated;
// finalizing divides out_unnorm by exp_sum. Merge order only perturbs the
// result at floating-point rounding level.
template <typename T>
struct SoftmaxAccumulatorT {
    std::vector<T> out_unnorm;
    T max_score = -std::numeric_limits<T>::infinity();
    T exp_sum = 0;
    T log_as_acc = -std::numeric_limits<T>::infinity();

    bool empty() const { return exp_sum == 0; }
};

using ScoredBlockResult = ScoredBlockT<float>;
using SoftmaxAccumulator = SoftmaxAccumulatorT<float>;

template <typename T>
T dot_scaled(std::span<const float> q, const float* k, T scale) {
    T acc = 0;
    for (std::size_t i = 0; i < q.size(); ++i) acc += static_cast<T>(q[i]) * static_cast<T>(k[i]);
    return acc * scale;
}

// Scores one block against q: max score, scaled exponent sum, and the
// unnormalized weighted value sum.
template <typename T>
ScoredBlockT<T> block_partial_attention_t(std::span<const float> q, const KVBlock& block, T scale) {
    if (block.n_tokens <= 0) throw Error("block_partial_attention: empty block");
    check_dim(q.size(), static_cast<std::size_t>(block.dim), "block_partial_attention");

    const std::int32_t n = block.n_tokens;
    std::vector<T> scores(static_cast<std::size_t>(n));
    T max_score = -std::numeric_limits<T>::infinity();
    for (std::int32_t t = 0; t < n; ++t) {
        const T s = dot_scaled<T>(q, block.key_row(t), scale);
        scores[static_cast<std::size_t>(t)] = s;
        if (s > max_score) max_score = s;
    }

    ScoredBlockT<T> r;
    r.max_score = max_score;
    r.out_unnorm.assign(q.size(), T{0});
    for (std::int32_t t = 0; t < n; ++t) {
        const T w = std::exp(scores[static_cast<std::size_t>(t)] - max_score);
        r.exp_sum += w;
        const float* v = block.value_row(t);
        for (std::size_t i = 0; i < q.size(); ++i) r.out_unnorm[i] += w * static_cast<T>(v[i]);
    }
    r.log_as = max_score + std::log(r.exp_sum);
    return r;
}

inline ScoredBlockResult block_partial_attention(std::span<const float> q, const KVBlock& block, float scale) {
    return block_partial_attention_t<float>(q, block, scale);
}

// Folds a block partial into the accumulator, rescaling both sides to the
// new common max. An empty accumulator absorbs the partial unchanged.
template <typename T>
void merge_partial(SoftmaxAccumulatorT<T>& acc, const ScoredBlockT<T>& part) {
    if (acc.empty()) {
        acc.out_unnorm = part.out_unnorm;
        acc.max_score = part.max_score;
        acc.exp_sum = part.exp_sum;
        acc.log_as_acc = part.log_as;
        return;
    }
    check_dim(part.out_unnorm.size(), acc.out_unnorm.size(), "merge_partial");
    const T m = acc.max_score > part.max_score ? acc.max_score : part.max_score;
    const T scale_acc = std::exp(acc.max_score - m);
    const T scale_part = std::exp(part.max_score - m);
    for (std::size_t i = 0; i < acc.out_unnorm.size(); ++i) {
        acc.out_unnorm[i] = acc.out_unnorm[i] * scale_acc + part.out_unnorm[i] * scale_part;
    }
    acc.exp_sum = acc.exp_sum * scale_acc + part.exp_sum * scale_part;
    acc.max_score = m;
    acc.log_as_acc = m + std::log(acc.exp_sum);
}

template <typename T>
std::vector<T> finalize(const SoftmaxAccumulatorT<T>& acc) {
    if (acc.empty()) throw Error("finalize: no blocks processed");
    std::vector<T> out(acc.out_unnorm.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = acc.out_unnorm[i] / acc.exp_sum;
    return out;
}

// Full-precision attention oracle: softmax(q.k * scale) weighted sum of
// values, accumulated in double regardless of how callers split blocks.
std::vector<double> exact_attention(std::span<const float> q,
                                    std::span<const HeadVector> keys,
                                    std::span<const HeadVector> values,
                                    double scale);

// Same oracle over the tokens of a block sequence.
std::vector<double> exact_attention_blocks(std::span<const float> q,
                                           std::span<const KVBlock* const> blocks,
                                           double scale);

// Unnormalized softmax mass of one block in double precision:
// log(sum_i exp(q.k_i * scale)).
double block_log_as_oracle(std::span<const float> q, const KVBlock& block, double scale);

inline double default_scale(std::size_t dim) { return 1.0 / std::sqrt(static_cast<double>(dim)); }

}  // namespace psattn
