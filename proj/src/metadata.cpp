#include "psattn/metadata.hpp"

#include <algorithm>
#include <numeric>

namespace psattn {

BlockMetadata build_metadata(const KVBlock& block) {
    if (block.n_tokens <= 0) throw Error("build_metadata: empty block");
    const std::size_t d = static_cast<std::size_t>(block.dim);

    BlockMetadata meta;
    meta.block_id = block.block_id;
    meta.layer_id = block.layer_id;
    meta.n_tokens = block.n_tokens;
    meta.lo.assign(block.key_row(0), block.key_row(0) + d);
    meta.hi = meta.lo;

    std::vector<double> sum(d);
    for (std::size_t i = 0; i < d; ++i) sum[i] = meta.lo[i];
    for (std::int32_t t = 1; t < block.n_tokens; ++t) {
        const float* k = block.key_row(t);
        for (std::size_t i = 0; i < d; ++i) {
            meta.lo[i] = std::min(meta.lo[i], k[i]);
            meta.hi[i] = std::max(meta.hi[i], k[i]);
            sum[i] += k[i];
        }
    }
    meta.mean_key.resize(d);
    for (std::size_t i = 0; i < d; ++i) {
        meta.mean_key[i] = static_cast<float>(sum[i] / block.n_tokens);
    }
    return meta;
}

namespace {

// Accumulation stays sequential in index order: paired with the same order
// in per-token dot products, floating-point monotonicity keeps the cuboid
// upper bound valid without extra slack.
double mean_score(std::span<const float> q, const BlockMetadata& meta, double scale) {
    double acc = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        acc += static_cast<double>(q[i]) * static_cast<double>(meta.mean_key[i]);
    }
    return acc * scale;
}

double cuboid_upper_score(std::span<const float> q, const BlockMetadata& meta, double scale) {
    double acc = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        const double qd = q[i];
        acc += std::max(qd * static_cast<double>(meta.lo[i]), qd * static_cast<double>(meta.hi[i]));
    }
    return acc * scale;
}

}  // namespace

double criticality_score(std::span<const float> q, const BlockMetadata& meta,
                         Estimator estimator, double scale) {
    check_dim(q.size(), meta.mean_key.size(), "criticality_score");
    switch (estimator) {
        case Estimator::Mean:
            return mean_score(q, meta, scale);
        case Estimator::CuboidUpperBound:
            return cuboid_upper_score(q, meta, scale);
        case Estimator::CuboidMean:
            return 0.5 * (mean_score(q, meta, scale) + cuboid_upper_score(q, meta, scale));
    }
    throw Error("criticality_score: unknown estimator");
}

std::vector<std::size_t> rank_blocks(std::span<const float> q,
                                     std::span<const BlockMetadata> metas,
                                     Estimator estimator, double scale) {
    if (metas.empty()) throw Error("rank_blocks: empty metadata list");
    std::vector<double> scores(metas.size());
    std::vector<BlockId> ids(metas.size());
    for (std::size_t i = 0; i < metas.size(); ++i) {
        scores[i] = criticality_score(q, metas[i], estimator, scale);
        ids[i] = metas[i].block_id;
    }
    return rank_by_scores(scores, ids);
}

std::vector<std::size_t> rank_by_scores(std::span<const double> scores,
                                        std::span<const BlockId> block_ids) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return block_ids[a] < block_ids[b];
    });
    return order;
}

}  // namespace psattn
