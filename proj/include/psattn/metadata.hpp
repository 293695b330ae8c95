#pragma once

#include <span>
#include <vector>

#include "psattn/types.hpp"

namespace psattn {

// Block criticality estimators. Mean scores q against the mean key;
// CuboidUpperBound bounds every per-token score from above using the keys'
// bounding cuboid; CuboidMean averages the two (the default).
enum class Estimator {
    Mean,
    CuboidUpperBound,
    CuboidMean,
};

// Elementwise mean and bounding cuboid of the block's keys.
BlockMetadata build_metadata(const KVBlock& block);

// Estimated importance of the block for q. CuboidUpperBound satisfies
// score >= q.k_i * scale for every key row k_i of the block (scale > 0).
double criticality_score(std::span<const float> q, const BlockMetadata& meta,
                         Estimator estimator, double scale);

// Indices into metas sorted by descending criticality score; ties broken by
// ascending block_id so rankings are reproducible.
std::vector<std::size_t> rank_blocks(std::span<const float> q,
                                     std::span<const BlockMetadata> metas,
                                     Estimator estimator, double scale);

// Generic variant used when scores come from elsewhere (e.g. an oracle pass):
// same descending order and tie rule as rank_blocks.
std::vector<std::size_t> rank_by_scores(std::span<const double> scores,
                                        std::span<const BlockId> block_ids);

}  // namespace psattn
