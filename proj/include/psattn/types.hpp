#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace psattn {

// One attention head's worth of values: a real vector of length d.
using HeadVector = std::vector<float>;

using BlockId = std::int64_t;
using RequestId = std::int64_t;

// Raised on contract violations (empty inputs, dimension mismatches, bad ids).
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Raised when a block or request id does not exist; distinguished so the C
// API can report it as its own status code.
class NotFoundError : public Error {
public:
    using Error::Error;
};

// A block of consecutive tokens' key and value vectors for one layer.
// Keys and values are row-major n_tokens x dim. Blocks are immutable once
// stored; only the final block of a sequence may be shorter than the
// configured block size.
struct KVBlock {
    BlockId block_id = 0;
    std::int32_t layer_id = 0;
    std::int32_t n_tokens = 0;
    std::int32_t dim = 0;
    std::vector<float> keys;    // n_tokens * dim
    std::vector<float> values;  // n_tokens * dim

    const float* key_row(std::int32_t t) const { return keys.data() + static_cast<std::size_t>(t) * dim; }
    const float* value_row(std::int32_t t) const { return values.data() + static_cast<std::size_t>(t) * dim; }

    // K and V payload in bytes; what a fast-tier slot holds.
    std::size_t payload_bytes() const {
        return 2 * static_cast<std::size_t>(n_tokens) * static_cast<std::size_t>(dim) * sizeof(float);
    }
};

// O(d) summary of a block's keys: elementwise mean plus the bounding cuboid.
// Small enough to stay resident while the block itself lives in the slow tier.
struct BlockMetadata {
    BlockId block_id = 0;
    std::int32_t layer_id = 0;
    std::int32_t n_tokens = 0;
    HeadVector mean_key;
    HeadVector lo;
    HeadVector hi;
};

inline void check_dim(std::size_t got, std::size_t want, const char* what) {
    if (got != want) {
        throw Error(std::string(what) + ": dimension mismatch (" + std::to_string(got) +
                    " vs " + std::to_string(want) + ")");
    }
}

}  // namespace psattn
