#pragma once

#include <cstdint>
#include <string>

namespace psattn {

// Oracle self-test: verifies the blockwise merge algebra against the
// exact-attention oracle on randomized instances. `inject_error` corrupts
// one merged normalizer on purpose — the negative control proving the
// harness can fail.
struct EquivalenceOptions {
    std::size_t dim = 64;
    std::size_t n_blocks = 128;
    std::size_t block_tokens = 32;
    std::size_t rounds = 5;  // independent random instances
    std::uint64_t seed = 1;
    bool inject_error = false;
};

struct EquivalenceReport {
    // Float merge path vs double oracle, norm-relative, over all instances
    // and permutations (the headline number).
    double max_rel_error = 0.0;
    // Blockwise double merge vs flat two-pass double oracle.
    double max_double_rel_error = 0.0;
    // |exp(log_as) of merge - sum of exp(log_as) of operands|, relative.
    double max_additivity_error = 0.0;
    bool stable_at_large_scores = false;  // no overflow/NaN at |score| ~ 300
    bool degenerate_ok = false;           // d=1, single 1-token block
    bool passed = false;

    std::string summary() const;
};

EquivalenceReport run_equivalence(const EquivalenceOptions& opts);

// CLI wrapper: prints the summary, returns 0 on pass, 2 on violation.
int cmd_equivalence(const EquivalenceOptions& opts);

}  // namespace psattn
