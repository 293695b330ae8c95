#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace psattn {

// Deterministic random source. Distributions are implemented here rather
// than with std::*_distribution because those are implementation-defined;
// a fixed algorithm keeps seeded workloads bit-identical across standard
// libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Inclusive integer range.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        return lo + static_cast<std::int64_t>(uniform() * static_cast<double>(hi - lo + 1));
    }

    // Standard normal via Box-Muller.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    double exponential(double rate) {
        double u = uniform();
        while (u <= 0.0) u = uniform();
        return -std::log(u) / rate;
    }

    std::vector<float> normal_vector(std::size_t n, double stddev = 1.0) {
        std::vector<float> v(n);
        for (auto& x : v) x = static_cast<float>(stddev * normal());
        return v;
    }

    // Uniformly random direction on the unit sphere.
    std::vector<float> unit_vector(std::size_t n) {
        std::vector<float> v(n);
        double norm2 = 0.0;
        do {
            norm2 = 0.0;
            for (auto& x : v) {
                x = static_cast<float>(normal());
                norm2 += static_cast<double>(x) * x;
            }
        } while (norm2 == 0.0);
        const float inv = static_cast<float>(1.0 / std::sqrt(norm2));
        for (auto& x : v) x *= inv;
        return v;
    }

    // k distinct values from [0, n) in increasing order.
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k) {
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = i;
        for (std::size_t i = 0; i < k && i + 1 < n; ++i) {
            const auto j = static_cast<std::size_t>(uniform_int(static_cast<std::int64_t>(i),
                                                                static_cast<std::int64_t>(n - 1)));
            std::swap(idx[i], idx[j]);
        }
        idx.resize(k < n ? k : n);
        std::sort(idx.begin(), idx.end());
        return idx;
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace psattn
