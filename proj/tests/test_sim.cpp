// Workload generator and serving loop tests. TBT values are checked against
// hand-computed cost arithmetic on purpose-built requests; the generator's
// statistical properties use fixed seeds, so every expectation is pinned.
#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "psattn/attention.hpp"
#include "psattn/serving.hpp"
#include "psattn/workload.hpp"
#include "test_util.hpp"

using namespace psattn;

namespace {

double cosine(const HeadVector& a, const HeadVector& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += static_cast<double>(a[i]) * b[i];
        na += static_cast<double>(a[i]) * a[i];
        nb += static_cast<double>(b[i]) * b[i];
    }
    return dot / std::sqrt(na * nb);
}

// Share of total attention mass held by the k largest blocks of request 0,
// layer 0, judged by its first-step query.
double top_block_mass_share(const Request& req, std::size_t k, std::int32_t dim) {
    const double scale = default_scale(static_cast<std::size_t>(dim));
    const auto& q = req.step_queries[0][0];
    std::vector<double> log_as;
    for (std::size_t b = 0; b < req.layer_blocks[0].size(); ++b) {
        log_as.push_back(block_log_as_oracle(q, *req.blocks[b], scale));
    }
    std::sort(log_as.begin(), log_as.end(), std::greater<>());
    const double mx = log_as.front();
    double top = 0.0, total = 0.0;
    for (std::size_t i = 0; i < log_as.size(); ++i) {
        const double m = std::exp(log_as[i] - mx);
        total += m;
        if (i < k) top += m;
    }
    return top / total;
}

Request make_request(Rng& rng, RequestId id, double arrival_s, std::int32_t steps,
                     std::int32_t n_layers, std::int32_t blocks_per_layer, std::int32_t tokens,
                     std::int32_t dim, BlockId base_id) {
    Request req;
    req.request_id = id;
    req.arrival_s = arrival_s;
    req.decode_steps = steps;
    req.context_tokens = blocks_per_layer * tokens;
    req.layer_blocks.resize(static_cast<std::size_t>(n_layers));
    req.step_queries.assign(static_cast<std::size_t>(steps),
                            std::vector<HeadVector>(static_cast<std::size_t>(n_layers)));
    BlockId next = base_id;
    for (std::int32_t l = 0; l < n_layers; ++l) {
        for (std::int32_t b = 0; b < blocks_per_layer; ++b, ++next) {
            req.blocks.push_back(testutil::make_block(rng, next, l, tokens, dim));
            req.layer_blocks[static_cast<std::size_t>(l)].push_back(next);
        }
    }
    for (auto& step : req.step_queries)
        for (auto& q : step) q = rng.normal_vector(static_cast<std::size_t>(dim));
    return req;
}

StoreOptions unified(std::size_t capacity) {
    StoreOptions o;
    o.fast_capacity_slots = capacity;
    return o;
}

}  // namespace

TEST_CASE("workload validation rejects bad specs") {
    WorkloadSpec good;
    CHECK_NOTHROW(good.validate());
    auto expect_throw = [](auto mutate) {
        WorkloadSpec s;
        mutate(s);
        CHECK_THROWS_AS(s.validate(), Error);
    };
    expect_throw([](WorkloadSpec& s) { s.n_requests = 0; });
    expect_throw([](WorkloadSpec& s) { s.dim = 0; });
    expect_throw([](WorkloadSpec& s) { s.block_size = 0; });
    expect_throw([](WorkloadSpec& s) { s.n_layers = 0; });
    expect_throw([](WorkloadSpec& s) { s.context_min = 0; });
    expect_throw([](WorkloadSpec& s) { s.context_max = s.context_min - 1; });
    expect_throw([](WorkloadSpec& s) { s.decode_steps = 0; });
    expect_throw([](WorkloadSpec& s) { s.rho = 1.0; });
    expect_throw([](WorkloadSpec& s) { s.rho = -0.1; });
    expect_throw([](WorkloadSpec& s) { s.arrival_rate = -1.0; });
    expect_throw([](WorkloadSpec& s) { s.skew = -0.5; });
    expect_throw([](WorkloadSpec& s) { s.planted_blocks = -1; });
    expect_throw([](WorkloadSpec& s) { s.planted_blocks_alt = -1; });
}

TEST_CASE("generation is deterministic in the seed") {
    WorkloadSpec spec;
    spec.n_requests = 3;
    spec.dim = 16;
    spec.block_size = 8;
    spec.n_layers = 2;
    spec.context_min = 40;
    spec.context_max = 70;
    spec.decode_steps = 4;
    spec.rho = 0.5;
    spec.arrival_rate = 2.0;
    spec.skew = 3.0;
    spec.planted_blocks = 2;
    spec.seed = 33;

    const auto a = generate_workload(spec);
    const auto b = generate_workload(spec);
    REQUIRE(a.size() == b.size());
    for (std::size_t r = 0; r < a.size(); ++r) {
        CHECK(a[r].context_tokens == b[r].context_tokens);
        CHECK(a[r].arrival_s == b[r].arrival_s);
        REQUIRE(a[r].blocks.size() == b[r].blocks.size());
        for (std::size_t i = 0; i < a[r].blocks.size(); ++i) {
            CHECK(testutil::bitwise_equal(a[r].blocks[i]->keys, b[r].blocks[i]->keys));
            CHECK(testutil::bitwise_equal(a[r].blocks[i]->values, b[r].blocks[i]->values));
        }
        for (std::size_t t = 0; t < a[r].step_queries.size(); ++t)
            for (std::size_t l = 0; l < a[r].step_queries[t].size(); ++l)
                CHECK(testutil::bitwise_equal(a[r].step_queries[t][l], b[r].step_queries[t][l]));
    }

    spec.seed = 34;
    const auto c = generate_workload(spec);
    CHECK_FALSE(testutil::bitwise_equal(a[0].blocks[0]->keys, c[0].blocks[0]->keys));
}

TEST_CASE("rho shapes only the queries, never the block contents") {
    // The drift coefficient scales existing draws instead of consuming
    // different amounts of randomness, so two workloads differing only in
    // rho share bit-identical blocks. Serving comparisons across rho are
    // therefore apples to apples.
    WorkloadSpec spec;
    spec.n_requests = 2;
    spec.dim = 16;
    spec.block_size = 8;
    spec.n_layers = 2;
    spec.context_min = spec.context_max = 64;
    spec.decode_steps = 5;
    spec.seed = 12;
    spec.rho = 0.0;
    const auto flat = generate_workload(spec);
    spec.rho = 0.95;
    const auto sticky = generate_workload(spec);

    REQUIRE(flat.size() == sticky.size());
    for (std::size_t r = 0; r < flat.size(); ++r) {
        REQUIRE(flat[r].blocks.size() == sticky[r].blocks.size());
        for (std::size_t i = 0; i < flat[r].blocks.size(); ++i) {
            CHECK(testutil::bitwise_equal(flat[r].blocks[i]->keys, sticky[r].blocks[i]->keys));
            CHECK(testutil::bitwise_equal(flat[r].blocks[i]->values,
                                          sticky[r].blocks[i]->values));
        }
    }
    // First-step queries coincide (drift starts at step 1)...
    CHECK(testutil::bitwise_equal(flat[0].step_queries[0][0], sticky[0].step_queries[0][0]));
    // ...later ones do not.
    CHECK_FALSE(testutil::bitwise_equal(flat[0].step_queries[4][0],
                                        sticky[0].step_queries[4][0]));
}

TEST_CASE("block ids are globally sequential and layers partition the context") {
    WorkloadSpec spec;
    spec.n_requests = 2;
    spec.dim = 8;
    spec.block_size = 32;
    spec.n_layers = 3;
    spec.context_min = spec.context_max = 100;  // 4 blocks: 32+32+32+4
    spec.decode_steps = 2;
    spec.seed = 9;

    const auto reqs = generate_workload(spec);
    BlockId running = 0;
    for (const auto& req : reqs) {
        CHECK(req.blocks_per_layer() == 4);
        REQUIRE(req.blocks.size() == 12);  // 3 layers x 4 blocks
        std::size_t flat = 0;
        for (std::size_t l = 0; l < 3; ++l) {
            std::int32_t tokens = 0;
            for (std::size_t b = 0; b < 4; ++b, ++flat) {
                const auto& block = *req.blocks[flat];
                CHECK(block.block_id == running++);
                CHECK(block.block_id == req.layer_blocks[l][b]);
                CHECK(block.layer_id == static_cast<std::int32_t>(l));
                CHECK(block.n_tokens == (b == 3 ? 4 : 32));
                CHECK(block.keys.size() ==
                      static_cast<std::size_t>(block.n_tokens) * 8u);
                tokens += block.n_tokens;
            }
            CHECK(tokens == req.context_tokens);
        }
        CHECK(req.context_tokens == 100);
    }
}

TEST_CASE("context lengths stay within their configured range") {
    WorkloadSpec spec;
    spec.n_requests = 12;
    spec.dim = 4;
    spec.block_size = 16;
    spec.context_min = 50;
    spec.context_max = 80;
    spec.decode_steps = 1;
    spec.seed = 44;
    bool saw_variation = false;
    const auto reqs = generate_workload(spec);
    for (const auto& req : reqs) {
        CHECK(req.context_tokens >= 50);
        CHECK(req.context_tokens <= 80);
        if (req.context_tokens != reqs[0].context_tokens) saw_variation = true;
    }
    CHECK(saw_variation);
}

TEST_CASE("planted skew concentrates attention mass in few blocks") {
    WorkloadSpec spec;
    spec.n_requests = 1;
    spec.dim = 32;
    spec.block_size = 8;
    spec.n_layers = 1;
    spec.context_min = spec.context_max = 128;  // 16 blocks
    spec.decode_steps = 1;
    spec.seed = 77;

    spec.skew = 8.0;
    spec.planted_blocks = 3;
    const auto skewed = generate_workload(spec);
    const double share_skewed = top_block_mass_share(skewed[0], 3, spec.dim);
    CHECK(share_skewed > 0.8);

    spec.skew = 0.0;
    spec.planted_blocks = 0;
    const auto flat = generate_workload(spec);
    const double share_flat = top_block_mass_share(flat[0], 3, spec.dim);
    CHECK(share_flat < 0.6);
    CHECK(share_flat < share_skewed);
}

TEST_CASE("alternate planted count applies to odd-indexed requests") {
    WorkloadSpec spec;
    spec.n_requests = 2;
    spec.dim = 32;
    spec.block_size = 8;
    spec.n_layers = 1;
    spec.context_min = spec.context_max = 128;
    spec.decode_steps = 1;
    spec.seed = 31;
    spec.skew = 8.0;
    spec.planted_blocks = 2;
    spec.planted_blocks_alt = 8;

    const auto reqs = generate_workload(spec);
    // Request 0 concentrates its mass in ~2 blocks; request 1 spreads it
    // over ~8, so its top-2 share is visibly smaller.
    const double share0 = top_block_mass_share(reqs[0], 2, spec.dim);
    const double share1 = top_block_mass_share(reqs[1], 2, spec.dim);
    CHECK(share0 > 0.8);
    CHECK(share1 < share0);
    const double share1_wide = top_block_mass_share(reqs[1], 8, spec.dim);
    CHECK(share1_wide > 0.8);
}

TEST_CASE("query drift follows rho") {
    WorkloadSpec spec;
    spec.n_requests = 1;
    spec.dim = 64;
    spec.block_size = 16;
    spec.n_layers = 1;
    spec.context_min = spec.context_max = 64;
    spec.decode_steps = 12;
    spec.seed = 21;

    spec.rho = 0.95;
    const auto sticky = generate_workload(spec);
    double min_cos = 1.0;
    for (std::size_t t = 1; t < 12; ++t) {
        min_cos = std::min(min_cos, cosine(sticky[0].step_queries[t - 1][0],
                                           sticky[0].step_queries[t][0]));
    }
    CHECK(min_cos > 0.85);

    spec.rho = 0.0;
    const auto fresh = generate_workload(spec);
    double sum_cos = 0.0;
    for (std::size_t t = 1; t < 12; ++t) {
        sum_cos += cosine(fresh[0].step_queries[t - 1][0], fresh[0].step_queries[t][0]);
    }
    CHECK(std::abs(sum_cos / 11.0) < 0.3);

    // Query magnitude is pinned to sqrt(d).
    double norm2 = 0.0;
    for (float x : sticky[0].step_queries[0][0]) norm2 += static_cast<double>(x) * x;
    CHECK(std::sqrt(norm2) == doctest::Approx(8.0).epsilon(1e-4));
}

TEST_CASE("arrival times follow the configured process") {
    WorkloadSpec spec;
    spec.n_requests = 6;
    spec.dim = 4;
    spec.block_size = 8;
    spec.context_min = spec.context_max = 8;
    spec.decode_steps = 1;
    spec.seed = 3;

    spec.arrival_rate = 0.0;
    for (const auto& req : generate_workload(spec)) CHECK(req.arrival_s == 0.0);

    spec.arrival_rate = 4.0;
    const auto reqs = generate_workload(spec);
    CHECK(reqs[0].arrival_s == 0.0);
    for (std::size_t r = 1; r < reqs.size(); ++r) {
        CHECK(reqs[r].arrival_s > reqs[r - 1].arrival_s);
    }
}

TEST_CASE("percentile is nearest-rank") {
    CHECK(percentile({4, 1, 3, 2}, 50.0) == 2.0);
    CHECK(percentile({4, 1, 3, 2}, 75.0) == 3.0);
    CHECK(percentile({4, 1, 3, 2}, 100.0) == 4.0);
    CHECK(percentile({4, 1, 3, 2}, 0.0) == 1.0);
    CHECK(percentile({7.5}, 99.0) == 7.5);
    std::vector<double> hundred;
    for (int i = 1; i <= 100; ++i) hundred.push_back(i);
    CHECK(percentile(hundred, 99.0) == 99.0);
    CHECK(percentile(hundred, 50.0) == 50.0);
    CHECK_THROWS_AS((void)percentile({}, 50.0), Error);
    CHECK_THROWS_AS((void)percentile({1.0}, -1.0), Error);
    CHECK_THROWS_AS((void)percentile({1.0}, 100.5), Error);
}

TEST_CASE("serving TBT equals the hand-computed cost model") {
    PSAConfig cfg;
    cfg.microbatch_size = 1;
    cfg.block_size = 4;

    // Two blocks, one layer, two steps, microbatch 1: each step runs two
    // one-block iterations. With load cost pinned to 1 ms (hit and miss
    // alike) and compute at 0.5 ms/block, a step costs 2 x 1.5 = 3 ms when
    // alternating, and 2.5 ms when the second load hides under the first
    // compute.
    ServingConfig costs;
    costs.miss_cost_ms = 1.0;
    costs.hit_cost_ms = 1.0;
    costs.compute_cost_ms = 0.5;

    for (bool overlap : {false, true}) {
        CAPTURE(overlap);
        Rng rng(60);
        std::vector<Request> reqs;
        reqs.push_back(make_request(rng, 0, 0.0, 2, 1, 2, 4, 8, 0));
        costs.overlap = overlap;
        const ServingReport rep =
            run_serving(reqs, cfg, unified(1), costs, MethodSpec::exact());
        const double expected = overlap ? 2.5 : 3.0;
        REQUIRE(rep.tbt_ms.size() == 2);
        CHECK(rep.tbt_ms[0] == expected);
        CHECK(rep.tbt_ms[1] == expected);
        CHECK(rep.sim_time_ms == 2 * expected);
        CHECK(rep.completed_requests == 1);
        CHECK(rep.capacity_checks == 3);  // one admission + two step ends
        REQUIRE(rep.calls.size() == 2);
        CHECK(rep.calls[0].blocks_processed == 2);  // exact processes everything
        CHECK(rep.calls[0].total_blocks == 2);
    }

    // With room for both blocks, every load hits the write-allocated pool:
    // steps cost only the compute.
    {
        Rng rng(60);
        std::vector<Request> reqs;
        reqs.push_back(make_request(rng, 0, 0.0, 2, 1, 2, 4, 8, 0));
        ServingConfig free_hits = costs;
        free_hits.hit_cost_ms = 0.0;
        free_hits.overlap = false;
        const ServingReport rep =
            run_serving(reqs, cfg, unified(2), free_hits, MethodSpec::exact());
        CHECK(rep.tbt_ms[0] == 1.0);
        CHECK(rep.tbt_ms[1] == 1.0);
        CHECK(rep.store_stats.hits == 4);
        CHECK(rep.store_stats.misses == 0);
    }
}

TEST_CASE("FCFS admission serializes when reservations fill the pool") {
    // Each request reserves microbatch x layers = 2 slots; capacity 2 admits
    // exactly one at a time, so execution is strictly first come, first
    // served even though all three arrive at t = 0.
    PSAConfig cfg;
    cfg.microbatch_size = 2;
    cfg.block_size = 4;

    Rng rng(61);
    std::vector<Request> reqs;
    for (RequestId id = 0; id < 3; ++id) {
        reqs.push_back(make_request(rng, id, 0.0, 1, 1, 2, 4, 8, 10 * id));
    }
    const ServingReport rep =
        run_serving(reqs, cfg, unified(2), ServingConfig{}, MethodSpec::exact());

    CHECK(rep.admission_order == std::vector<RequestId>{0, 1, 2});
    CHECK(rep.completed_requests == 3);
    REQUIRE(rep.calls.size() == 3);  // 3 requests x 1 step x 1 layer
    // Serialized: every call of request i precedes every call of request i+1.
    CHECK(rep.calls[0].request_id == 0);
    CHECK(rep.calls[1].request_id == 1);
    CHECK(rep.calls[2].request_id == 2);
    CHECK(rep.capacity_checks == 6);  // 3 admissions + 3 step ends
}

TEST_CASE("admission waits for arrival even when capacity is free") {
    PSAConfig cfg;
    cfg.microbatch_size = 1;
    cfg.block_size = 4;
    ServingConfig costs;
    costs.miss_cost_ms = 1.0;
    costs.hit_cost_ms = 1.0;
    costs.compute_cost_ms = 0.5;
    costs.overlap = false;

    Rng rng(62);
    std::vector<Request> reqs;
    reqs.push_back(make_request(rng, 0, 0.0, 1, 1, 2, 4, 8, 0));
    reqs.push_back(make_request(rng, 1, 0.05, 1, 1, 2, 4, 8, 10));  // arrives at 50 ms

    const ServingReport rep = run_serving(reqs, cfg, unified(64), costs, MethodSpec::exact());
    // Request 0 finishes at 3 ms; the loop then idles until 50 ms and serves
    // request 1 for another 3 ms.
    CHECK(rep.tbt_ms == std::vector<double>{3.0, 3.0});
    CHECK(rep.sim_time_ms == 53.0);
    CHECK(rep.admission_order == std::vector<RequestId>{0, 1});
}

TEST_CASE("lockstep batching serves simultaneous requests together") {
    WorkloadSpec spec;
    spec.n_requests = 2;
    spec.dim = 16;
    spec.block_size = 8;
    spec.n_layers = 2;
    spec.context_min = spec.context_max = 32;  // 4 blocks per layer
    spec.decode_steps = 3;
    spec.seed = 5;
    const auto reqs = generate_workload(spec);

    PSAConfig cfg;
    cfg.epsilon = 0.9;
    cfg.microbatch_size = 2;
    cfg.block_size = 8;
    cfg.audit_coverage = true;
    cfg.ranking_mode = RankingMode::Oracle;

    const ServingReport rep =
        run_serving(reqs, cfg, unified(64), ServingConfig{}, MethodSpec::psa(0.9));
    CHECK(rep.admission_order == std::vector<RequestId>{0, 1});
    CHECK(rep.completed_requests == 2);
    CHECK(rep.calls.size() == 2u * 3u * 2u);  // requests x steps x layers
    CHECK(rep.tbt_ms.size() == 2u * 3u);      // requests x steps
    CHECK(rep.capacity_checks > 0);
    for (const auto& call : rep.calls) {
        CHECK(call.blocks_processed >= 1);
        CHECK(call.blocks_processed <= call.total_blocks);
        CHECK(call.total_blocks == 4);
        REQUIRE(call.true_coverage.has_value());
        CHECK(*call.true_coverage >= 0.9 - 1e-12);  // oracle ranking guarantee
    }
    // Both live requests experience the same lockstep step cost.
    CHECK(rep.tbt_ms[0] == rep.tbt_ms[1]);
}

TEST_CASE("top-k serving honors the block budget") {
    Rng rng(63);
    std::vector<Request> reqs;
    reqs.push_back(make_request(rng, 0, 0.0, 2, 1, 4, 4, 8, 0));
    PSAConfig cfg;
    cfg.microbatch_size = 2;
    cfg.block_size = 4;

    const ServingReport rep =
        run_serving(reqs, cfg, unified(16), ServingConfig{}, MethodSpec::topk(2));
    for (const auto& call : rep.calls) {
        CHECK(call.blocks_processed == 2);
        CHECK(call.total_blocks == 4);
    }

    CHECK_THROWS_AS((void)run_serving(reqs, cfg, unified(16), ServingConfig{},
                                      MethodSpec::topk(0)),
                    Error);
}

TEST_CASE("serving rejects impossible or inconsistent inputs") {
    PSAConfig cfg;
    cfg.microbatch_size = 8;
    cfg.block_size = 4;
    Rng rng(64);

    std::vector<Request> reqs;
    reqs.push_back(make_request(rng, 0, 0.0, 1, 1, 10, 4, 8, 0));
    // One microbatch (8 slots) cannot fit a 4-slot pool, ever.
    try {
        (void)run_serving(reqs, cfg, unified(4), ServingConfig{}, MethodSpec::exact());
        FAIL("expected unschedulable request error");
    } catch (const Error& err) {
        CHECK(std::string(err.what()).find("unschedulable request") != std::string::npos);
    }

    CHECK_THROWS_AS((void)run_serving({}, cfg, unified(64), ServingConfig{},
                                      MethodSpec::exact()),
                    Error);

    // Mixed layer counts across requests.
    PSAConfig small;
    small.microbatch_size = 1;
    small.block_size = 4;
    std::vector<Request> mixed;
    mixed.push_back(make_request(rng, 0, 0.0, 1, 1, 2, 4, 8, 0));
    mixed.push_back(make_request(rng, 1, 0.0, 1, 2, 2, 4, 8, 10));
    CHECK_THROWS_AS((void)run_serving(mixed, small, unified(64), ServingConfig{},
                                      MethodSpec::exact()),
                    Error);
}
