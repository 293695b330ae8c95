#include "psattn/serving.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <string>

#include "psattn/pipeline.hpp"

namespace psattn {

double percentile(std::vector<double> samples, double p) {
    if (samples.empty()) throw Error("percentile: empty sample set");
    if (p < 0.0 || p > 100.0) throw Error("percentile: p out of range");
    std::sort(samples.begin(), samples.end());
    if (p == 0.0) return samples.front();
    const auto rank = static_cast<std::size_t>(
        std::ceil(p / 100.0 * static_cast<double>(samples.size())));
    return samples[rank - 1];
}

namespace {

struct LiveRequest {
    Request req;
    std::int32_t step = 0;
};

// Slot demand of one live request under the admission rule: one microbatch
// per layer must be resident simultaneously.
struct Admission {
    const StoreOptions* opts;
    std::size_t microbatch;
    std::size_t n_layers;
    std::size_t reserved_unified = 0;
    std::vector<std::size_t> reserved_per_layer;

    Admission(const StoreOptions& o, std::size_t m, std::size_t layers)
        : opts(&o), microbatch(m), n_layers(layers), reserved_per_layer(layers, 0) {}

    std::size_t layer_capacity() const {
        return static_cast<std::size_t>(opts->fast_capacity_slots) /
               (opts->policy == PoolPolicy::LayerPartitioned ? n_layers : 1);
    }

    bool solo_fits() const {
        if (opts->policy == PoolPolicy::Unified)
            return microbatch * n_layers <= static_cast<std::size_t>(opts->fast_capacity_slots);
        return microbatch <= layer_capacity();
    }

    bool fits() const {
        if (opts->policy == PoolPolicy::Unified)
            return reserved_unified + microbatch * n_layers <=
                   static_cast<std::size_t>(opts->fast_capacity_slots);
        for (std::size_t l = 0; l < n_layers; ++l)
            if (reserved_per_layer[l] + microbatch > layer_capacity()) return false;
        return true;
    }

    void reserve() {
        reserved_unified += microbatch * n_layers;
        for (auto& r : reserved_per_layer) r += microbatch;
    }

    void unreserve() {
        reserved_unified -= microbatch * n_layers;
        for (auto& r : reserved_per_layer) r -= microbatch;
    }

    void assert_within_capacity() const {
        bool ok = true;
        if (opts->policy == PoolPolicy::Unified) {
            ok = reserved_unified <= static_cast<std::size_t>(opts->fast_capacity_slots);
        } else {
            for (std::size_t l = 0; l < n_layers; ++l)
                ok = ok && reserved_per_layer[l] <= layer_capacity();
        }
        if (!ok) throw Error("serving: admitted reservations exceed fast-pool capacity");
    }
};

// Converts one layer execution's iteration sequence into simulated load and
// compute cost series for the pipeline model.
void iteration_costs(const std::vector<IterationStats>& iterations, const ServingConfig& cfg,
                     std::vector<double>& load_ms, std::vector<double>& compute_ms) {
    load_ms.clear();
    compute_ms.clear();
    load_ms.reserve(iterations.size());
    compute_ms.reserve(iterations.size());
    for (const auto& it : iterations) {
        load_ms.push_back(static_cast<double>(it.misses) * cfg.miss_cost_ms +
                          static_cast<double>(it.hits) * cfg.hit_cost_ms);
        compute_ms.push_back(static_cast<double>(it.blocks) * cfg.compute_cost_ms);
    }
}

}  // namespace

ServingReport run_serving(const std::vector<Request>& requests, const PSAConfig& engine_cfg,
                          const StoreOptions& store_opts, const ServingConfig& serving_cfg,
                          const MethodSpec& method) {
    if (requests.empty()) throw Error("serving: empty request list");
    engine_cfg.validate();

    PSAConfig cfg = engine_cfg;
    if (method.kind == MethodSpec::Kind::PSA) cfg.epsilon = method.epsilon;
    if (method.kind == MethodSpec::Kind::Exact) cfg.epsilon = 1.0;
    if (method.kind == MethodSpec::Kind::TopK && method.k == 0)
        throw Error("serving: top-k method needs k >= 1");
    cfg.validate();

    const std::size_t n_layers = requests[0].layer_blocks.size();
    for (const auto& r : requests)
        if (r.layer_blocks.size() != n_layers)
            throw Error("serving: requests disagree on layer count");

    StoreOptions opts = store_opts;
    opts.n_layers = static_cast<std::int32_t>(n_layers);
    TieredBlockStore store(opts);

    Admission admission(opts, static_cast<std::size_t>(cfg.microbatch_size), n_layers);
    for (const auto& r : requests)
        if (!admission.solo_fits())
            throw Error("unschedulable request " + std::to_string(r.request_id) +
                        ": one microbatch per layer does not fit the fast pool");

    std::deque<const Request*> pending;
    for (const auto& r : requests) pending.push_back(&r);
    std::vector<LiveRequest> live;

    ServingReport report;
    double now_ms = 0.0;

    std::vector<double> load_series, compute_series;

    while (!pending.empty() || !live.empty()) {
        // FCFS head-only admission: later requests never jump an earlier one
        // that is still waiting for capacity.
        while (!pending.empty() && pending.front()->arrival_s * 1000.0 <= now_ms &&
               admission.fits()) {
            const Request* next = pending.front();
            pending.pop_front();
            admission.reserve();
            admission.assert_within_capacity();
            ++report.capacity_checks;
            for (const auto& block : next->blocks) store.put_block(block, next->request_id);
            live.push_back({*next, 0});
            report.admission_order.push_back(next->request_id);
        }

        if (live.empty()) {
            if (pending.empty()) break;
            // Idle until the next arrival.
            now_ms = std::max(now_ms, pending.front()->arrival_s * 1000.0);
            continue;
        }

        // One decode step for every live request, layer by layer.
        double step_cost_ms = 0.0;
        for (std::size_t l = 0; l < n_layers; ++l) {
            std::vector<IterationStats> layer_iterations;
            std::vector<PSAResult> results;

            if (method.kind == MethodSpec::Kind::TopK) {
                for (const auto& lr : live) {
                    const auto& ids = lr.req.layer_blocks[l];
                    PSAResult res =
                        topk_attention(lr.req.step_queries[static_cast<std::size_t>(lr.step)][l],
                                       ids, method.k, cfg, store);
                    layer_iterations.insert(layer_iterations.end(), res.iterations.begin(),
                                            res.iterations.end());
                    results.push_back(std::move(res));
                }
            } else {
                std::vector<HeadVector> queries;
                std::vector<std::vector<BlockId>> block_lists;
                queries.reserve(live.size());
                block_lists.reserve(live.size());
                for (const auto& lr : live) {
                    queries.push_back(lr.req.step_queries[static_cast<std::size_t>(lr.step)][l]);
                    block_lists.push_back(lr.req.layer_blocks[l]);
                }
                BatchResult batch = psa_attention_batched(queries, block_lists, cfg, store);
                layer_iterations = std::move(batch.rounds);
                results = std::move(batch.results);
            }

            iteration_costs(layer_iterations, serving_cfg, load_series, compute_series);
            const PipelineModel model = simulate_pipeline(load_series, compute_series);
            report.model_sequential_ms += model.sequential_ms;
            report.model_pipelined_ms += model.pipelined_ms;
            step_cost_ms += serving_cfg.overlap ? model.pipelined_ms : model.sequential_ms;

            for (std::size_t i = 0; i < live.size(); ++i) {
                const PSAResult& res = results[i];
                report.calls.push_back({live[i].req.request_id, live[i].step,
                                        static_cast<std::int32_t>(l), res.blocks_processed,
                                        res.total_blocks, res.estimated_coverage,
                                        res.true_coverage});
            }
        }

        now_ms += step_cost_ms;
        for (auto& lr : live) {
            lr.req.tbt_ms.push_back(step_cost_ms);
            report.tbt_ms.push_back(step_cost_ms);
            ++lr.step;
        }

        // Retire finished requests and free their reservations and blocks.
        for (auto it = live.begin(); it != live.end();) {
            if (it->step >= it->req.decode_steps) {
                store.release_request(it->req.request_id);
                admission.unreserve();
                ++report.completed_requests;
                it = live.erase(it);
            } else {
                ++it;
            }
        }
        admission.assert_within_capacity();
        ++report.capacity_checks;
    }

    report.store_stats = store.stats();
    report.sim_time_ms = now_ms;
    return report;
}

}  // namespace psattn
