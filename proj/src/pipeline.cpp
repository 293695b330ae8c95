#include "psattn/pipeline.hpp"

#include <chrono>
#include <condition_variable>
#include <mutex>
#include <thread>

namespace psattn {

namespace {

using Clock = std::chrono::steady_clock;

double ms_between(Clock::time_point a, Clock::time_point b) {
    return std::chrono::duration<double, std::milli>(b - a).count();
}

void pad_sleep(double ms) {
    if (ms > 0.0) std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(ms));
}

void finish_timings(PipelineTimings& t) {
    t.sequential_equiv_ms = 0.0;
    for (double v : t.load_ms) t.sequential_equiv_ms += v;
    for (double v : t.compute_ms) t.sequential_equiv_ms += v;
    t.overlap_efficiency =
        t.total_wall_ms > 0.0 ? t.sequential_equiv_ms / t.total_wall_ms : 1.0;
}

}  // namespace

ExecutionResult run_sequential(std::span<const float> q, std::span<const BlockId> block_ids,
                               const PSAConfig& cfg, TieredBlockStore& store,
                               const PipelineOptions& opts) {
    const RankedPlan plan = plan_blocks(q, block_ids, cfg, store);
    ProgressiveRun run(q, plan, cfg);

    ExecutionResult out;
    const auto start = Clock::now();
    while (!run.finished()) {
        const auto t0 = Clock::now();
        LoadedBatch batch = load_microbatch(store, plan, run.cursor(), run.next_microbatch_size());
        const auto t1 = Clock::now();
        run.consume(batch.blocks, batch.hits, batch.misses);
        pad_sleep(opts.compute_pad_ms);
        const auto t2 = Clock::now();
        out.timings.load_ms.push_back(ms_between(t0, t1));
        out.timings.compute_ms.push_back(ms_between(t1, t2));
    }
    out.timings.total_wall_ms = ms_between(start, Clock::now());
    finish_timings(out.timings);
    out.result = run.result();
    return out;
}

namespace {

// Depth-1 hand-off between the loader and compute agents. The loader claims
// the empty slot before it starts a load, so at most one loaded microbatch
// can ever be waiting (and thus at most one is wasted on early stop).
struct HandoffSlot {
    std::mutex mutex;
    std::condition_variable cv;
    bool full = false;
    bool loader_done = false;
    LoadedBatch batch;
    double load_ms = 0.0;
};

}  // namespace

ExecutionResult run_pipelined(std::span<const float> q, std::span<const BlockId> block_ids,
                              const PSAConfig& cfg, TieredBlockStore& store,
                              const PipelineOptions& opts) {
    const RankedPlan plan = plan_blocks(q, block_ids, cfg, store);
    ProgressiveRun run(q, plan, cfg);
    const std::size_t total = plan.ranked_ids.size();
    const std::size_t mb = static_cast<std::size_t>(cfg.microbatch_size);

    HandoffSlot slot;
    StopSignal stop;

    ExecutionResult out;
    const auto start = Clock::now();

    std::thread loader([&] {
        std::size_t cursor = 0;
        while (cursor < total) {
            {
                std::unique_lock lk(slot.mutex);
                slot.cv.wait(lk, [&] { return !slot.full || stop.raised(); });
            }
            if (stop.raised()) break;
            const std::size_t count = std::min(mb, total - cursor);
            const auto t0 = Clock::now();
            LoadedBatch batch = load_microbatch(store, plan, cursor, count);
            const auto t1 = Clock::now();
            cursor += count;
            // A stop that arrived mid-load means this batch is the one
            // allowed in-flight load; drop it instead of publishing.
            if (stop.raised()) break;
            {
                std::lock_guard lk(slot.mutex);
                slot.batch = std::move(batch);
                slot.load_ms = ms_between(t0, t1);
                slot.full = true;
            }
            slot.cv.notify_all();
        }
        {
            std::lock_guard lk(slot.mutex);
            slot.loader_done = true;
        }
        slot.cv.notify_all();
    });

    while (!run.finished()) {
        LoadedBatch batch;
        double load_ms = 0.0;
        {
            std::unique_lock lk(slot.mutex);
            slot.cv.wait(lk, [&] { return slot.full || slot.loader_done; });
            if (!slot.full) break;  // loader quit without a batch pending
            batch = std::move(slot.batch);
            load_ms = slot.load_ms;
            slot.full = false;
        }
        slot.cv.notify_all();  // slot freed: loader may start the next prefetch

        const auto t0 = Clock::now();
        run.consume(batch.blocks, batch.hits, batch.misses);
        pad_sleep(opts.compute_pad_ms);
        const auto t1 = Clock::now();
        out.timings.load_ms.push_back(load_ms);
        out.timings.compute_ms.push_back(ms_between(t0, t1));

        if (run.finished()) {
            stop.raise();
            slot.cv.notify_all();
        }
    }
    // Defensive: guarantee the loader can always exit, whatever path got here.
    stop.raise();
    slot.cv.notify_all();
    loader.join();

    out.timings.total_wall_ms = ms_between(start, Clock::now());
    finish_timings(out.timings);
    out.result = run.result();
    return out;
}

PipelineModel simulate_pipeline(std::span<const double> load_ms,
                                std::span<const double> compute_ms) {
    if (load_ms.size() != compute_ms.size())
        throw Error("simulate_pipeline: load/compute series length mismatch");
    PipelineModel model;
    double load_finish = 0.0;     // when the current batch's load completes
    double compute_finish = 0.0;  // when the previous batch's compute completes
    double slot_freed = 0.0;      // when compute takes the current batch
    for (std::size_t i = 0; i < load_ms.size(); ++i) {
        // Loader may start load i once the slot was emptied (compute took
        // batch i-1); compute starts batch i when load i is done and batch
        // i-1 has finished computing.
        load_finish = (i == 0 ? 0.0 : slot_freed) + load_ms[i];
        const double compute_start = std::max(load_finish, compute_finish);
        slot_freed = compute_start;
        compute_finish = compute_start + compute_ms[i];
        model.sequential_ms += load_ms[i] + compute_ms[i];
    }
    model.pipelined_ms = compute_finish;
    model.overlap_efficiency =
        model.pipelined_ms > 0.0 ? model.sequential_ms / model.pipelined_ms : 1.0;
    return model;
}

}  // namespace psattn
