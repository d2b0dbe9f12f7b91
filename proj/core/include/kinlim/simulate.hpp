#pragma once

#include "kinlim/microdyn.hpp"
#include "kinlim/parallel.hpp"

#include <memory>
#include <utility>
#include <vector>

namespace kinlim {

struct SimulationPlan {
    long trajectories = 1000;
    std::uint64_t seed = 1;
    int threads = 1;
    StopCriterion stop;
    long chunk = 64;
    bool store_events = false;
};

// Runs plan.trajectories independent trajectories; trajectory i starts from
// sample_initial_state with the stream derive_seed(plan.seed, i). Acc needs
// sink() -> EventSink and finish(const TrajectoryRecord&). Chunk results are
// merged in index order, so the outcome is independent of plan.threads.
template <class Acc, class Make, class Merge>
Acc simulate_ensemble(const ScattererConfig& config, const ScatteringModel& model, const SimulationPlan& plan,
                      Make&& make, Merge&& merge) {
    if (plan.trajectories < 0) throw ValidationError("trajectory count must be >= 0");
    struct Part {
        Acc acc;
        std::unique_ptr<CollisionFinder> finder;
    };
    auto make_part = [&]() { return Part{make(), nullptr}; };
    auto body = [&](Part& part, long i) {
        if (!part.finder) {
            const KickPotential* kick = std::get_if<KickPotential>(&model);
            part.finder = std::make_unique<CollisionFinder>(
                config, kick ? std::optional<KickPotential>(*kick) : std::nullopt);
        }
        Rng rng(derive_seed(plan.seed, static_cast<std::uint64_t>(i)));
        const ParticleState s0 = sample_initial_state(config, model, rng);
        const TrajectoryRecord rec =
            run_trajectory(*part.finder, model, s0, plan.stop, part.acc.sink(), plan.store_events);
        part.acc.finish(rec);
    };
    auto merge_part = [&](Part& total, const Part& p) { merge(total.acc, p.acc); };
    Part out = chunked_reduce<Part>(plan.trajectories, plan.chunk, plan.threads, make_part, body, merge_part);
    return std::move(out.acc);
}

// Keeps whole trajectory records (with events when plan.store_events is set).
struct RecordCollector {
    std::vector<TrajectoryRecord> records;
    EventSink sink() { return {}; }
    void finish(const TrajectoryRecord& rec) { records.push_back(rec); }
    void merge(const RecordCollector& other) {
        records.insert(records.end(), other.records.begin(), other.records.end());
    }
};

}  // namespace kinlim
