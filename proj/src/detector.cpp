#include "sbd/detector.hpp"

#include <atomic>
#include <cmath>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace sbd {

IndicatorTrack mark_event_indicators(const Trajectory& traj, std::int64_t kill_offset) {
    if (kill_offset < 0)
        throw std::invalid_argument("mark_event_indicators: kill_offset must be >= 0");
    const std::int64_t n = traj.length();
    IndicatorTrack track;
    track.flags.assign(static_cast<std::size_t>(n), 0);
    if (n == 0) return track;

    // Last step of each maximal run of equal non-empty event sets.
    for (std::int64_t t = 0; t < n; ++t) {
        const EventSet& cur = traj.steps[static_cast<std::size_t>(t)].events;
        if (cur.empty()) continue;
        const bool run_ends =
            t + 1 == n || traj.steps[static_cast<std::size_t>(t + 1)].events != cur;
        if (run_ends) track.flags[static_cast<std::size_t>(t)] = 1;
    }

    // Kill events: the flag moves to min(t + offset, T-1) instead of t.
    std::vector<std::int64_t> targets;
    for (std::int64_t t = 0; t < n; ++t) {
        if (has_category(traj.steps[static_cast<std::size_t>(t)].events, "kill_entity"))
            targets.push_back(std::min(t + kill_offset, n - 1));
    }
    for (std::int64_t t = 0; t < n; ++t) {
        if (has_category(traj.steps[static_cast<std::size_t>(t)].events, "kill_entity"))
            track.flags[static_cast<std::size_t>(t)] = 0;
    }
    for (std::int64_t target : targets) track.flags[static_cast<std::size_t>(target)] = 1;
    return track;
}

DetectionResult detect_boundaries(const Trajectory& traj, PredictorModel& model,
                                  const DetectorConfig& cfg,
                                  const IndicatorTrack& indicators) {
    if (!cfg.use_loss && !cfg.use_events)
        throw std::invalid_argument(
            "detect_boundaries: at least one of use_loss/use_events must be on");
    if (cfg.gap < 0.0)
        throw std::invalid_argument("detect_boundaries: gap must be >= 0");
    if (indicators.size() != traj.length())
        throw std::invalid_argument("detect_boundaries: indicator length " +
                                    std::to_string(indicators.size()) +
                                    " != trajectory length " +
                                    std::to_string(traj.length()));

    model.reset();
    DetectionResult result;
    result.boundaries.trajectory_id = traj.id;
    result.losses.reserve(traj.steps.size());

    double loss_mean = 0.0;
    std::int64_t loss_count = 0;
    for (const Step& step : traj.steps) {
        const double loss = step_loss(model, step.obs, step.act);
        result.losses.push_back({step.index, loss});
        loss_count += 1;
        // Incremental mean including the loss just appended (exact for a
        // constant loss sequence, where the excess must be identically zero).
        loss_mean += (loss - loss_mean) / static_cast<double>(loss_count);

        const bool loss_hit = cfg.use_loss && loss - loss_mean > cfg.gap;
        const bool event_hit = cfg.use_events && indicators.at(step.index);
        if ((loss_hit || event_hit) && step.index > 0) {
            const BoundaryReason reason = loss_hit && event_hit ? BoundaryReason::both
                                          : loss_hit           ? BoundaryReason::loss
                                                               : BoundaryReason::event;
            result.boundaries.boundaries.push_back({step.index, reason});
            loss_mean = 0.0;
            loss_count = 0;
            model.reset();
        }
        // The boundary step opens the next segment's context.
        model.observe(step.obs, step.act);
    }
    return result;
}

std::vector<TrajectorySegmentation> segment_corpus(std::span<const Trajectory> corpus,
                                                   const PredictorModel& model,
                                                   const DetectorConfig& cfg,
                                                   unsigned workers) {
    std::vector<TrajectorySegmentation> results(corpus.size());
    if (corpus.empty()) return results;
    workers = std::max(1u, std::min<unsigned>(workers, corpus.size()));

    std::atomic<std::size_t> cursor{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto run = [&]() {
        auto local = model.clone();
        local->set_context_cap(cfg.window);
        for (;;) {
            const std::size_t i = cursor.fetch_add(1);
            if (i >= corpus.size() || failed.load()) return;
            try {
                const Trajectory& traj = corpus[i];
                const IndicatorTrack track =
                    mark_event_indicators(traj, cfg.min_event_offset);
                DetectionResult det = detect_boundaries(traj, *local, cfg, track);
                TrajectorySegmentation& out = results[i];
                out.segments = segments_from_boundaries(traj.length(), det.boundaries);
                out.boundaries = std::move(det.boundaries);
                out.losses = std::move(det.losses);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!failed.exchange(true)) first_error = std::current_exception();
                return;
            }
        }
    };

    if (workers == 1) {
        run();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run);
        for (auto& t : pool) t.join();
    }
    if (failed.load()) std::rethrow_exception(first_error);
    return results;
}

}  // namespace sbd
