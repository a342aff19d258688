#pragma once
// Streaming skill-boundary detector and the event-indicator preprocessor.
//
// Per step: compute the predictive loss of the ground-truth action, append
// it to the history of the current segment, and open a new segment when the
// loss exceeds the running mean (which includes the step's own loss) by more
// than `gap`, or when the step carries an external indicator. At a boundary
// the model context is cleared and the boundary step becomes the first
// context element of the next segment.

#include <cstdint>
#include <span>
#include <vector>

#include "sbd/predictor.hpp"
#include "sbd/types.hpp"

namespace sbd {

/// One boolean per step: does external information mark this step as a
/// likely boundary.
struct IndicatorTrack {
    std::vector<std::uint8_t> flags;

    std::int64_t size() const { return static_cast<std::int64_t>(flags.size()); }
    bool at(std::int64_t i) const { return flags[static_cast<std::size_t>(i)] != 0; }
};

/// Flag the last step of each maximal run of consecutive equal non-empty
/// event sets. Steps with empty event sets are never flagged and terminate
/// runs. A step carrying a kill_entity event flags
/// min(step + kill_offset, T-1) instead of itself (the death animation
/// belongs to the same segment).
IndicatorTrack mark_event_indicators(const Trajectory& traj, std::int64_t kill_offset);

struct DetectionResult {
    BoundarySet boundaries;
    std::vector<StepLoss> losses;  // full per-step trace, for diagnostics
};

/// Streaming pass over the trajectory with a freshly reset model.
/// Indicators must have one flag per step. A boundary is never emitted at
/// step 0 (the loss excess there is identically zero and an empty leading
/// segment would be meaningless).
DetectionResult detect_boundaries(const Trajectory& traj, PredictorModel& model,
                                  const DetectorConfig& cfg,
                                  const IndicatorTrack& indicators);

struct TrajectorySegmentation {
    BoundarySet boundaries;
    std::vector<Segment> segments;
    std::vector<StepLoss> losses;
};

/// mark_event_indicators + detect_boundaries + segments_from_boundaries for
/// each trajectory independently. Trajectories are distributed over
/// `workers` threads, each with its own model clone; results are ordered by
/// input position regardless of scheduling.
std::vector<TrajectorySegmentation> segment_corpus(std::span<const Trajectory> corpus,
                                                   const PredictorModel& model,
                                                   const DetectorConfig& cfg,
                                                   unsigned workers = 1);

}  // namespace sbd
