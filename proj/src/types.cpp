#include "sbd/types.hpp"

#include <stdexcept>

namespace sbd {

std::string_view event_category(std::string_view event) {
    const auto pos = event.find(':');
    return pos == std::string_view::npos ? event : event.substr(0, pos);
}

bool has_category(const EventSet& events, std::string_view category) {
    for (const auto& e : events) {
        if (event_category(e) == category) return true;
    }
    return false;
}

std::string_view to_string(BoundaryReason reason) {
    switch (reason) {
        case BoundaryReason::loss: return "loss";
        case BoundaryReason::event: return "event";
        case BoundaryReason::both: return "both";
    }
    return "loss";
}

std::optional<BoundaryReason> boundary_reason_from_string(std::string_view s) {
    if (s == "loss") return BoundaryReason::loss;
    if (s == "event") return BoundaryReason::event;
    if (s == "both") return BoundaryReason::both;
    return std::nullopt;
}

std::vector<std::int64_t> BoundarySet::indices() const {
    std::vector<std::int64_t> out;
    out.reserve(boundaries.size());
    for (const auto& b : boundaries) out.push_back(b.index);
    return out;
}

std::vector<Segment> segments_from_boundaries(std::int64_t traj_len,
                                              const BoundarySet& bounds) {
    if (traj_len <= 0)
        throw std::invalid_argument("segments_from_boundaries: traj_len must be positive");

    std::int64_t prev = 0;
    std::vector<Segment> out;
    out.reserve(bounds.boundaries.size() + 1);
    for (const auto& b : bounds.boundaries) {
        if (b.index <= 0 || b.index >= traj_len)
            throw std::out_of_range("segments_from_boundaries: boundary index " +
                                    std::to_string(b.index) + " outside (0, " +
                                    std::to_string(traj_len) + ")");
        if (b.index <= prev && !out.empty())
            throw std::invalid_argument(
                "segments_from_boundaries: boundary indices must be strictly increasing");
        out.push_back({bounds.trajectory_id, prev, b.index});
        prev = b.index;
    }
    out.push_back({bounds.trajectory_id, prev, traj_len});
    return out;
}

ValidationReport validate_trajectory(const Trajectory& traj) {
    ValidationReport report;
    if (traj.steps.empty()) {
        report.violations.push_back("empty trajectory");
        return report;
    }
    if (traj.obs_vocab == 0)
        report.violations.push_back("obs_vocab must be positive");
    if (traj.act_vocab == 0)
        report.violations.push_back("act_vocab must be positive");
    for (std::size_t i = 0; i < traj.steps.size(); ++i) {
        const Step& s = traj.steps[i];
        if (s.index != static_cast<std::int64_t>(i))
            report.violations.push_back("index gap at position " + std::to_string(i) +
                                        ": expected " + std::to_string(i) + ", got " +
                                        std::to_string(s.index));
        if (s.obs >= traj.obs_vocab)
            report.violations.push_back("obs out of vocab at step " + std::to_string(i));
        if (s.act >= traj.act_vocab)
            report.violations.push_back("act out of vocab at step " + std::to_string(i));
    }
    return report;
}

}  // namespace sbd
