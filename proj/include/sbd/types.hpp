#pragma once
// Domain types shared by every module: trajectories, events, boundaries,
// segments and detector configuration. All of them are plain value objects;
// once constructed they are safe to share across threads.

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace sbd {

using Token = std::uint32_t;

/// Events are strings of the form "category:item" ("mine_block:oak_log").
/// Set semantics: equality is order- and duplicate-insensitive.
using EventSet = std::set<std::string>;

/// Category prefix of an event string (everything before the first ':',
/// or the whole string when there is no ':').
std::string_view event_category(std::string_view event);

/// True if any event in the set has the given category.
bool has_category(const EventSet& events, std::string_view category);

struct Step {
    std::int64_t index = 0;
    Token obs = 0;
    Token act = 0;
    EventSet events;
    std::optional<int> skill;  // ground truth, synthetic corpora only
};

struct Trajectory {
    std::string id;
    Token obs_vocab = 0;
    Token act_vocab = 0;
    std::vector<Step> steps;

    std::int64_t length() const { return static_cast<std::int64_t>(steps.size()); }
};

enum class BoundaryReason { loss, event, both };

std::string_view to_string(BoundaryReason reason);
std::optional<BoundaryReason> boundary_reason_from_string(std::string_view s);

struct Boundary {
    std::int64_t index = 0;
    std::optional<BoundaryReason> reason;  // unset for ground-truth boundaries
};

struct BoundarySet {
    std::string trajectory_id;
    std::vector<Boundary> boundaries;  // strictly increasing indices in (0, T)

    std::vector<std::int64_t> indices() const;
};

/// Half-open index range [start, end) into a trajectory. The boundary step
/// belongs to the segment it opens.
struct Segment {
    std::string trajectory_id;
    std::int64_t start = 0;
    std::int64_t end = 0;

    std::int64_t length() const { return end - start; }
};

struct DetectorConfig {
    double gap = 0.0;                     // loss threshold above running mean, nats
    std::int64_t window = 4096;           // model context cap, steps
    std::int64_t min_event_offset = 16;   // shift applied to terminal (kill) events
    bool use_loss = true;
    bool use_events = true;
};

/// Partition [0, traj_len) at the boundary indices: [0,b1), [b1,b2), ...,
/// [bk, traj_len). Throws std::out_of_range if a boundary falls outside
/// (0, traj_len), std::invalid_argument if indices are not strictly increasing.
std::vector<Segment> segments_from_boundaries(std::int64_t traj_len,
                                              const BoundarySet& bounds);

struct ValidationReport {
    std::vector<std::string> violations;

    bool ok() const { return violations.empty(); }
};

/// Structural check: non-empty, contiguous 0-based indices, vocab bounds.
/// Violations are data, not failures; never throws.
ValidationReport validate_trajectory(const Trajectory& traj);

}  // namespace sbd
