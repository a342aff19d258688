#pragma once
// Greedy length pruning: consecutive segments are merged until the
// accumulator reaches min_len, emitted capped at max_len, and any overflow
// carries into the next accumulator. A final accumulator below min_len is
// dropped (default) or emitted flagged for audit.

#include <cstdint>
#include <span>
#include <vector>

#include "sbd/types.hpp"

namespace sbd {

enum class TailPolicy { drop, keep_flagged };

struct PruneConfig {
    std::int64_t min_len = 15;
    std::int64_t max_len = 200;
    TailPolicy tail_policy = TailPolicy::drop;
};

struct PrunedLengths {
    std::vector<std::int64_t> lengths;
    std::int64_t dropped_tail = 0;   // steps in a dropped undersized tail
    bool tail_flagged = false;       // last emitted length is an undersized tail
    std::int64_t merged_count = 0;   // outputs drawing from >= 2 input pieces
};

/// Sum of output lengths plus dropped_tail always equals the input sum.
/// Throws std::invalid_argument on bad config, std::out_of_range on a
/// non-positive input length.
PrunedLengths prune_lengths(std::span<const std::int64_t> lengths, const PruneConfig& cfg);

struct PrunedSegments {
    std::vector<Segment> segments;
    std::int64_t dropped_tail_steps = 0;
    std::int64_t emitted = 0;
    std::int64_t merged_count = 0;
    bool tail_flagged = false;
};

/// prune_lengths lifted to contiguous half-open ranges. Input segments must
/// be grouped by trajectory id and contiguous within each group (the output
/// of segments_from_boundaries); each trajectory is pruned independently.
PrunedSegments prune_segments(std::span<const Segment> segments, const PruneConfig& cfg);

}  // namespace sbd
