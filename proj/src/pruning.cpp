#include "sbd/pruning.hpp"

#include <stdexcept>

namespace sbd {

namespace {

void check_config(const PruneConfig& cfg) {
    if (cfg.min_len <= 0 || cfg.max_len <= 0)
        throw std::invalid_argument("prune: min_len and max_len must be positive");
    if (cfg.min_len > cfg.max_len)
        throw std::invalid_argument("prune: min_len must be <= max_len");
}

}  // namespace

PrunedLengths prune_lengths(std::span<const std::int64_t> lengths, const PruneConfig& cfg) {
    check_config(cfg);
    if (lengths.empty())
        throw std::invalid_argument("prune_lengths: input is empty");

    PrunedLengths out;
    std::int64_t acc = 0;
    std::int64_t pieces_in_acc = 0;  // distinct inputs feeding the accumulator
    for (std::int64_t len : lengths) {
        if (len <= 0)
            throw std::out_of_range("prune_lengths: lengths must be positive");
        acc += len;
        pieces_in_acc += 1;
        while (acc >= cfg.min_len) {
            const std::int64_t emit = std::min(acc, cfg.max_len);
            out.lengths.push_back(emit);
            if (pieces_in_acc >= 2) out.merged_count += 1;
            acc -= emit;
            // A positive remainder is the start of the next accumulator and
            // still belongs to the input piece that overflowed.
            pieces_in_acc = acc > 0 ? 1 : 0;
        }
    }
    if (acc > 0) {
        if (cfg.tail_policy == TailPolicy::keep_flagged) {
            out.lengths.push_back(acc);
            out.tail_flagged = true;
            if (pieces_in_acc >= 2) out.merged_count += 1;
        } else {
            out.dropped_tail = acc;
        }
    }
    return out;
}

PrunedSegments prune_segments(std::span<const Segment> segments, const PruneConfig& cfg) {
    check_config(cfg);
    if (segments.empty())
        throw std::invalid_argument("prune_segments: input is empty");

    PrunedSegments out;
    std::size_t group_begin = 0;
    while (group_begin < segments.size()) {
        std::size_t group_end = group_begin + 1;
        while (group_end < segments.size() &&
               segments[group_end].trajectory_id == segments[group_begin].trajectory_id)
            ++group_end;

        std::vector<std::int64_t> lengths;
        lengths.reserve(group_end - group_begin);
        for (std::size_t i = group_begin; i < group_end; ++i) {
            const Segment& seg = segments[i];
            if (seg.start >= seg.end)
                throw std::invalid_argument("prune_segments: empty segment in " +
                                            seg.trajectory_id);
            if (i > group_begin && seg.start != segments[i - 1].end)
                throw std::invalid_argument(
                    "prune_segments: segments not contiguous in " + seg.trajectory_id);
            lengths.push_back(seg.length());
        }

        const PrunedLengths pruned = prune_lengths(lengths, cfg);
        std::int64_t cursor = segments[group_begin].start;
        for (std::int64_t len : pruned.lengths) {
            out.segments.push_back({segments[group_begin].trajectory_id, cursor, cursor + len});
            cursor += len;
        }
        out.dropped_tail_steps += pruned.dropped_tail;
        out.merged_count += pruned.merged_count;
        out.tail_flagged = out.tail_flagged || pruned.tail_flagged;
        group_begin = group_end;
    }
    out.emitted = static_cast<std::int64_t>(out.segments.size());
    return out;
}

}  // namespace sbd
