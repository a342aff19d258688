#pragma once
// JSON Lines file formats.
//
// Trajectory: header {"id","obs_vocab","act_vocab"} then one record per step
//   {"t","obs","act","events":[...],"skill":int|null}.
// Segments:   {"trajectory_id","start","end","reason":string|null} where
//   reason is the trigger of the boundary that opened the segment.
// Boundaries: {"trajectory_id","index","reason":string|null}.
// Loss trace: {"t","loss","boundary":bool,"reason":string|null}.
//
// All writers emit deterministic bytes for identical inputs. Filesystem and
// parse failures throw std::runtime_error.

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sbd/analysis.hpp"
#include "sbd/predictor.hpp"
#include "sbd/types.hpp"

namespace sbd {

std::string serialize_trajectory(const Trajectory& traj);
Trajectory parse_trajectory(const std::string& text, const std::string& origin = "<string>");

void write_trajectory(const std::filesystem::path& path, const Trajectory& traj);
Trajectory read_trajectory(const std::filesystem::path& path);

/// One trajectory per file, named traj_NNNNNN.jsonl; existing files with the
/// same names are overwritten.
void write_corpus(const std::filesystem::path& dir, std::span<const Trajectory> corpus);

/// Every *.jsonl trajectory file in the directory, sorted by filename.
std::vector<Trajectory> read_corpus(const std::filesystem::path& dir);

struct SegmentRecord {
    Segment segment;
    std::optional<BoundaryReason> reason;  // null for the first segment
};

/// Segments of one trajectory paired with the reasons of their opening
/// boundaries (boundaries.size() + 1 == segments.size()).
std::vector<SegmentRecord> segment_records(const std::vector<Segment>& segments,
                                           const BoundarySet& boundaries);

void write_segments(const std::filesystem::path& path, std::span<const SegmentRecord> records);
std::vector<SegmentRecord> read_segments(const std::filesystem::path& path);

/// Boundary sets per trajectory, one JSONL record per boundary.
void write_boundaries(const std::filesystem::path& path, std::span<const BoundarySet> sets);
std::vector<BoundarySet> read_boundaries(const std::filesystem::path& path);

void write_loss_trace(const std::filesystem::path& path, std::span<const StepLoss> losses,
                      const BoundarySet& boundaries);

/// Histogram as CSV rows (bin_low, bin_high, count) with a header line.
void write_histogram_csv(const std::filesystem::path& path, const Histogram& hist);

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace sbd
