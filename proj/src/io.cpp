#include "sbd/io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace sbd {

namespace {

using ordered_json = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& origin, const std::string& what) {
    throw std::runtime_error(origin + ": " + what);
}

ordered_json parse_line(const std::string& line, const std::string& origin,
                        std::size_t line_no) {
    try {
        return ordered_json::parse(line);
    } catch (const ordered_json::exception& e) {
        fail(origin, "line " + std::to_string(line_no) + " is not valid JSON: " + e.what());
    }
}

ordered_json reason_to_json(const std::optional<BoundaryReason>& reason) {
    if (!reason) return nullptr;
    return std::string(to_string(*reason));
}

std::optional<BoundaryReason> reason_from_json(const ordered_json& value,
                                               const std::string& origin) {
    if (value.is_null()) return std::nullopt;
    const auto parsed = boundary_reason_from_string(value.get<std::string>());
    if (!parsed) fail(origin, "unknown boundary reason '" + value.get<std::string>() + "'");
    return parsed;
}

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) lines.push_back(line);
    }
    return lines;
}

}  // namespace

std::string serialize_trajectory(const Trajectory& traj) {
    std::string out;
    ordered_json header;
    header["id"] = traj.id;
    header["obs_vocab"] = traj.obs_vocab;
    header["act_vocab"] = traj.act_vocab;
    out += header.dump();
    out += '\n';
    for (const Step& step : traj.steps) {
        ordered_json rec;
        rec["t"] = step.index;
        rec["obs"] = step.obs;
        rec["act"] = step.act;
        rec["events"] = step.events;  // std::set serializes sorted
        rec["skill"] = step.skill ? ordered_json(*step.skill) : ordered_json(nullptr);
        out += rec.dump();
        out += '\n';
    }
    return out;
}

Trajectory parse_trajectory(const std::string& text, const std::string& origin) {
    const std::vector<std::string> lines = split_lines(text);
    if (lines.empty()) fail(origin, "empty trajectory file");

    const ordered_json header = parse_line(lines[0], origin, 1);
    Trajectory traj;
    try {
        traj.id = header.at("id").get<std::string>();
        traj.obs_vocab = header.at("obs_vocab").get<Token>();
        traj.act_vocab = header.at("act_vocab").get<Token>();
        for (std::size_t i = 1; i < lines.size(); ++i) {
            const ordered_json rec = parse_line(lines[i], origin, i + 1);
            Step step;
            step.index = rec.at("t").get<std::int64_t>();
            step.obs = rec.at("obs").get<Token>();
            step.act = rec.at("act").get<Token>();
            for (const auto& e : rec.at("events")) step.events.insert(e.get<std::string>());
            if (rec.contains("skill") && !rec.at("skill").is_null())
                step.skill = rec.at("skill").get<int>();
            traj.steps.push_back(std::move(step));
        }
    } catch (const ordered_json::exception& e) {
        fail(origin, std::string("bad trajectory record: ") + e.what());
    }
    return traj;
}

void write_trajectory(const std::filesystem::path& path, const Trajectory& traj) {
    write_text_file(path, serialize_trajectory(traj));
}

Trajectory read_trajectory(const std::filesystem::path& path) {
    return parse_trajectory(read_text_file(path), path.string());
}

void write_corpus(const std::filesystem::path& dir, std::span<const Trajectory> corpus) {
    std::filesystem::create_directories(dir);
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "traj_%06zu.jsonl", i);
        write_trajectory(dir / name, corpus[i]);
    }
}

std::vector<Trajectory> read_corpus(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir))
        throw std::runtime_error("not a directory: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".jsonl" &&
            entry.path().filename().string().rfind("traj_", 0) == 0)
            files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty())
        throw std::runtime_error("no traj_*.jsonl files in " + dir.string());
    std::vector<Trajectory> corpus;
    corpus.reserve(files.size());
    for (const auto& file : files) corpus.push_back(read_trajectory(file));
    return corpus;
}

std::vector<SegmentRecord> segment_records(const std::vector<Segment>& segments,
                                           const BoundarySet& boundaries) {
    if (segments.size() != boundaries.boundaries.size() + 1)
        throw std::invalid_argument("segment_records: segments do not match boundaries");
    std::vector<SegmentRecord> records;
    records.reserve(segments.size());
    for (std::size_t i = 0; i < segments.size(); ++i) {
        SegmentRecord rec;
        rec.segment = segments[i];
        if (i > 0) rec.reason = boundaries.boundaries[i - 1].reason;
        records.push_back(std::move(rec));
    }
    return records;
}

void write_segments(const std::filesystem::path& path,
                    std::span<const SegmentRecord> records) {
    std::string out;
    for (const auto& rec : records) {
        ordered_json j;
        j["trajectory_id"] = rec.segment.trajectory_id;
        j["start"] = rec.segment.start;
        j["end"] = rec.segment.end;
        j["reason"] = reason_to_json(rec.reason);
        out += j.dump();
        out += '\n';
    }
    write_text_file(path, out);
}

std::vector<SegmentRecord> read_segments(const std::filesystem::path& path) {
    const std::vector<std::string> lines = split_lines(read_text_file(path));
    std::vector<SegmentRecord> records;
    records.reserve(lines.size());
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const ordered_json j = parse_line(lines[i], path.string(), i + 1);
        SegmentRecord rec;
        try {
            rec.segment.trajectory_id = j.at("trajectory_id").get<std::string>();
            rec.segment.start = j.at("start").get<std::int64_t>();
            rec.segment.end = j.at("end").get<std::int64_t>();
            rec.reason = reason_from_json(j.at("reason"), path.string());
        } catch (const ordered_json::exception& e) {
            fail(path.string(), std::string("bad segment record: ") + e.what());
        }
        records.push_back(std::move(rec));
    }
    return records;
}

void write_boundaries(const std::filesystem::path& path,
                      std::span<const BoundarySet> sets) {
    std::string out;
    for (const auto& set : sets) {
        for (const auto& b : set.boundaries) {
            ordered_json j;
            j["trajectory_id"] = set.trajectory_id;
            j["index"] = b.index;
            j["reason"] = reason_to_json(b.reason);
            out += j.dump();
            out += '\n';
        }
    }
    write_text_file(path, out);
}

std::vector<BoundarySet> read_boundaries(const std::filesystem::path& path) {
    const std::vector<std::string> lines = split_lines(read_text_file(path));
    std::vector<BoundarySet> sets;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const ordered_json j = parse_line(lines[i], path.string(), i + 1);
        try {
            const std::string id = j.at("trajectory_id").get<std::string>();
            if (sets.empty() || sets.back().trajectory_id != id) {
                sets.push_back({id, {}});
            }
            sets.back().boundaries.push_back(
                {j.at("index").get<std::int64_t>(),
                 reason_from_json(j.at("reason"), path.string())});
        } catch (const ordered_json::exception& e) {
            fail(path.string(), std::string("bad boundary record: ") + e.what());
        }
    }
    return sets;
}

void write_loss_trace(const std::filesystem::path& path, std::span<const StepLoss> losses,
                      const BoundarySet& boundaries) {
    std::string out;
    std::size_t next = 0;
    for (const StepLoss& sl : losses) {
        std::optional<BoundaryReason> reason;
        bool is_boundary = false;
        if (next < boundaries.boundaries.size() &&
            boundaries.boundaries[next].index == sl.index) {
            is_boundary = true;
            reason = boundaries.boundaries[next].reason;
            ++next;
        }
        ordered_json j;
        j["t"] = sl.index;
        j["loss"] = sl.loss;
        j["boundary"] = is_boundary;
        j["reason"] = reason_to_json(reason);
        out += j.dump();
        out += '\n';
    }
    write_text_file(path, out);
}

void write_histogram_csv(const std::filesystem::path& path, const Histogram& hist) {
    std::string out = "bin_low,bin_high,count\n";
    for (std::size_t i = 0; i < hist.counts.size(); ++i) {
        ordered_json lo = hist.edges[i];
        ordered_json hi = hist.edges[i + 1];
        out += lo.dump() + "," + hi.dump() + "," + std::to_string(hist.counts[i]) + "\n";
    }
    write_text_file(path, out);
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << text;
    if (!out) throw std::runtime_error("failed writing: " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return std::move(buf).str();
}

}  // namespace sbd
