// sbd: skill boundary discovery pipeline.
//
// Subcommands: generate, train, calibrate, segment, prune, evaluate,
// verify-bounds. Every subcommand is a pure function of (input files,
// resolved config, seed); reruns produce byte-identical outputs. The
// fully-resolved config is written next to the outputs of each run.
//
// Exit codes: 0 success, 2 config/validation error, 3 I/O error,
// 4 verification failure (verify-bounds only).

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "sbd/analysis.hpp"
#include "sbd/detector.hpp"
#include "sbd/io.hpp"
#include "sbd/predictor.hpp"
#include "sbd/pruning.hpp"
#include "sbd/rng.hpp"
#include "sbd/synth.hpp"
#include "sbd/types.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitVerification = 4;

// Section of the optional --config file; flags passed on the command line
// take precedence over values found here.
class ConfigSection {
public:
    ConfigSection() = default;
    ConfigSection(json root, std::string name) : root_(std::move(root)) {
        if (root_.contains(name)) section_ = root_.at(name);
    }

    template <typename T>
    void apply(const char* key, T& target) const {
        if (section_.contains(key)) target = section_.at(key).get<T>();
    }

    const json& raw() const { return section_; }

private:
    json root_;
    json section_ = json::object();
};

json load_config_root(int argc, char** argv) {
    for (int i = 1; i + 1 < argc; ++i) {
        if (std::string(argv[i]) == "--config") {
            const std::string text = sbd::read_text_file(argv[i + 1]);
            try {
                return json::parse(text);
            } catch (const json::exception& e) {
                throw std::invalid_argument(std::string("bad --config file: ") + e.what());
            }
        }
    }
    return json::object();
}

unsigned default_workers() {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

void write_json_file(const fs::path& path, const ordered_json& doc) {
    sbd::write_text_file(path, doc.dump(2) + "\n");
}

ordered_json obs_process_to_json(const sbd::ObsProcess& p) {
    switch (p.kind) {
        case sbd::ObsProcess::Kind::iid_uniform: return "iid_uniform";
        case sbd::ObsProcess::Kind::markov: return "markov";
        case sbd::ObsProcess::Kind::prev_action_echo: return "prev_action_echo";
    }
    return "iid_uniform";
}

sbd::ObsProcess obs_process_from_name(const std::string& name,
                                      const std::vector<std::vector<double>>& matrix) {
    if (name == "iid_uniform" || name == "iid") return sbd::ObsProcess::iid();
    if (name == "prev_action_echo" || name == "echo") return sbd::ObsProcess::echo();
    if (name == "markov") {
        if (matrix.empty())
            throw std::invalid_argument(
                "obs process 'markov' needs markov_matrix in the config file");
        return sbd::ObsProcess::markov(matrix);
    }
    throw std::invalid_argument("unknown obs process '" + name +
                                "' (expected iid_uniform, markov or prev_action_echo)");
}

ordered_json generator_config_json(const sbd::GeneratorConfig& cfg, std::int64_t n) {
    ordered_json doc;
    doc["n"] = n;
    doc["horizon"] = cfg.horizon;
    doc["K"] = cfg.K;
    doc["c"] = cfg.c;
    doc["delta"] = cfg.delta;
    doc["m"] = cfg.m;
    doc["obs_vocab"] = cfg.obs_vocab;
    doc["act_vocab"] = cfg.act_vocab;
    doc["n_skills"] = cfg.n_skills;
    doc["obs_process"] = obs_process_to_json(cfg.obs_process);
    if (cfg.obs_process.kind == sbd::ObsProcess::Kind::markov)
        doc["markov_matrix"] = cfg.obs_process.transition;
    doc["enforce_deviance"] = cfg.enforce_deviance;
    doc["p_event"] = cfg.p_event;
    doc["secondary_share"] = cfg.secondary_share;
    doc["seed"] = cfg.seed;
    return doc;
}

sbd::GeneratorConfig generator_config_from_json(const json& doc) {
    sbd::GeneratorConfig cfg;
    cfg.horizon = doc.at("horizon").get<std::int64_t>();
    cfg.K = doc.at("K").get<double>();
    cfg.c = doc.at("c").get<double>();
    cfg.delta = doc.at("delta").get<double>();
    cfg.m = doc.at("m").get<double>();
    cfg.obs_vocab = doc.at("obs_vocab").get<sbd::Token>();
    cfg.act_vocab = doc.at("act_vocab").get<sbd::Token>();
    cfg.n_skills = doc.at("n_skills").get<int>();
    std::vector<std::vector<double>> matrix;
    if (doc.contains("markov_matrix"))
        matrix = doc.at("markov_matrix").get<std::vector<std::vector<double>>>();
    cfg.obs_process = obs_process_from_name(doc.at("obs_process").get<std::string>(), matrix);
    cfg.enforce_deviance = doc.at("enforce_deviance").get<bool>();
    cfg.p_event = doc.at("p_event").get<double>();
    if (doc.contains("secondary_share"))
        cfg.secondary_share = doc.at("secondary_share").get<double>();
    cfg.seed = doc.at("seed").get<std::uint64_t>();
    return cfg;
}

// ---------------------------------------------------------------------------

struct GenerateArgs {
    std::int64_t n = 10;
    std::int64_t horizon = 1000;
    double K = 100.0;
    double c = 0.9;
    double delta = 0.01;
    double m = 0.05;
    sbd::Token obs_vocab = 8;
    sbd::Token act_vocab = 8;
    int n_skills = 2;
    std::string obs_process = "iid_uniform";
    std::vector<std::vector<double>> markov_matrix;
    bool enforce_deviance = true;
    double p_event = 0.5;
    double secondary_share = 0.0;
    std::uint64_t seed = 0;
    std::string out = "out/generate";
};

int run_generate(const GenerateArgs& args) {
    sbd::GeneratorConfig cfg;
    cfg.K = args.K;
    cfg.c = args.c;
    cfg.delta = args.delta;
    cfg.m = args.m;
    cfg.obs_vocab = args.obs_vocab;
    cfg.act_vocab = args.act_vocab;
    cfg.n_skills = args.n_skills;
    cfg.horizon = args.horizon;
    cfg.seed = args.seed;
    cfg.obs_process = obs_process_from_name(args.obs_process, args.markov_matrix);
    cfg.enforce_deviance = args.enforce_deviance;
    cfg.p_event = args.p_event;
    cfg.secondary_share = args.secondary_share;
    cfg.validate();
    if (args.n < 1) throw std::invalid_argument("generate: --n must be >= 1");

    const std::vector<sbd::LabeledTrajectory> corpus = sbd::generate_corpus(cfg, args.n);
    std::vector<sbd::Trajectory> plain;
    plain.reserve(corpus.size());
    for (const auto& lt : corpus) plain.push_back(lt.trajectory);

    const fs::path out(args.out);
    sbd::write_corpus(out, plain);
    write_json_file(out / "generate_config.json", generator_config_json(cfg, args.n));
    std::cout << "wrote " << corpus.size() << " trajectories to " << out.string() << "\n";
    return kExitOk;
}

struct TrainArgs {
    std::string in;
    int order = 1;
    double alpha = 1.0;
    std::string out = "out/train";
};

int run_train(const TrainArgs& args) {
    if (args.in.empty()) throw std::invalid_argument("train: --in is required");
    const std::vector<sbd::Trajectory> corpus = sbd::read_corpus(args.in);
    const sbd::CountPredictor model =
        sbd::train_count_predictor(corpus, args.order, args.alpha);

    const fs::path out(args.out);
    fs::create_directories(out);
    sbd::save_count_predictor(out / "model.json", model);
    ordered_json doc;
    doc["in"] = args.in;
    doc["order"] = args.order;
    doc["alpha"] = args.alpha;
    doc["obs_vocab"] = model.obs_vocab();
    doc["act_vocab"] = model.act_vocab();
    doc["trajectories"] = corpus.size();
    write_json_file(out / "train_config.json", doc);
    std::cout << "trained on " << corpus.size() << " trajectories, model at "
              << (out / "model.json").string() << "\n";
    return kExitOk;
}

struct CalibrateArgs {
    std::string in;
    std::string model;
    double quantile = 0.999;
    std::int64_t window = 4096;
    std::string out = "out/calibrate";
};

int run_calibrate(const CalibrateArgs& args) {
    if (args.in.empty()) throw std::invalid_argument("calibrate: --in is required");
    if (args.model.empty()) throw std::invalid_argument("calibrate: --model is required");
    const std::vector<sbd::Trajectory> corpus = sbd::read_corpus(args.in);
    const sbd::CountPredictor model = sbd::load_count_predictor(args.model);
    const sbd::CalibrationResult result =
        sbd::calibrate_gap(corpus, model, args.quantile, args.window);

    const fs::path out(args.out);
    ordered_json doc;
    doc["gap"] = result.gap;
    doc["degenerate"] = result.degenerate;
    doc["n_excesses"] = result.n_excesses;
    doc["quantile"] = args.quantile;
    doc["window"] = args.window;
    doc["model"] = args.model;
    doc["in"] = args.in;
    write_json_file(out / "calibration.json", doc);
    std::cout << "gap = " << result.gap
              << (result.degenerate ? " (warning: degenerate excess distribution)" : "")
              << "\n";
    return kExitOk;
}

struct SegmentArgs {
    std::string in;
    std::string model;
    std::string mode = "both";
    std::optional<double> gap;
    std::int64_t window = 4096;
    std::int64_t kill_offset = 16;
    bool emit_trace = false;
    std::uint64_t seed = 0;
    unsigned workers = default_workers();
    std::string out = "out/segment";
};

int run_segment(const SegmentArgs& args) {
    if (args.in.empty()) throw std::invalid_argument("segment: --in is required");
    const std::vector<sbd::Trajectory> corpus = sbd::read_corpus(args.in);
    const fs::path out(args.out);
    fs::create_directories(out);

    std::vector<sbd::SegmentRecord> all_segments;
    std::vector<sbd::BoundarySet> all_boundaries;

    std::string mode = args.mode;
    if (mode.rfind("fixed:", 0) == 0 || mode.rfind("uniform:", 0) == 0) {
        sbd::BaselineStrategy strategy;
        if (mode.rfind("fixed:", 0) == 0) {
            strategy = sbd::BaselineStrategy::fixed(std::stoll(mode.substr(6)));
        } else {
            const std::string spec = mode.substr(8);
            const auto colon = spec.find(':');
            if (colon == std::string::npos)
                throw std::invalid_argument("segment: uniform mode is uniform:MIN:MAX");
            strategy = sbd::BaselineStrategy::uniform(std::stoll(spec.substr(0, colon)),
                                                      std::stoll(spec.substr(colon + 1)), 0);
        }
        for (std::size_t i = 0; i < corpus.size(); ++i) {
            const sbd::Trajectory& traj = corpus[i];
            sbd::BaselineStrategy per_traj = strategy;
            per_traj.seed = sbd::derive_seed(args.seed, "baseline.uniform", i);
            const sbd::BoundarySet bounds =
                sbd::baseline_segment(traj.length(), per_traj, traj.id);
            const auto segments = sbd::segments_from_boundaries(traj.length(), bounds);
            const auto records = sbd::segment_records(segments, bounds);
            all_segments.insert(all_segments.end(), records.begin(), records.end());
            all_boundaries.push_back(bounds);
        }
    } else {
        sbd::DetectorConfig cfg;
        cfg.window = args.window;
        cfg.min_event_offset = args.kill_offset;
        if (mode == "loss") {
            cfg.use_loss = true;
            cfg.use_events = false;
        } else if (mode == "info") {
            cfg.use_loss = false;
            cfg.use_events = true;
        } else if (mode == "both") {
            cfg.use_loss = true;
            cfg.use_events = true;
        } else {
            throw std::invalid_argument("segment: unknown mode '" + mode + "'");
        }
        if (cfg.use_loss) {
            // No silent default: the threshold depends on the predictor's
            // loss scale (see the calibrate subcommand).
            if (!args.gap)
                throw std::invalid_argument(
                    "segment: --gap is required for loss-based modes; run calibrate "
                    "to derive one");
            cfg.gap = *args.gap;
        }

        std::unique_ptr<sbd::PredictorModel> model;
        if (!args.model.empty()) {
            model = std::make_unique<sbd::CountPredictor>(
                sbd::load_count_predictor(args.model));
        } else if (!cfg.use_loss) {
            // Indicator-only runs do not depend on the model's predictions;
            // use a uniform stub so the diagnostic trace is still defined.
            model = std::make_unique<sbd::CountPredictor>(
                0, 1.0, corpus.front().obs_vocab, corpus.front().act_vocab);
        } else {
            throw std::invalid_argument("segment: --model is required for mode '" + mode +
                                        "'");
        }

        const std::vector<sbd::TrajectorySegmentation> results =
            sbd::segment_corpus(corpus, *model, cfg, args.workers);
        for (std::size_t i = 0; i < results.size(); ++i) {
            const auto records =
                sbd::segment_records(results[i].segments, results[i].boundaries);
            all_segments.insert(all_segments.end(), records.begin(), records.end());
            all_boundaries.push_back(results[i].boundaries);
            if (args.emit_trace)
                sbd::write_loss_trace(out / ("trace_" + corpus[i].id + ".jsonl"),
                                      results[i].losses, results[i].boundaries);
        }
    }

    sbd::write_segments(out / "segments.jsonl", all_segments);
    sbd::write_boundaries(out / "boundaries.jsonl", all_boundaries);

    ordered_json doc;
    doc["in"] = args.in;
    doc["model"] = args.model;
    doc["mode"] = args.mode;
    if (args.gap) doc["gap"] = *args.gap;
    doc["window"] = args.window;
    doc["kill_offset"] = args.kill_offset;
    doc["emit_trace"] = args.emit_trace;
    doc["seed"] = args.seed;
    write_json_file(out / "segment_config.json", doc);

    std::size_t n_bounds = 0;
    for (const auto& b : all_boundaries) n_bounds += b.boundaries.size();
    std::cout << "segmented " << corpus.size() << " trajectories into "
              << all_segments.size() << " segments (" << n_bounds << " boundaries)\n";
    return kExitOk;
}

struct PruneArgs {
    std::string in;
    std::int64_t min_len = 15;
    std::int64_t max_len = 200;
    std::string tail = "drop";
    std::string out = "out/prune";
};

int run_prune(const PruneArgs& args) {
    if (args.in.empty()) throw std::invalid_argument("prune: --in is required");
    sbd::PruneConfig cfg;
    cfg.min_len = args.min_len;
    cfg.max_len = args.max_len;
    if (args.tail == "drop")
        cfg.tail_policy = sbd::TailPolicy::drop;
    else if (args.tail == "keep")
        cfg.tail_policy = sbd::TailPolicy::keep_flagged;
    else
        throw std::invalid_argument("prune: --tail must be 'drop' or 'keep'");

    const std::vector<sbd::SegmentRecord> records = sbd::read_segments(args.in);
    std::vector<sbd::Segment> segments;
    segments.reserve(records.size());
    for (const auto& rec : records) segments.push_back(rec.segment);

    const sbd::PrunedSegments pruned = sbd::prune_segments(segments, cfg);
    std::vector<sbd::SegmentRecord> out_records;
    out_records.reserve(pruned.segments.size());
    for (const auto& seg : pruned.segments) out_records.push_back({seg, std::nullopt});

    const fs::path out(args.out);
    sbd::write_segments(out / "pruned_segments.jsonl", out_records);
    ordered_json report;
    report["dropped_tail_steps"] = pruned.dropped_tail_steps;
    report["emitted"] = pruned.emitted;
    report["merged_count"] = pruned.merged_count;
    report["tail_flagged"] = pruned.tail_flagged;
    report["min_len"] = args.min_len;
    report["max_len"] = args.max_len;
    report["tail_policy"] = args.tail;
    write_json_file(out / "prune_report.json", report);
    std::cout << "pruned " << segments.size() << " segments into " << pruned.emitted
              << " (dropped tail steps: " << pruned.dropped_tail_steps << ")\n";
    return kExitOk;
}

struct EvaluateArgs {
    std::string segments;
    std::string truth;
    std::int64_t tolerance = 3;
    bool ablation = false;
    std::string model;
    std::optional<double> gap;
    std::int64_t baseline_len = 128;
    std::int64_t window = 4096;
    std::int64_t kill_offset = 16;
    unsigned workers = default_workers();
    std::string out = "out/evaluate";
};

ordered_json metrics_json(const sbd::AblationRow& row) {
    ordered_json j;
    j["mode"] = row.mode;
    j["precision"] = row.precision;
    j["recall"] = row.recall;
    j["f1"] = row.f1;
    j["predicted"] = row.predicted;
    j["truth"] = row.truth;
    j["matches"] = row.matches;
    return j;
}

int run_evaluate(const EvaluateArgs& args) {
    if (args.truth.empty()) throw std::invalid_argument("evaluate: --truth is required");
    if (args.ablation) {
        if (args.model.empty())
            throw std::invalid_argument("evaluate: --ablation needs --model");
        if (!args.gap) throw std::invalid_argument("evaluate: --ablation needs --gap");
    }
    const std::vector<sbd::Trajectory> plain = sbd::read_corpus(args.truth);
    std::vector<sbd::LabeledTrajectory> labeled;
    labeled.reserve(plain.size());
    for (const auto& traj : plain)
        labeled.push_back({traj, sbd::true_boundaries_of(traj)});

    const fs::path out(args.out);
    fs::create_directories(out);
    ordered_json report;
    report["tolerance"] = args.tolerance;
    {
        ordered_json inputs;
        inputs["truth"] = args.truth;
        inputs["ablation"] = args.ablation;
        if (args.ablation) {
            inputs["model"] = args.model;
            inputs["gap"] = *args.gap;
            inputs["baseline_len"] = args.baseline_len;
            inputs["window"] = args.window;
            inputs["kill_offset"] = args.kill_offset;
        } else {
            inputs["segments"] = args.segments;
        }
        report["inputs"] = std::move(inputs);
    }

    std::vector<sbd::Segment> segments_for_stats;

    if (args.ablation) {
        const sbd::CountPredictor model = sbd::load_count_predictor(args.model);
        sbd::DetectorConfig cfg;
        cfg.gap = *args.gap;
        cfg.window = args.window;
        cfg.min_event_offset = args.kill_offset;
        const std::vector<sbd::AblationRow> rows = sbd::run_ablation(
            labeled, model, cfg, args.baseline_len, args.tolerance, args.workers);
        auto table = ordered_json::array();
        for (const auto& row : rows) table.push_back(metrics_json(row));
        report["ablation"] = std::move(table);

        // Length stats over the "both" arm for the histogram output.
        cfg.use_loss = true;
        cfg.use_events = true;
        const auto segmented = sbd::segment_corpus(plain, model, cfg, args.workers);
        for (const auto& ts : segmented)
            segments_for_stats.insert(segments_for_stats.end(), ts.segments.begin(),
                                      ts.segments.end());
        for (const auto& row : rows) {
            std::printf("%-5s precision %.4f recall %.4f f1 %.4f\n", row.mode.c_str(),
                        row.precision, row.recall, row.f1);
        }
    } else {
        if (args.segments.empty())
            throw std::invalid_argument("evaluate: --segments is required");
        const std::vector<sbd::SegmentRecord> records = sbd::read_segments(args.segments);

        // Rebuild per-trajectory boundary sets from segment starts.
        std::int64_t matches = 0, predicted = 0, truth_count = 0;
        std::size_t i = 0;
        for (const auto& lt : labeled) {
            sbd::BoundarySet pred;
            pred.trajectory_id = lt.trajectory.id;
            while (i < records.size() &&
                   records[i].segment.trajectory_id == lt.trajectory.id) {
                if (records[i].segment.start > 0)
                    pred.boundaries.push_back({records[i].segment.start, records[i].reason});
                segments_for_stats.push_back(records[i].segment);
                ++i;
            }
            const sbd::BoundaryMetrics mm =
                sbd::boundary_metrics(pred, lt.true_boundaries, args.tolerance);
            matches += mm.matches;
            predicted += static_cast<std::int64_t>(pred.boundaries.size());
            truth_count += static_cast<std::int64_t>(lt.true_boundaries.boundaries.size());
        }
        if (i != records.size())
            throw std::invalid_argument(
                "evaluate: segments file does not line up with the truth corpus "
                "(unmatched trajectory ids or ordering)");
        sbd::AblationRow row;
        row.mode = "segments";
        row.matches = matches;
        row.predicted = predicted;
        row.truth = truth_count;
        row.precision =
            predicted == 0 ? 1.0 : static_cast<double>(matches) / predicted;
        row.recall = truth_count == 0 ? 1.0 : static_cast<double>(matches) / truth_count;
        row.f1 = row.precision + row.recall > 0.0
                     ? 2.0 * row.precision * row.recall / (row.precision + row.recall)
                     : 0.0;
        report["metrics"] = metrics_json(row);
        std::printf("precision %.4f recall %.4f f1 %.4f\n", row.precision, row.recall,
                    row.f1);
    }

    if (!segments_for_stats.empty()) {
        const sbd::LengthStats stats = sbd::length_stats(segments_for_stats);
        ordered_json lj;
        lj["count"] = stats.count;
        lj["mean_len"] = stats.mean_len;
        lj["std_len"] = stats.std_len;
        lj["mean_log"] = stats.mean_log;
        lj["std_log"] = stats.std_log;
        lj["skew_log"] = stats.skew_log;
        report["length_stats"] = std::move(lj);
        sbd::write_histogram_csv(out / "length_hist.csv", stats.hist);
    }
    write_json_file(out / "metrics.json", report);
    return kExitOk;
}

struct VerifyArgs {
    std::string in;
    std::string gen_config;
    std::optional<double> K, c, delta, m;
    std::int64_t min_bucket = 100;
    std::string out = "out/verify";
};

int run_verify(const VerifyArgs& args) {
    if (args.in.empty()) throw std::invalid_argument("verify-bounds: --in is required");
    if (args.gen_config.empty())
        throw std::invalid_argument(
            "verify-bounds: --gen-config (the generate run's provenance file) is required");

    const json gen_doc = json::parse(sbd::read_text_file(args.gen_config));
    const sbd::GeneratorConfig gen_cfg = generator_config_from_json(gen_doc);

    sbd::AssumptionParams params;
    params.K = args.K.value_or(gen_cfg.K);
    params.c = args.c.value_or(gen_cfg.c);
    params.delta = args.delta.value_or(gen_cfg.delta);
    params.m = args.m.value_or(gen_cfg.m);

    const std::vector<sbd::Trajectory> plain = sbd::read_corpus(args.in);
    std::vector<sbd::LabeledTrajectory> corpus;
    corpus.reserve(plain.size());
    for (const auto& traj : plain) corpus.push_back({traj, sbd::true_boundaries_of(traj)});

    sbd::MixtureOraclePredictor oracle(sbd::policy_tables(sbd::build_skill_library(gen_cfg)),
                                       gen_cfg.switch_prob());
    const sbd::BoundsReport report =
        sbd::verify_detection_bounds(corpus, oracle, params, args.min_bucket);

    ordered_json doc;
    doc["in"] = args.in;
    doc["gen_config"] = args.gen_config;
    doc["min_bucket"] = args.min_bucket;
    {
        ordered_json pj;
        pj["K"] = params.K;
        pj["c"] = params.c;
        pj["delta"] = params.delta;
        pj["m"] = params.m;
        doc["params"] = std::move(pj);
    }
    doc["lower_nontransition"] = report.bounds.lower_nontransition;
    doc["upper_transition"] = report.bounds.upper_transition;
    doc["separated"] = report.bounds.separated;
    ordered_json nt;
    nt["samples"] = report.nontransition_samples;
    nt["passes"] = report.nontransition_passes;
    nt["rate"] = report.nontransition_rate;
    nt["threshold"] = report.nontransition_threshold;
    nt["pass"] = report.nontransition_pass;
    doc["nontransition"] = std::move(nt);
    auto buckets = ordered_json::array();
    for (const auto& b : report.transition_buckets) {
        ordered_json bj;
        bj["age"] = b.age;
        bj["samples"] = b.samples;
        bj["passes"] = b.passes;
        bj["rate"] = b.rate;
        bj["threshold"] = b.threshold;
        bj["pass"] = b.pass;
        buckets.push_back(std::move(bj));
    }
    doc["transition_buckets"] = std::move(buckets);
    doc["excluded"] = report.excluded;
    doc["overall_pass"] = report.overall_pass;
    auto hist_json = [](const sbd::Histogram& h) {
        ordered_json hj;
        hj["edges"] = h.edges;
        hj["counts"] = h.counts;
        return hj;
    };
    doc["nontransition_hist"] = hist_json(report.nontransition_hist);
    doc["transition_hist"] = hist_json(report.transition_hist);
    write_json_file(fs::path(args.out) / "verify_report.json", doc);

    std::printf("nontransition: %lld/%lld pass (rate %.6f, threshold %.6f) -> %s\n",
                static_cast<long long>(report.nontransition_passes),
                static_cast<long long>(report.nontransition_samples),
                report.nontransition_rate, report.nontransition_threshold,
                report.nontransition_pass ? "pass" : "FAIL");
    std::printf("transition buckets >= %lld samples: %zu, all pass: %s\n",
                static_cast<long long>(args.min_bucket), report.transition_buckets.size(),
                report.overall_pass ? "yes" : "NO");
    return report.overall_pass ? kExitOk : kExitVerification;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"skill boundary discovery pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "JSON config file (flags override)")
        ->expected(1);

    json config_root;
    try {
        config_root = load_config_root(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }

    GenerateArgs gen;
    {
        const ConfigSection sec(config_root, "generate");
        sec.apply("n", gen.n);
        sec.apply("horizon", gen.horizon);
        sec.apply("K", gen.K);
        sec.apply("c", gen.c);
        sec.apply("delta", gen.delta);
        sec.apply("m", gen.m);
        sec.apply("obs_vocab", gen.obs_vocab);
        sec.apply("act_vocab", gen.act_vocab);
        sec.apply("n_skills", gen.n_skills);
        sec.apply("obs_process", gen.obs_process);
        sec.apply("markov_matrix", gen.markov_matrix);
        sec.apply("enforce_deviance", gen.enforce_deviance);
        sec.apply("p_event", gen.p_event);
        sec.apply("secondary_share", gen.secondary_share);
        sec.apply("seed", gen.seed);
        sec.apply("out", gen.out);
    }
    auto* cmd_gen = app.add_subcommand("generate", "sample a labeled synthetic corpus");
    cmd_gen->add_option("--n", gen.n, "number of trajectories");
    cmd_gen->add_option("--horizon", gen.horizon, "steps per trajectory");
    cmd_gen->add_option("--K", gen.K, "switch scale; switch prob is 1/K, 0 disables");
    cmd_gen->add_option("--c", gen.c, "skill confidence level");
    cmd_gen->add_option("--delta", gen.delta, "confidence slack probability");
    cmd_gen->add_option("--m", gen.m, "deviance bound");
    cmd_gen->add_option("--obs-vocab", gen.obs_vocab, "observation vocabulary size");
    cmd_gen->add_option("--act-vocab", gen.act_vocab, "action vocabulary size");
    cmd_gen->add_option("--n-skills", gen.n_skills, "skills in the library");
    cmd_gen->add_option("--obs-process", gen.obs_process,
                        "iid_uniform | markov | prev_action_echo");
    cmd_gen->add_flag("--enforce-deviance,!--no-enforce-deviance", gen.enforce_deviance,
                      "cap cross-skill dominant mass");
    cmd_gen->add_option("--p-event", gen.p_event, "event injection prob per boundary");
    cmd_gen->add_option("--secondary-share", gen.secondary_share,
                        "confidence-slack fraction on each skill's secondary action");
    cmd_gen->add_option("--seed", gen.seed, "base seed");
    cmd_gen->add_option("--out", gen.out, "output directory");

    TrainArgs train;
    {
        const ConfigSection sec(config_root, "train");
        sec.apply("in", train.in);
        sec.apply("order", train.order);
        sec.apply("alpha", train.alpha);
        sec.apply("out", train.out);
    }
    auto* cmd_train = app.add_subcommand("train", "fit the count predictor on a corpus");
    cmd_train->add_option("--in", train.in, "corpus directory");
    cmd_train->add_option("--order", train.order, "observation context length");
    cmd_train->add_option("--alpha", train.alpha, "additive smoothing constant");
    cmd_train->add_option("--out", train.out, "output directory");

    CalibrateArgs cal;
    {
        const ConfigSection sec(config_root, "calibrate");
        sec.apply("in", cal.in);
        sec.apply("model", cal.model);
        sec.apply("quantile", cal.quantile);
        sec.apply("window", cal.window);
        sec.apply("out", cal.out);
    }
    auto* cmd_cal = app.add_subcommand(
        "calibrate", "derive a gap from the excess-loss quantile of a reference corpus");
    cmd_cal->add_option("--in", cal.in, "calibration corpus directory");
    cmd_cal->add_option("--model", cal.model, "model file");
    cmd_cal->add_option("--quantile", cal.quantile, "target excess quantile in (0,1]");
    cmd_cal->add_option("--window", cal.window, "model context cap");
    cmd_cal->add_option("--out", cal.out, "output directory");

    SegmentArgs seg;
    {
        const ConfigSection sec(config_root, "segment");
        sec.apply("in", seg.in);
        sec.apply("model", seg.model);
        sec.apply("mode", seg.mode);
        if (sec.raw().contains("gap")) seg.gap = sec.raw().at("gap").get<double>();
        sec.apply("window", seg.window);
        sec.apply("kill_offset", seg.kill_offset);
        sec.apply("emit_trace", seg.emit_trace);
        sec.apply("seed", seg.seed);
        sec.apply("out", seg.out);
    }
    auto* cmd_seg = app.add_subcommand("segment", "detect boundaries and emit segments");
    cmd_seg->add_option("--in", seg.in, "corpus directory");
    cmd_seg->add_option("--model", seg.model, "model file");
    cmd_seg->add_option("--mode", seg.mode, "loss | info | both | fixed:L | uniform:MIN:MAX");
    double gap_flag = 0.0;
    auto* gap_opt = cmd_seg->add_option("--gap", gap_flag, "loss threshold in nats");
    cmd_seg->add_option("--window", seg.window, "model context cap");
    cmd_seg->add_option("--kill-offset", seg.kill_offset, "terminal event shift");
    cmd_seg->add_flag("--emit-trace", seg.emit_trace, "write per-step loss traces");
    cmd_seg->add_option("--seed", seg.seed, "seed for uniform baseline mode");
    cmd_seg->add_option("--workers", seg.workers, "worker threads");
    cmd_seg->add_option("--out", seg.out, "output directory");

    PruneArgs prune;
    {
        const ConfigSection sec(config_root, "prune");
        sec.apply("in", prune.in);
        sec.apply("min_len", prune.min_len);
        sec.apply("max_len", prune.max_len);
        sec.apply("tail", prune.tail);
        sec.apply("out", prune.out);
    }
    auto* cmd_prune = app.add_subcommand("prune", "merge/truncate segments to length bounds");
    cmd_prune->add_option("--in", prune.in, "segments.jsonl file");
    cmd_prune->add_option("--min-len", prune.min_len, "minimum segment length");
    cmd_prune->add_option("--max-len", prune.max_len, "maximum segment length");
    cmd_prune->add_option("--tail", prune.tail, "undersized tail policy: drop | keep");
    cmd_prune->add_option("--out", prune.out, "output directory");

    EvaluateArgs eval;
    {
        const ConfigSection sec(config_root, "evaluate");
        sec.apply("segments", eval.segments);
        sec.apply("truth", eval.truth);
        sec.apply("tolerance", eval.tolerance);
        sec.apply("ablation", eval.ablation);
        sec.apply("model", eval.model);
        if (sec.raw().contains("gap")) eval.gap = sec.raw().at("gap").get<double>();
        sec.apply("baseline_len", eval.baseline_len);
        sec.apply("window", eval.window);
        sec.apply("kill_offset", eval.kill_offset);
        sec.apply("out", eval.out);
    }
    auto* cmd_eval = app.add_subcommand("evaluate", "boundary metrics and length stats");
    cmd_eval->add_option("--segments", eval.segments, "segments.jsonl to score");
    cmd_eval->add_option("--truth", eval.truth, "labeled corpus directory");
    cmd_eval->add_option("--tolerance", eval.tolerance, "match tolerance in steps");
    cmd_eval->add_flag("--ablation", eval.ablation,
                       "run the none/info/loss/both table instead of scoring a file");
    cmd_eval->add_option("--model", eval.model, "model file (ablation)");
    double eval_gap_flag = 0.0;
    auto* eval_gap_opt = cmd_eval->add_option("--gap", eval_gap_flag, "gap (ablation)");
    cmd_eval->add_option("--baseline-len", eval.baseline_len, "fixed baseline length");
    cmd_eval->add_option("--window", eval.window, "model context cap");
    cmd_eval->add_option("--kill-offset", eval.kill_offset, "terminal event shift");
    cmd_eval->add_option("--workers", eval.workers, "worker threads");
    cmd_eval->add_option("--out", eval.out, "output directory");

    VerifyArgs verify;
    {
        const ConfigSection sec(config_root, "verify_bounds");
        sec.apply("in", verify.in);
        sec.apply("gen_config", verify.gen_config);
        sec.apply("min_bucket", verify.min_bucket);
        sec.apply("out", verify.out);
    }
    auto* cmd_verify = app.add_subcommand(
        "verify-bounds", "Monte Carlo check of the detection bounds with the oracle");
    cmd_verify->add_option("--in", verify.in, "labeled corpus directory");
    cmd_verify->add_option("--gen-config", verify.gen_config,
                           "generate_config.json provenance file");
    double vK = 0, vc = 0, vdelta = 0, vm = 0;
    auto* oK = cmd_verify->add_option("--K", vK, "override K");
    auto* oc = cmd_verify->add_option("--c", vc, "override c");
    auto* odelta = cmd_verify->add_option("--delta", vdelta, "override delta");
    auto* om = cmd_verify->add_option("--m", vm, "override m");
    cmd_verify->add_option("--min-bucket", verify.min_bucket,
                           "minimum samples per transition age bucket");
    cmd_verify->add_option("--out", verify.out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    if (gap_opt->count() > 0) seg.gap = gap_flag;
    if (eval_gap_opt->count() > 0) eval.gap = eval_gap_flag;
    if (oK->count() > 0) verify.K = vK;
    if (oc->count() > 0) verify.c = vc;
    if (odelta->count() > 0) verify.delta = vdelta;
    if (om->count() > 0) verify.m = vm;

    try {
        if (cmd_gen->parsed()) return run_generate(gen);
        if (cmd_train->parsed()) return run_train(train);
        if (cmd_cal->parsed()) return run_calibrate(cal);
        if (cmd_seg->parsed()) return run_segment(seg);
        if (cmd_prune->parsed()) return run_prune(prune);
        if (cmd_eval->parsed()) return run_evaluate(eval);
        if (cmd_verify->parsed()) return run_verify(verify);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::out_of_range& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }
    return kExitConfig;
}
