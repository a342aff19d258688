#include "sbd/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "sbd/detector.hpp"
#include "sbd/rng.hpp"

namespace sbd {

DetectionBounds detection_bounds(const AssumptionParams& p) {
    if (p.K <= 1.0)
        throw std::out_of_range("detection_bounds: K must be > 1, got " + std::to_string(p.K));
    if (!(p.c > 0.0 && p.c < 1.0))
        throw std::out_of_range("detection_bounds: c must be in (0, 1)");
    if (!(p.m > 0.0 && p.m < 1.0))
        throw std::out_of_range("detection_bounds: m must be in (0, 1)");
    DetectionBounds b;
    b.lower_nontransition = (p.K - 1.0) * p.c / p.K;
    b.upper_transition = p.K * p.m / (2.0 * (p.K - 1.0)) + 1.0 / (p.c * (p.K - 1.0));
    b.separated = p.c > p.m && (p.K - 4.0) * p.c * p.c > 2.0;
    return b;
}

RatioTrace ratio_trace(const LabeledTrajectory& traj, PredictorModel& model) {
    RatioTrace trace;
    const auto& steps = traj.trajectory.steps;
    if (steps.empty()) return trace;

    std::vector<std::int64_t> starts = {0};
    for (std::int64_t b : traj.true_boundaries.indices()) starts.push_back(b);
    starts.push_back(traj.trajectory.length());

    model.reset();
    double log_sum = 0.0;     // sum of ln P over the current segment's history
    std::int64_t age = 0;     // history steps inside the current segment
    bool poisoned = false;    // a zero probability entered the history

    auto emit = [&](std::int64_t step_index, double log_p, bool is_transition) {
        if (age < 1) return;  // nothing to compare the first step of a segment to
        if (poisoned || !std::isfinite(log_p)) {
            trace.excluded += 1;
            return;
        }
        trace.samples.push_back(
            {step_index, age, log_p - log_sum / static_cast<double>(age), is_transition});
    };

    std::size_t seg = 0;
    for (std::int64_t t = 0; t < traj.trajectory.length(); ++t) {
        const Step& step = steps[static_cast<std::size_t>(t)];
        double p_in;
        if (t == starts[seg + 1]) {
            // First step of a new segment: its probability under the old
            // context is the transition sample for the segment just ended.
            const double p_old = model.predict(step.obs)[step.act];
            emit(t, std::log(p_old), true);
            model.reset();
            log_sum = 0.0;
            age = 0;
            poisoned = false;
            ++seg;
            p_in = model.predict(step.obs)[step.act];
        } else {
            p_in = model.predict(step.obs)[step.act];
            if (t > starts[seg]) emit(t, std::log(p_in), false);
        }
        // The step joins the new (or current) segment's history.
        const double log_p_in = std::log(p_in);
        if (!std::isfinite(log_p_in)) poisoned = true;
        log_sum += log_p_in;
        age += 1;
        model.observe(step.obs, step.act);
    }
    return trace;
}

namespace {

Histogram log_ratio_histogram(std::span<const RatioSample> samples, bool transition) {
    Histogram hist;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    std::int64_t n = 0;
    for (const auto& s : samples) {
        if (s.is_transition != transition) continue;
        lo = std::min(lo, s.log_ratio);
        hi = std::max(hi, s.log_ratio);
        ++n;
    }
    if (n == 0) return hist;
    if (hi <= lo) hi = lo + 1e-12;
    constexpr int bins = 40;
    hist.edges.resize(bins + 1);
    hist.counts.assign(bins, 0);
    for (int i = 0; i <= bins; ++i)
        hist.edges[i] = lo + (hi - lo) * static_cast<double>(i) / bins;
    for (const auto& s : samples) {
        if (s.is_transition != transition) continue;
        int bin = static_cast<int>((s.log_ratio - lo) / (hi - lo) * bins);
        bin = std::clamp(bin, 0, bins - 1);
        hist.counts[static_cast<std::size_t>(bin)] += 1;
    }
    return hist;
}

double binomial_threshold(double p_target, std::int64_t n) {
    if (n <= 0) return 0.0;
    const double p = std::clamp(p_target, 0.0, 1.0);
    const double sigma = std::sqrt(p * (1.0 - p) / static_cast<double>(n));
    return std::max(0.0, p - 3.0 * sigma);
}

}  // namespace

BoundsReport evaluate_bounds(std::span<const RatioSample> samples,
                             const AssumptionParams& p,
                             std::int64_t min_bucket_samples) {
    BoundsReport report;
    report.bounds = detection_bounds(p);
    const double log_lower = std::log(report.bounds.lower_nontransition);
    const double log_upper = std::log(report.bounds.upper_transition);

    std::map<std::int64_t, std::pair<std::int64_t, std::int64_t>> buckets;  // age -> (n, pass)
    for (const auto& s : samples) {
        if (s.is_transition) {
            auto& [n, passes] = buckets[s.age];
            n += 1;
            if (s.log_ratio < log_upper) passes += 1;
        } else {
            report.nontransition_samples += 1;
            if (s.log_ratio > log_lower) report.nontransition_passes += 1;
        }
    }

    report.nontransition_threshold =
        binomial_threshold(1.0 - p.delta, report.nontransition_samples);
    report.nontransition_rate =
        report.nontransition_samples == 0
            ? 0.0
            : static_cast<double>(report.nontransition_passes) /
                  static_cast<double>(report.nontransition_samples);
    report.nontransition_pass = report.nontransition_samples > 0 &&
                                report.nontransition_rate >= report.nontransition_threshold;

    bool buckets_pass = true;
    bool any_bucket = false;
    for (const auto& [age, stat] : buckets) {
        if (stat.first < min_bucket_samples) continue;
        BucketResult bucket;
        bucket.age = age;
        bucket.samples = stat.first;
        bucket.passes = stat.second;
        bucket.rate = static_cast<double>(stat.second) / static_cast<double>(stat.first);
        bucket.threshold =
            binomial_threshold(1.0 - static_cast<double>(age) * p.delta, stat.first);
        bucket.pass = bucket.rate >= bucket.threshold;
        buckets_pass = buckets_pass && bucket.pass;
        any_bucket = true;
        report.transition_buckets.push_back(bucket);
    }

    report.overall_pass = report.nontransition_pass && any_bucket && buckets_pass;
    report.nontransition_hist = log_ratio_histogram(samples, false);
    report.transition_hist = log_ratio_histogram(samples, true);
    return report;
}

BoundsReport verify_detection_bounds(std::span<const LabeledTrajectory> corpus,
                            PredictorModel& model, const AssumptionParams& p,
                            std::int64_t min_bucket_samples) {
    const DetectionBounds bounds = detection_bounds(p);
    if (!bounds.separated)
        throw std::invalid_argument(
            "verify_detection_bounds: parameters are not separated (need c > m and "
            "(K-4)c^2 > 2); the bound comparison is vacuous");

    std::vector<RatioSample> samples;
    std::int64_t excluded = 0;
    for (const auto& traj : corpus) {
        RatioTrace trace = ratio_trace(traj, model);
        samples.insert(samples.end(), trace.samples.begin(), trace.samples.end());
        excluded += trace.excluded;
    }
    BoundsReport report = evaluate_bounds(samples, p, min_bucket_samples);
    report.excluded = excluded;
    return report;
}

BoundaryMetrics boundary_metrics(const BoundarySet& predicted, const BoundarySet& truth,
                                 std::int64_t tolerance) {
    if (tolerance < 0)
        throw std::out_of_range("boundary_metrics: tolerance must be >= 0");
    const std::vector<std::int64_t> pred = predicted.indices();
    const std::vector<std::int64_t> tru = truth.indices();

    BoundaryMetrics metrics;
    std::size_t i = 0;
    for (std::int64_t p : pred) {
        while (i < tru.size() && tru[i] < p - tolerance) ++i;
        if (i < tru.size() && tru[i] <= p + tolerance) {
            metrics.matched_pairs.emplace_back(p, tru[i]);
            ++i;
        }
    }
    metrics.matches = static_cast<std::int64_t>(metrics.matched_pairs.size());
    metrics.precision = pred.empty()
                            ? 1.0
                            : static_cast<double>(metrics.matches) /
                                  static_cast<double>(pred.size());
    metrics.recall = tru.empty()
                         ? 1.0
                         : static_cast<double>(metrics.matches) /
                               static_cast<double>(tru.size());
    metrics.f1 = metrics.precision + metrics.recall > 0.0
                     ? 2.0 * metrics.precision * metrics.recall /
                           (metrics.precision + metrics.recall)
                     : 0.0;
    return metrics;
}

LengthStats length_stats(std::span<const Segment> segments) {
    if (segments.empty())
        throw std::invalid_argument("length_stats: no segments");

    LengthStats stats;
    stats.count = static_cast<std::int64_t>(segments.size());
    std::vector<double> lengths, logs;
    lengths.reserve(segments.size());
    logs.reserve(segments.size());
    double max_len = 1.0;
    for (const Segment& seg : segments) {
        const double len = static_cast<double>(seg.length());
        if (len <= 0.0)
            throw std::invalid_argument("length_stats: non-positive segment length");
        lengths.push_back(len);
        logs.push_back(std::log(len));
        max_len = std::max(max_len, len);
    }

    auto mean_of = [](const std::vector<double>& xs) {
        double s = 0.0;
        for (double x : xs) s += x;
        return s / static_cast<double>(xs.size());
    };
    auto std_of = [](const std::vector<double>& xs, double mean) {
        double s = 0.0;
        for (double x : xs) s += (x - mean) * (x - mean);
        return std::sqrt(s / static_cast<double>(xs.size()));
    };

    stats.mean_len = mean_of(lengths);
    stats.std_len = std_of(lengths, stats.mean_len);
    stats.mean_log = mean_of(logs);
    stats.std_log = std_of(logs, stats.mean_log);
    if (stats.std_log > 0.0) {
        double m3 = 0.0;
        for (double x : logs) m3 += std::pow(x - stats.mean_log, 3);
        m3 /= static_cast<double>(logs.size());
        stats.skew_log = m3 / std::pow(stats.std_log, 3);
    }

    constexpr int bins = 30;
    const double log_max = std::log(max_len);
    stats.hist.edges.resize(bins + 1);
    stats.hist.counts.assign(bins, 0);
    for (int i = 0; i <= bins; ++i)
        stats.hist.edges[i] = std::exp(log_max * static_cast<double>(i) / bins);
    for (double len : lengths) {
        int bin = log_max > 0.0
                      ? static_cast<int>(std::log(len) / log_max * bins)
                      : 0;
        bin = std::clamp(bin, 0, bins - 1);
        stats.hist.counts[static_cast<std::size_t>(bin)] += 1;
    }
    return stats;
}

BoundarySet baseline_segment(std::int64_t traj_len, const BaselineStrategy& strategy,
                             const std::string& trajectory_id) {
    if (traj_len <= 0)
        throw std::invalid_argument("baseline_segment: traj_len must be positive");
    BoundarySet out;
    out.trajectory_id = trajectory_id;
    switch (strategy.kind) {
        case BaselineStrategy::Kind::fixed: {
            if (strategy.fixed_len < 1)
                throw std::invalid_argument("baseline_segment: fixed length must be >= 1");
            for (std::int64_t b = strategy.fixed_len; b < traj_len; b += strategy.fixed_len)
                out.boundaries.push_back({b, std::nullopt});
            break;
        }
        case BaselineStrategy::Kind::uniform: {
            if (strategy.min_len < 1 || strategy.min_len > strategy.max_len)
                throw std::invalid_argument(
                    "baseline_segment: need 1 <= min_len <= max_len");
            Rng rng(strategy.seed);
            const std::uint64_t span =
                static_cast<std::uint64_t>(strategy.max_len - strategy.min_len + 1);
            std::int64_t cursor = 0;
            for (;;) {
                cursor += strategy.min_len + static_cast<std::int64_t>(rng.below(span));
                if (cursor >= traj_len) break;
                out.boundaries.push_back({cursor, std::nullopt});
            }
            break;
        }
    }
    return out;
}

CalibrationResult calibrate_gap(std::span<const Trajectory> corpus,
                                const PredictorModel& model, double target_quantile,
                                std::int64_t window) {
    if (corpus.empty())
        throw std::invalid_argument("calibrate_gap: corpus is empty");
    if (!(target_quantile > 0.0 && target_quantile <= 1.0))
        throw std::invalid_argument("calibrate_gap: target_quantile must be in (0, 1]");

    DetectorConfig cfg;
    cfg.gap = std::numeric_limits<double>::infinity();
    cfg.window = window;
    cfg.use_loss = true;
    cfg.use_events = false;

    std::vector<double> excesses;
    auto probe = model.clone();
    probe->set_context_cap(window);
    for (const auto& traj : corpus) {
        IndicatorTrack track;
        track.flags.assign(traj.steps.size(), 0);
        const DetectionResult det = detect_boundaries(traj, *probe, cfg, track);
        double mean = 0.0;
        std::int64_t count = 0;
        for (const StepLoss& sl : det.losses) {
            count += 1;
            mean += (sl.loss - mean) / static_cast<double>(count);
            excesses.push_back(sl.loss - mean);
        }
    }

    std::sort(excesses.begin(), excesses.end());
    CalibrationResult result;
    result.n_excesses = static_cast<std::int64_t>(excesses.size());
    const std::size_t rank = std::min(
        excesses.size() - 1,
        static_cast<std::size_t>(target_quantile * static_cast<double>(excesses.size())));
    result.gap = excesses[rank];
    result.degenerate = excesses.front() == excesses.back();
    return result;
}

std::vector<AblationRow> run_ablation(std::span<const LabeledTrajectory> corpus,
                                      const PredictorModel& model,
                                      const DetectorConfig& cfg,
                                      std::int64_t baseline_fixed_len,
                                      std::int64_t tolerance, unsigned workers) {
    std::vector<Trajectory> plain;
    plain.reserve(corpus.size());
    for (const auto& lt : corpus) plain.push_back(lt.trajectory);

    auto pooled = [&](auto&& boundaries_for) {
        std::int64_t matches = 0, predicted = 0, truth_n = 0;
        for (std::size_t i = 0; i < corpus.size(); ++i) {
            const BoundarySet pred = boundaries_for(i);
            const BoundaryMetrics mm =
                boundary_metrics(pred, corpus[i].true_boundaries, tolerance);
            matches += mm.matches;
            predicted += static_cast<std::int64_t>(pred.boundaries.size());
            truth_n += static_cast<std::int64_t>(corpus[i].true_boundaries.boundaries.size());
        }
        AblationRow row;
        row.matches = matches;
        row.predicted = predicted;
        row.truth = truth_n;
        row.precision = predicted == 0 ? 1.0
                                       : static_cast<double>(matches) /
                                             static_cast<double>(predicted);
        row.recall = truth_n == 0 ? 1.0
                                  : static_cast<double>(matches) /
                                        static_cast<double>(truth_n);
        row.f1 = row.precision + row.recall > 0.0
                     ? 2.0 * row.precision * row.recall / (row.precision + row.recall)
                     : 0.0;
        return row;
    };

    std::vector<AblationRow> rows;

    AblationRow none = pooled([&](std::size_t i) {
        return baseline_segment(plain[i].length(), BaselineStrategy::fixed(baseline_fixed_len),
                                plain[i].id);
    });
    none.mode = "none";
    rows.push_back(none);

    const struct {
        const char* name;
        bool use_loss;
        bool use_events;
    } modes[] = {{"info", false, true}, {"loss", true, false}, {"both", true, true}};
    for (const auto& mode : modes) {
        DetectorConfig mode_cfg = cfg;
        mode_cfg.use_loss = mode.use_loss;
        mode_cfg.use_events = mode.use_events;
        const std::vector<TrajectorySegmentation> segmented =
            segment_corpus(plain, model, mode_cfg, workers);
        AblationRow row = pooled([&](std::size_t i) { return segmented[i].boundaries; });
        row.mode = mode.name;
        rows.push_back(row);
    }
    return rows;
}

}  // namespace sbd
