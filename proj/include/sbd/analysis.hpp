#pragma once
// Verification and evaluation: closed-form bounds on the relative predictive
// probability, their Monte Carlo check on labeled corpora, boundary metrics,
// segment length statistics, rule-based baselines, and gap calibration.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sbd/predictor.hpp"
#include "sbd/synth.hpp"
#include "sbd/types.hpp"

namespace sbd {

struct AssumptionParams {
    double K = 100.0;  // switch rarity scale, > 1
    double c = 0.9;    // confidence level, in (0,1)
    double delta = 0.01;
    double m = 0.05;   // deviance bound, in (0,1)
};

struct DetectionBounds {
    double lower_nontransition = 0.0;  // (K-1)c/K
    double upper_transition = 0.0;     // Km/(2(K-1)) + 1/(c(K-1))
    bool separated = false;            // c > m and (K-4)c^2 > 2
};

/// Throws std::out_of_range when K <= 1.
DetectionBounds detection_bounds(const AssumptionParams& p);

/// r_t = P(a_{t+1}|history) / geomean of the predictive probabilities of the
/// previous t actions, with the model reset at every true segment start.
/// `age` is t: the number of history steps inside the current segment.
struct RatioSample {
    std::int64_t step = 0;  // trajectory index of the predicted action
    std::int64_t age = 0;
    double log_ratio = 0.0;
    bool is_transition = false;
};

struct RatioTrace {
    std::vector<RatioSample> samples;
    std::int64_t excluded = 0;  // entries dropped for zero probability
};

RatioTrace ratio_trace(const LabeledTrajectory& traj, PredictorModel& model);

struct Histogram {
    std::vector<double> edges;        // size bins + 1
    std::vector<std::int64_t> counts; // size bins
};

struct BucketResult {
    std::int64_t age = 0;
    std::int64_t samples = 0;
    std::int64_t passes = 0;
    double rate = 0.0;
    double threshold = 0.0;  // 1 - age*delta - 3 sigma, floored at 0
    bool pass = false;
};

struct BoundsReport {
    DetectionBounds bounds;
    std::int64_t nontransition_samples = 0;
    std::int64_t nontransition_passes = 0;
    double nontransition_rate = 0.0;
    double nontransition_threshold = 0.0;
    bool nontransition_pass = false;
    std::vector<BucketResult> transition_buckets;  // ages with enough samples
    std::int64_t excluded = 0;
    bool overall_pass = false;
    Histogram nontransition_hist;  // of log ratios
    Histogram transition_hist;
};

/// Pass-rate evaluation of the two bounds over ratio samples. Non-transition
/// samples must exceed the lower bound with rate >= 1 - delta - 3 sigma;
/// transition samples are bucketed by age and each bucket with at least
/// `min_bucket_samples` samples must beat 1 - age*delta - 3 sigma.
BoundsReport evaluate_bounds(std::span<const RatioSample> samples,
                             const AssumptionParams& p,
                             std::int64_t min_bucket_samples = 100);

/// ratio_trace over the corpus + evaluate_bounds. Refuses (throws
/// std::invalid_argument) when the separation condition fails: the bound
/// comparison would be vacuous.
BoundsReport verify_detection_bounds(std::span<const LabeledTrajectory> corpus,
                            PredictorModel& model, const AssumptionParams& p,
                            std::int64_t min_bucket_samples = 100);

struct BoundaryMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::int64_t matches = 0;
    std::vector<std::pair<std::int64_t, std::int64_t>> matched_pairs;  // (predicted, true)
};

/// One-to-one matching of sorted boundary indices within +/- tolerance
/// (left-to-right, earliest feasible partner; yields a maximum matching, so
/// F1 is symmetric under swapping the arguments). Empty predicted and empty
/// truth count as a perfect score. Throws std::out_of_range on negative
/// tolerance.
BoundaryMetrics boundary_metrics(const BoundarySet& predicted, const BoundarySet& truth,
                                 std::int64_t tolerance);

struct LengthStats {
    std::int64_t count = 0;
    double mean_len = 0.0;
    double std_len = 0.0;
    double mean_log = 0.0;
    double std_log = 0.0;
    double skew_log = 0.0;  // standardized third moment of log lengths
    Histogram hist;         // 30 log-spaced bins spanning [1, max length]
};

LengthStats length_stats(std::span<const Segment> segments);

struct BaselineStrategy {
    enum class Kind { fixed, uniform };

    Kind kind = Kind::fixed;
    std::int64_t fixed_len = 128;
    std::int64_t min_len = 15;
    std::int64_t max_len = 200;
    std::uint64_t seed = 0;

    static BaselineStrategy fixed(std::int64_t len) {
        BaselineStrategy s;
        s.kind = Kind::fixed;
        s.fixed_len = len;
        return s;
    }
    static BaselineStrategy uniform(std::int64_t min_len, std::int64_t max_len,
                                    std::uint64_t seed) {
        BaselineStrategy s;
        s.kind = Kind::uniform;
        s.min_len = min_len;
        s.max_len = max_len;
        s.seed = seed;
        return s;
    }
};

/// Rule-based segmentation: boundaries at L, 2L, ... (fixed) or at cumulative
/// sums of iid uniform lengths (uniform), truncated at traj_len.
BoundarySet baseline_segment(std::int64_t traj_len, const BaselineStrategy& strategy,
                             const std::string& trajectory_id = "");

struct CalibrationResult {
    double gap = 0.0;
    bool degenerate = false;  // all excesses equal
    std::int64_t n_excesses = 0;
};

/// Quantile of the raw (loss - running mean) excess distribution collected by
/// a detector pass that never fires (gap = +inf, events off). A heuristic
/// replacement for hand-picking the threshold; target_quantile 1 - q sets an
/// expected false-positive rate of q per step on data that matches the
/// calibration corpus.
CalibrationResult calibrate_gap(std::span<const Trajectory> corpus,
                                const PredictorModel& model, double target_quantile,
                                std::int64_t window = 4096);

struct AblationRow {
    std::string mode;  // "none", "info", "loss", "both"
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::int64_t predicted = 0;
    std::int64_t truth = 0;
    std::int64_t matches = 0;
};

/// Four detector modes on the same labeled corpus, metrics pooled over
/// trajectories. "none" is the fixed-length baseline.
std::vector<AblationRow> run_ablation(std::span<const LabeledTrajectory> corpus,
                                      const PredictorModel& model,
                                      const DetectorConfig& cfg,
                                      std::int64_t baseline_fixed_len,
                                      std::int64_t tolerance, unsigned workers = 1);

}  // namespace sbd
