#pragma once
// Labeled switching-policy generator. A hidden skill id follows a rare-jump
// chain (switch probability 1/K per step, always to a different skill);
// each skill is a conditional action table whose per-observation dominant
// action has probability at least c. With enforce_deviance the library is
// constructed so dominant actions never collide across skills and the
// probability one skill assigns to another skill's dominant action is capped,
// which makes post-switch actions reliably surprising.

#include <cstdint>
#include <string>
#include <vector>

#include "sbd/predictor.hpp"
#include "sbd/types.hpp"

namespace sbd {

struct SkillSpec {
    int id = 0;
    PolicyTable policy;  // policy[obs][act], rows sum to 1
};

struct ObsProcess {
    enum class Kind {
        iid_uniform,       // fresh uniform draw each step
        markov,            // row-stochastic chain over observation tokens
        prev_action_echo,  // obs mirrors the previous action (first obs uniform)
    };

    Kind kind = Kind::iid_uniform;
    std::vector<std::vector<double>> transition;  // markov only

    static ObsProcess iid() { return {}; }
    static ObsProcess markov(std::vector<std::vector<double>> matrix) {
        return {Kind::markov, std::move(matrix)};
    }
    static ObsProcess echo() { return {Kind::prev_action_echo, {}}; }
};

struct GeneratorConfig {
    double K = 100.0;      // switch probability is 1/K; K = 0 disables switching
    double c = 0.9;        // dominant-action confidence level, in (0,1)
    double delta = 0.01;   // slack probability, in [0,1)
    double m = 0.05;       // deviance bound, in (0,1)
    Token obs_vocab = 8;
    Token act_vocab = 8;
    int n_skills = 2;
    std::int64_t horizon = 1000;
    std::uint64_t seed = 0;
    ObsProcess obs_process;
    bool enforce_deviance = true;
    double p_event = 0.5;  // per true boundary, chance of an injected event flag

    // Fraction of the confidence slack (1 - dominant probability) placed on
    // the skill's own secondary action instead of being spread thin. A
    // nonzero share gives within-segment losses a genuine two-level mixture,
    // which smooths the running-mean excess distribution; needs
    // act_vocab >= 2 * n_skills so secondaries collide with nothing.
    double secondary_share = 0.0;

    double switch_prob() const { return K == 0.0 ? 0.0 : 1.0 / K; }

    /// c > m and (K-4)c^2 > 2; required for the detection-bound comparison
    /// to be non-vacuous.
    bool separation_ok() const { return c > m && (K - 4.0) * c * c > 2.0; }

    /// Throws std::invalid_argument describing the first violated constraint.
    void validate() const;
};

struct LabeledTrajectory {
    Trajectory trajectory;
    BoundarySet true_boundaries;  // steps where the skill id changes
};

/// Deterministic skill library for the config. Dominant action of skill j at
/// observation o is (j + o) mod act_vocab; the dominant probability is
/// max(c, 1 - delta) and, with enforce_deviance, mass on other skills'
/// dominants is capped at (m/2)*c (excess goes to free actions, or back to
/// the dominant when act_vocab == n_skills). With secondary_share > 0 the
/// secondary action of skill j at observation o is (j + n_skills + o) mod
/// act_vocab.
std::vector<SkillSpec> build_skill_library(const GeneratorConfig& cfg);

/// One trajectory; deterministic given (cfg.seed, traj_index).
LabeledTrajectory generate(const GeneratorConfig& cfg,
                           const std::vector<SkillSpec>& library,
                           std::int64_t traj_index);
LabeledTrajectory generate(const GeneratorConfig& cfg, std::int64_t traj_index = 0);

std::vector<LabeledTrajectory> generate_corpus(const GeneratorConfig& cfg, std::int64_t n);

/// Recover ground-truth boundaries from per-step skill labels.
/// Throws std::invalid_argument if any step lacks a label.
BoundarySet true_boundaries_of(const Trajectory& traj);

/// Policy tables of the library, in skill order (oracle construction).
std::vector<PolicyTable> policy_tables(const std::vector<SkillSpec>& library);

}  // namespace sbd
