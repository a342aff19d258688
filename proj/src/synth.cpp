#include "sbd/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

#include "sbd/rng.hpp"

namespace sbd {

void GeneratorConfig::validate() const {
    if (K != 0.0 && K <= 1.0)
        throw std::invalid_argument(
            "generator: K must be 0 (no switching) or > 1, got " + std::to_string(K));
    if (!(c > 0.0 && c < 1.0))
        throw std::invalid_argument("generator: c must be in (0, 1)");
    if (!(delta >= 0.0 && delta < 1.0))
        throw std::invalid_argument("generator: delta must be in [0, 1)");
    if (!(m > 0.0 && m < 1.0))
        throw std::invalid_argument("generator: m must be in (0, 1)");
    if (obs_vocab == 0 || act_vocab == 0)
        throw std::invalid_argument("generator: vocab sizes must be positive");
    if (n_skills < 1)
        throw std::invalid_argument("generator: n_skills must be >= 1");
    if (K != 0.0 && n_skills < 2)
        throw std::invalid_argument("generator: switching requires n_skills >= 2");
    if (horizon < 1)
        throw std::invalid_argument("generator: horizon must be >= 1");
    if (enforce_deviance && static_cast<int>(act_vocab) < n_skills)
        throw std::invalid_argument(
            "generator: enforce_deviance needs act_vocab >= n_skills");
    if (!(p_event >= 0.0 && p_event <= 1.0))
        throw std::invalid_argument("generator: p_event must be in [0, 1]");
    if (!(secondary_share >= 0.0 && secondary_share < 1.0))
        throw std::invalid_argument("generator: secondary_share must be in [0, 1)");
    if (secondary_share > 0.0 && static_cast<int>(act_vocab) < 2 * n_skills)
        throw std::invalid_argument(
            "generator: secondary_share needs act_vocab >= 2 * n_skills");
    if (obs_process.kind == ObsProcess::Kind::prev_action_echo && obs_vocab < act_vocab)
        throw std::invalid_argument(
            "generator: prev_action_echo needs obs_vocab >= act_vocab");
    if (obs_process.kind == ObsProcess::Kind::markov) {
        const auto& mat = obs_process.transition;
        if (mat.size() != obs_vocab)
            throw std::invalid_argument("generator: markov matrix must be obs_vocab rows");
        for (const auto& row : mat) {
            if (row.size() != obs_vocab)
                throw std::invalid_argument(
                    "generator: markov matrix must be obs_vocab columns");
            double sum = 0.0;
            for (double p : row) {
                if (p < 0.0)
                    throw std::invalid_argument("generator: markov row has negative entry");
                sum += p;
            }
            if (std::abs(sum - 1.0) > 1e-9)
                throw std::invalid_argument("generator: markov row does not sum to 1");
        }
    }
}

std::vector<SkillSpec> build_skill_library(const GeneratorConfig& cfg) {
    cfg.validate();
    const Token A = cfg.act_vocab;
    const int n = cfg.n_skills;
    const double p_dom = std::max(cfg.c, 1.0 - cfg.delta);
    const double residual = 1.0 - p_dom;
    const double cross_cap = 0.5 * cfg.m * cfg.c;

    std::vector<SkillSpec> library;
    library.reserve(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
        SkillSpec spec;
        spec.id = j;
        spec.policy.assign(cfg.obs_vocab, std::vector<double>(A, 0.0));
        for (Token o = 0; o < cfg.obs_vocab; ++o) {
            auto& row = spec.policy[o];
            const Token dominant = (static_cast<Token>(j) + o) % A;
            if (A == 1) {
                row[0] = 1.0;
                continue;
            }

            const bool has_secondary = cfg.secondary_share > 0.0;
            const Token secondary =
                has_secondary ? (static_cast<Token>(j + n) + o) % A : dominant;
            const double p_sec = has_secondary ? residual * cfg.secondary_share : 0.0;
            const double rest = residual - p_sec;
            const std::int64_t n_rest =
                static_cast<std::int64_t>(A) - (has_secondary ? 2 : 1);

            if (has_secondary) row[secondary] = p_sec;
            if (n_rest > 0) {
                const double uniform_share = rest / static_cast<double>(n_rest);
                if (!cfg.enforce_deviance || n == 1) {
                    for (Token a = 0; a < A; ++a)
                        if (a != dominant && a != secondary) row[a] = uniform_share;
                } else {
                    // Free actions absorb the whole slack and other skills'
                    // dominants get nothing, so an off-dominant draw carries
                    // no spurious evidence for a switch. Without free actions
                    // the dominants take the capped share and the leftover
                    // folds into the own dominant.
                    std::vector<Token> free_actions, other_dominants;
                    for (Token a = 0; a < A; ++a) {
                        if (a == dominant || (has_secondary && a == secondary)) continue;
                        const Token delta = (a + A - o % A) % A;
                        if (delta < static_cast<Token>(n))
                            other_dominants.push_back(a);
                        else
                            free_actions.push_back(a);
                    }
                    if (!free_actions.empty()) {
                        const double per_free =
                            rest / static_cast<double>(free_actions.size());
                        for (Token a : free_actions) row[a] = per_free;
                    } else {
                        const double cross = std::min(uniform_share, cross_cap);
                        for (Token a : other_dominants) row[a] = cross;
                    }
                }
            }
            double others = 0.0;
            for (Token a = 0; a < A; ++a)
                if (a != dominant) others += row[a];
            row[dominant] = 1.0 - others;
        }
        library.push_back(std::move(spec));
    }
    return library;
}

LabeledTrajectory generate(const GeneratorConfig& cfg,
                           const std::vector<SkillSpec>& library,
                           std::int64_t traj_index) {
    cfg.validate();
    if (static_cast<int>(library.size()) != cfg.n_skills)
        throw std::invalid_argument("generate: library size does not match n_skills");

    Rng rng(derive_seed(cfg.seed, "synth.trajectory", static_cast<std::uint64_t>(traj_index)));
    const double s = cfg.switch_prob();
    const int n = cfg.n_skills;

    LabeledTrajectory out;
    char idbuf[32];
    std::snprintf(idbuf, sizeof idbuf, "traj_%06lld", static_cast<long long>(traj_index));
    out.trajectory.id = idbuf;
    out.trajectory.obs_vocab = cfg.obs_vocab;
    out.trajectory.act_vocab = cfg.act_vocab;
    out.trajectory.steps.reserve(static_cast<std::size_t>(cfg.horizon));
    out.true_boundaries.trajectory_id = out.trajectory.id;

    int skill = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    Token prev_act = 0;
    for (std::int64_t t = 0; t < cfg.horizon; ++t) {
        bool switched = false;
        if (t > 0 && s > 0.0 && rng.unit() < s) {
            // Resample uniformly among the other skills.
            int pick = static_cast<int>(rng.below(static_cast<std::uint64_t>(n - 1)));
            if (pick >= skill) ++pick;
            skill = pick;
            switched = true;
        }

        Token obs = 0;
        switch (cfg.obs_process.kind) {
            case ObsProcess::Kind::iid_uniform:
                obs = static_cast<Token>(rng.below(cfg.obs_vocab));
                break;
            case ObsProcess::Kind::markov:
                if (t == 0)
                    obs = static_cast<Token>(rng.below(cfg.obs_vocab));
                else
                    obs = static_cast<Token>(rng.categorical(
                        cfg.obs_process.transition[out.trajectory.steps.back().obs]));
                break;
            case ObsProcess::Kind::prev_action_echo:
                obs = t == 0 ? static_cast<Token>(rng.below(cfg.obs_vocab)) : prev_act;
                break;
        }

        const Token act = static_cast<Token>(
            rng.categorical(library[static_cast<std::size_t>(skill)].policy[obs]));

        Step step;
        step.index = t;
        step.obs = obs;
        step.act = act;
        step.skill = skill;
        if (switched) {
            out.true_boundaries.boundaries.push_back({t, std::nullopt});
            if (cfg.p_event > 0.0 && rng.unit() < cfg.p_event)
                step.events.insert("synthetic:boundary");
        }
        out.trajectory.steps.push_back(std::move(step));
        prev_act = act;
    }
    return out;
}

LabeledTrajectory generate(const GeneratorConfig& cfg, std::int64_t traj_index) {
    return generate(cfg, build_skill_library(cfg), traj_index);
}

std::vector<LabeledTrajectory> generate_corpus(const GeneratorConfig& cfg, std::int64_t n) {
    if (n < 1) throw std::invalid_argument("generate_corpus: n must be >= 1");
    const std::vector<SkillSpec> library = build_skill_library(cfg);
    std::vector<LabeledTrajectory> corpus;
    corpus.reserve(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) corpus.push_back(generate(cfg, library, i));
    return corpus;
}

BoundarySet true_boundaries_of(const Trajectory& traj) {
    BoundarySet out;
    out.trajectory_id = traj.id;
    for (std::size_t i = 0; i < traj.steps.size(); ++i) {
        if (!traj.steps[i].skill.has_value())
            throw std::invalid_argument("true_boundaries_of: step " + std::to_string(i) +
                                        " of " + traj.id + " has no skill label");
        if (i > 0 && traj.steps[i].skill != traj.steps[i - 1].skill)
            out.boundaries.push_back({static_cast<std::int64_t>(i), std::nullopt});
    }
    return out;
}

std::vector<PolicyTable> policy_tables(const std::vector<SkillSpec>& library) {
    std::vector<PolicyTable> tables;
    tables.reserve(library.size());
    for (const auto& spec : library) tables.push_back(spec.policy);
    return tables;
}

}  // namespace sbd
