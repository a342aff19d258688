#pragma once
// Unconditional next-action models. Two implementations:
//
//   CountPredictor        smoothed n-gram over observation contexts, the
//                         trainable stand-in for a pretrained video model
//   MixtureOraclePredictor  exact Bayesian filter over a known switching
//                         policy library; the reference model for the
//                         detection-bound verifier
//
// A model owns its inference context: observe() appends a step, reset()
// clears it, predict() is const and never mutates. Trained parameters are
// shared read-only between clones, so one clone per worker is cheap.

#include <cstdint>
#include <deque>
#include <filesystem>
#include <memory>
#include <span>
#include <unordered_map>
#include <vector>

#include "sbd/types.hpp"

namespace sbd {

struct StepLoss {
    std::int64_t index = 0;
    double loss = 0.0;  // -ln P(act | context, obs), nats
};

class PredictorModel {
public:
    virtual ~PredictorModel() = default;

    /// Clear the context memory.
    virtual void reset() = 0;

    /// Append one step to the context.
    virtual void observe(Token obs, Token act) = 0;

    /// Distribution over action tokens given the context plus current obs.
    /// Entries are strictly positive and sum to 1 within 1e-9.
    virtual std::vector<double> predict(Token obs) const = 0;

    virtual Token obs_vocab() const = 0;
    virtual Token act_vocab() const = 0;

    /// Cap the context at the given number of most recent steps. Models with
    /// unbounded exact state (the oracle) ignore this.
    virtual void set_context_cap(std::int64_t) {}

    virtual std::unique_ptr<PredictorModel> clone() const = 0;
};

/// -ln predict(obs)[act]. Does not touch the model context.
/// Throws std::out_of_range when a token exceeds its vocab.
double step_loss(const PredictorModel& model, Token obs, Token act);

// ---------------------------------------------------------------------------
// CountPredictor

/// Additive-smoothed count model. The context key is the current observation
/// preceded by up to `order` most recent observation tokens; probability of
/// an action is (count + alpha) / (context_total + alpha * act_vocab).
class CountPredictor final : public PredictorModel {
public:
    struct Row {
        std::vector<std::uint64_t> counts;
        std::uint64_t total = 0;
    };

    struct KeyHash {
        std::size_t operator()(const std::vector<Token>& key) const noexcept;
    };

    using Table = std::unordered_map<std::vector<Token>, Row, KeyHash>;

    CountPredictor(int order, double alpha, Token obs_vocab, Token act_vocab);

    void reset() override { history_.clear(); }
    void observe(Token obs, Token act) override;
    std::vector<double> predict(Token obs) const override;
    Token obs_vocab() const override { return obs_vocab_; }
    Token act_vocab() const override { return act_vocab_; }
    void set_context_cap(std::int64_t steps) override;
    std::unique_ptr<PredictorModel> clone() const override;

    int order() const { return order_; }
    double alpha() const { return alpha_; }
    const Table& table() const { return *table_; }

private:
    friend CountPredictor train_count_predictor(std::span<const Trajectory>, int, double);
    friend CountPredictor load_count_predictor(const std::filesystem::path&);

    int order_;
    double alpha_;
    Token obs_vocab_;
    Token act_vocab_;
    std::int64_t context_cap_;
    std::shared_ptr<const Table> table_;  // shared read-only across clones
    std::deque<Token> history_;           // recent observation tokens
};

/// Populate counts from every step of every trajectory, using the preceding
/// <= order observation tokens within the same trajectory as context.
/// Throws std::invalid_argument on empty corpus, alpha <= 0 or vocab mismatch.
CountPredictor train_count_predictor(std::span<const Trajectory> corpus,
                                     int order, double alpha);

/// Versioned JSON persistence; save -> load -> predict is bit-exact and the
/// file bytes are deterministic for a given model.
void save_count_predictor(const std::filesystem::path& path, const CountPredictor& model);
CountPredictor load_count_predictor(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// MixtureOraclePredictor

/// Per-skill conditional action distribution: policy[obs][act].
using PolicyTable = std::vector<std::vector<double>>;

/// Exact predictive distribution of a uniformly-initialized switching policy:
/// a belief over the active skill is propagated one switching step
/// (stay with 1 - switch_prob, otherwise jump to a uniformly chosen other
/// skill) and the prediction is the belief-weighted mixture of skill rows.
/// observe() conditions the belief on the action actually taken.
class MixtureOraclePredictor final : public PredictorModel {
public:
    MixtureOraclePredictor(std::vector<PolicyTable> skills, double switch_prob);

    void reset() override;
    void observe(Token obs, Token act) override;
    std::vector<double> predict(Token obs) const override;
    Token obs_vocab() const override { return obs_vocab_; }
    Token act_vocab() const override { return act_vocab_; }
    std::unique_ptr<PredictorModel> clone() const override;

    /// Belief over skills after the steps observed so far (sums to 1).
    const std::vector<double>& posterior() const { return posterior_; }
    double switch_prob() const { return switch_prob_; }

private:
    std::vector<double> propagated() const;

    std::shared_ptr<const std::vector<PolicyTable>> skills_;
    double switch_prob_;
    Token obs_vocab_;
    Token act_vocab_;
    std::vector<double> posterior_;
};

}  // namespace sbd
