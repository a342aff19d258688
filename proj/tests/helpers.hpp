#pragma once
// Test-only predictor stubs and small utilities shared across suites.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <vector>

#include "sbd/predictor.hpp"
#include "sbd/types.hpp"

namespace sbd::test {

// Yields a prescribed loss sequence: predict at global step t gives the
// correct action (token 0) probability exp(-losses[t]). The step counter
// advances on observe() and survives reset(), so the scripted trace is
// independent of detector resets.
class ScriptedLossModel final : public PredictorModel {
public:
    explicit ScriptedLossModel(std::vector<double> losses, Token act_vocab = 2)
        : losses_(std::move(losses)), act_vocab_(act_vocab) {}

    void reset() override {}
    void observe(Token, Token) override { ++step_; }
    std::vector<double> predict(Token) const override {
        const double p = step_ < losses_.size() ? std::exp(-losses_[step_]) : 0.5;
        std::vector<double> dist(act_vocab_, (1.0 - p) / (act_vocab_ - 1));
        dist[0] = p;
        return dist;
    }
    Token obs_vocab() const override { return 1; }
    Token act_vocab() const override { return act_vocab_; }
    std::unique_ptr<PredictorModel> clone() const override {
        return std::make_unique<ScriptedLossModel>(*this);
    }

private:
    std::vector<double> losses_;
    Token act_vocab_;
    std::size_t step_ = 0;
};

// Uniform model that records how many steps of context each predict() saw.
class ContextProbeModel final : public PredictorModel {
public:
    explicit ContextProbeModel(Token act_vocab = 2) : act_vocab_(act_vocab) {}

    void reset() override { context_len_ = 0; }
    void observe(Token, Token) override { ++context_len_; }
    std::vector<double> predict(Token) const override {
        seen_.push_back(context_len_);
        return std::vector<double>(act_vocab_, 1.0 / act_vocab_);
    }
    Token obs_vocab() const override { return 1; }
    Token act_vocab() const override { return act_vocab_; }
    std::unique_ptr<PredictorModel> clone() const override {
        return std::make_unique<ContextProbeModel>(*this);
    }

    const std::vector<std::int64_t>& context_lengths() const { return seen_; }

private:
    Token act_vocab_;
    std::int64_t context_len_ = 0;
    mutable std::vector<std::int64_t> seen_;
};

// All-zero trajectory of the given length, for scripted-model runs.
inline Trajectory flat_trajectory(std::int64_t len, const std::string& id = "flat") {
    Trajectory traj;
    traj.id = id;
    traj.obs_vocab = 1;
    traj.act_vocab = 2;
    for (std::int64_t t = 0; t < len; ++t) traj.steps.push_back({t, 0, 0, {}, std::nullopt});
    return traj;
}

inline std::filesystem::path fresh_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace sbd::test
