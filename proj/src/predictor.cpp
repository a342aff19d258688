#include "sbd/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "json.hpp"

namespace sbd {

double step_loss(const PredictorModel& model, Token obs, Token act) {
    if (act >= model.act_vocab())
        throw std::out_of_range("step_loss: action token " + std::to_string(act) +
                                " >= act_vocab " + std::to_string(model.act_vocab()));
    const std::vector<double> dist = model.predict(obs);
    return -std::log(dist[act]);
}

// ---------------------------------------------------------------------------
// CountPredictor

std::size_t CountPredictor::KeyHash::operator()(const std::vector<Token>& key) const noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (Token t : key) {
        h ^= t;
        h *= 0x100000001b3ULL;
    }
    return static_cast<std::size_t>(h);
}

CountPredictor::CountPredictor(int order, double alpha, Token obs_vocab, Token act_vocab)
    : order_(order),
      alpha_(alpha),
      obs_vocab_(obs_vocab),
      act_vocab_(act_vocab),
      context_cap_(std::numeric_limits<std::int64_t>::max()),
      table_(std::make_shared<Table>()) {
    if (order < 0) throw std::invalid_argument("CountPredictor: order must be >= 0");
    if (!(alpha > 0.0)) throw std::invalid_argument("CountPredictor: alpha must be > 0");
    if (obs_vocab == 0 || act_vocab == 0)
        throw std::invalid_argument("CountPredictor: vocab sizes must be positive");
}

void CountPredictor::observe(Token obs, Token act) {
    if (obs >= obs_vocab_)
        throw std::out_of_range("CountPredictor::observe: obs token out of vocab");
    if (act >= act_vocab_)
        throw std::out_of_range("CountPredictor::observe: act token out of vocab");
    history_.push_back(obs);
    while (static_cast<std::int64_t>(history_.size()) > context_cap_) history_.pop_front();
}

std::vector<double> CountPredictor::predict(Token obs) const {
    if (obs >= obs_vocab_)
        throw std::out_of_range("CountPredictor::predict: obs token out of vocab");

    const std::size_t ctx_len =
        std::min<std::size_t>(static_cast<std::size_t>(order_), history_.size());
    std::vector<Token> key;
    key.reserve(ctx_len + 1);
    for (std::size_t i = history_.size() - ctx_len; i < history_.size(); ++i)
        key.push_back(history_[i]);
    key.push_back(obs);

    const Row* row = nullptr;
    if (auto it = table_->find(key); it != table_->end()) row = &it->second;

    const double denom =
        (row ? static_cast<double>(row->total) : 0.0) + alpha_ * act_vocab_;
    std::vector<double> dist(act_vocab_);
    for (Token a = 0; a < act_vocab_; ++a) {
        const double count = row ? static_cast<double>(row->counts[a]) : 0.0;
        dist[a] = (count + alpha_) / denom;
    }
    return dist;
}

void CountPredictor::set_context_cap(std::int64_t steps) {
    if (steps < 1) throw std::invalid_argument("set_context_cap: window must be >= 1");
    context_cap_ = steps;
    while (static_cast<std::int64_t>(history_.size()) > context_cap_) history_.pop_front();
}

std::unique_ptr<PredictorModel> CountPredictor::clone() const {
    return std::make_unique<CountPredictor>(*this);
}

CountPredictor train_count_predictor(std::span<const Trajectory> corpus,
                                     int order, double alpha) {
    if (corpus.empty())
        throw std::invalid_argument("train_count_predictor: corpus is empty");
    const Token obs_vocab = corpus.front().obs_vocab;
    const Token act_vocab = corpus.front().act_vocab;
    for (const auto& traj : corpus) {
        if (traj.obs_vocab != obs_vocab || traj.act_vocab != act_vocab)
            throw std::invalid_argument(
                "train_count_predictor: vocab mismatch across corpus (trajectory " +
                traj.id + ")");
    }

    CountPredictor model(order, alpha, obs_vocab, act_vocab);
    auto table = std::make_shared<CountPredictor::Table>();
    std::vector<Token> recent;  // observation history within one trajectory
    for (const auto& traj : corpus) {
        recent.clear();
        for (const auto& step : traj.steps) {
            if (step.obs >= obs_vocab || step.act >= act_vocab)
                throw std::out_of_range("train_count_predictor: token out of vocab in " +
                                        traj.id);
            const std::size_t ctx_len =
                std::min<std::size_t>(static_cast<std::size_t>(order), recent.size());
            std::vector<Token> key;
            key.reserve(ctx_len + 1);
            for (std::size_t i = recent.size() - ctx_len; i < recent.size(); ++i)
                key.push_back(recent[i]);
            key.push_back(step.obs);

            CountPredictor::Row& row = (*table)[std::move(key)];
            if (row.counts.empty()) row.counts.assign(act_vocab, 0);
            row.counts[step.act] += 1;
            row.total += 1;
            recent.push_back(step.obs);
        }
    }
    model.table_ = std::move(table);
    return model;
}

void save_count_predictor(const std::filesystem::path& path, const CountPredictor& model) {
    nlohmann::ordered_json doc;
    doc["format"] = "count_predictor";
    doc["version"] = 1;
    doc["order"] = model.order();
    doc["alpha"] = model.alpha();
    doc["obs_vocab"] = model.obs_vocab();
    doc["act_vocab"] = model.act_vocab();

    // Sorted emission keeps retraining byte-identical.
    std::vector<const std::vector<Token>*> keys;
    keys.reserve(model.table().size());
    for (const auto& [key, row] : model.table()) keys.push_back(&key);
    std::sort(keys.begin(), keys.end(),
              [](const auto* a, const auto* b) { return *a < *b; });

    auto contexts = nlohmann::ordered_json::array();
    for (const auto* key : keys) {
        nlohmann::ordered_json entry;
        entry["key"] = *key;
        entry["counts"] = model.table().at(*key).counts;
        contexts.push_back(std::move(entry));
    }
    doc["contexts"] = std::move(contexts);

    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open model file for writing: " + path.string());
    out << doc.dump() << '\n';
    if (!out) throw std::runtime_error("failed writing model file: " + path.string());
}

CountPredictor load_count_predictor(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open model file: " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("malformed model file " + path.string() + ": " + e.what());
    }
    if (doc.value("format", "") != "count_predictor" || doc.value("version", 0) != 1)
        throw std::runtime_error("unsupported model file format: " + path.string());

    CountPredictor model(doc.at("order").get<int>(), doc.at("alpha").get<double>(),
                         doc.at("obs_vocab").get<Token>(), doc.at("act_vocab").get<Token>());
    auto table = std::make_shared<CountPredictor::Table>();
    for (const auto& entry : doc.at("contexts")) {
        std::vector<Token> key = entry.at("key").get<std::vector<Token>>();
        CountPredictor::Row row;
        row.counts = entry.at("counts").get<std::vector<std::uint64_t>>();
        if (row.counts.size() != model.act_vocab())
            throw std::runtime_error("model file row size mismatch: " + path.string());
        row.total = 0;
        for (auto c : row.counts) row.total += c;
        (*table)[std::move(key)] = std::move(row);
    }
    model.table_ = std::move(table);
    return model;
}

// ---------------------------------------------------------------------------
// MixtureOraclePredictor

MixtureOraclePredictor::MixtureOraclePredictor(std::vector<PolicyTable> skills,
                                               double switch_prob)
    : switch_prob_(switch_prob) {
    if (skills.empty())
        throw std::invalid_argument("MixtureOraclePredictor: empty skill list");
    if (switch_prob < 0.0 || switch_prob >= 1.0)
        throw std::invalid_argument("MixtureOraclePredictor: switch_prob must be in [0, 1)");
    if (skills.size() == 1 && switch_prob > 0.0)
        throw std::invalid_argument(
            "MixtureOraclePredictor: switching needs at least two skills");

    obs_vocab_ = static_cast<Token>(skills.front().size());
    act_vocab_ = skills.front().empty()
                     ? 0
                     : static_cast<Token>(skills.front().front().size());
    if (obs_vocab_ == 0 || act_vocab_ == 0)
        throw std::invalid_argument("MixtureOraclePredictor: empty policy table");
    for (const auto& table : skills) {
        if (table.size() != obs_vocab_)
            throw std::invalid_argument("MixtureOraclePredictor: obs_vocab mismatch");
        for (const auto& row : table) {
            if (row.size() != act_vocab_)
                throw std::invalid_argument("MixtureOraclePredictor: act_vocab mismatch");
            double sum = 0.0;
            for (double p : row) {
                if (p < 0.0)
                    throw std::invalid_argument(
                        "MixtureOraclePredictor: negative probability");
                sum += p;
            }
            if (std::abs(sum - 1.0) > 1e-6)
                throw std::invalid_argument(
                    "MixtureOraclePredictor: policy row does not sum to 1");
        }
    }
    skills_ = std::make_shared<const std::vector<PolicyTable>>(std::move(skills));
    reset();
}

void MixtureOraclePredictor::reset() {
    posterior_.assign(skills_->size(), 1.0 / static_cast<double>(skills_->size()));
}

std::vector<double> MixtureOraclePredictor::propagated() const {
    const std::size_t n = posterior_.size();
    if (n == 1 || switch_prob_ == 0.0) return posterior_;
    std::vector<double> out(n);
    const double jump = switch_prob_ / static_cast<double>(n - 1);
    for (std::size_t j = 0; j < n; ++j)
        out[j] = (1.0 - switch_prob_) * posterior_[j] + jump * (1.0 - posterior_[j]);
    return out;
}

std::vector<double> MixtureOraclePredictor::predict(Token obs) const {
    if (obs >= obs_vocab_)
        throw std::out_of_range("MixtureOraclePredictor::predict: obs token out of vocab");
    const std::vector<double> belief = propagated();
    std::vector<double> dist(act_vocab_, 0.0);
    for (std::size_t j = 0; j < belief.size(); ++j) {
        const auto& row = (*skills_)[j][obs];
        for (Token a = 0; a < act_vocab_; ++a) dist[a] += belief[j] * row[a];
    }
    return dist;
}

void MixtureOraclePredictor::observe(Token obs, Token act) {
    if (obs >= obs_vocab_)
        throw std::out_of_range("MixtureOraclePredictor::observe: obs token out of vocab");
    if (act >= act_vocab_)
        throw std::out_of_range("MixtureOraclePredictor::observe: act token out of vocab");
    std::vector<double> belief = propagated();
    double total = 0.0;
    for (std::size_t j = 0; j < belief.size(); ++j) {
        belief[j] *= (*skills_)[j][obs][act];
        total += belief[j];
    }
    if (total <= 0.0) {
        // Action impossible under every skill; no information to condition on.
        reset();
        return;
    }
    for (double& b : belief) b /= total;
    posterior_ = std::move(belief);
}

std::unique_ptr<PredictorModel> MixtureOraclePredictor::clone() const {
    return std::make_unique<MixtureOraclePredictor>(*this);
}

}  // namespace sbd
