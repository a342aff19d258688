#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <random>

#include "helpers.hpp"
#include "sbd/predictor.hpp"

using namespace sbd;

namespace {

Trajectory random_trajectory(std::mt19937_64& rng, std::int64_t len, Token obs_vocab,
                             Token act_vocab, const std::string& id) {
    Trajectory traj{id, obs_vocab, act_vocab, {}};
    for (std::int64_t t = 0; t < len; ++t)
        traj.steps.push_back({t, static_cast<Token>(rng() % obs_vocab),
                              static_cast<Token>(rng() % act_vocab), {}, std::nullopt});
    return traj;
}

// Exhaustive hidden-path enumeration for the switching process: weights every
// skill sequence by prior * transition probabilities * action likelihoods.
// Returns P(skill at the last observed step | history).
std::vector<double> enumerate_posterior(const std::vector<PolicyTable>& skills, double s,
                                        const std::vector<std::pair<Token, Token>>& hist) {
    const std::size_t n = skills.size();
    std::vector<double> marginal(n, 0.0);
    std::vector<std::size_t> path(hist.size());
    std::function<void(std::size_t, double)> walk = [&](std::size_t t, double w) {
        if (t == hist.size()) {
            marginal[path.back()] += w;
            return;
        }
        for (std::size_t j = 0; j < n; ++j) {
            double pw = w;
            if (t == 0)
                pw *= 1.0 / static_cast<double>(n);
            else if (j == path[t - 1])
                pw *= 1.0 - s;
            else
                pw *= s / static_cast<double>(n - 1);
            pw *= skills[j][hist[t].first][hist[t].second];
            if (pw == 0.0) continue;
            path[t] = j;
            walk(t + 1, pw);
        }
    };
    walk(0, 1.0);
    double total = 0.0;
    for (double v : marginal) total += v;
    for (double& v : marginal) v /= total;
    return marginal;
}

// Same enumeration extended one step: P(next action | history, next obs).
std::vector<double> enumerate_predictive(const std::vector<PolicyTable>& skills, double s,
                                         const std::vector<std::pair<Token, Token>>& hist,
                                         Token next_obs) {
    const std::size_t n = skills.size();
    const Token acts = static_cast<Token>(skills.front().front().size());
    const std::vector<double> post =
        hist.empty() ? std::vector<double>(n, 1.0 / static_cast<double>(n))
                     : enumerate_posterior(skills, s, hist);
    std::vector<double> dist(acts, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t k = 0; k < n; ++k) {
            double trans;
            if (hist.empty())
                trans = j == k ? 1.0 : 0.0;  // no step happens before the first obs
            else
                trans = j == k ? 1.0 - s : s / static_cast<double>(n - 1);
            for (Token a = 0; a < acts; ++a)
                dist[a] += post[j] * trans * skills[k][next_obs][a];
        }
    }
    return dist;
}

}  // namespace

TEST_CASE("untrained count model predicts uniform") {
    const CountPredictor model(1, 1.0, 4, 4);
    const auto dist = model.predict(2);
    for (double p : dist) CHECK(p == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("order-0 counts: ten observations of action 1 after obs 0") {
    Trajectory traj{"t", 1, 2, {}};
    for (std::int64_t t = 0; t < 10; ++t) traj.steps.push_back({t, 0, 1, {}, std::nullopt});
    const std::vector<Trajectory> corpus{traj};
    const CountPredictor model = train_count_predictor(corpus, 0, 1.0);

    const auto dist = model.predict(0);
    CHECK(dist[1] == doctest::Approx(11.0 / 12.0).epsilon(1e-12));
    CHECK(dist[0] == doctest::Approx(1.0 / 12.0).epsilon(1e-12));

    // -ln(11/12)
    CHECK(step_loss(model, 0, 1) == doctest::Approx(0.08701137698962981).epsilon(1e-12));
}

TEST_CASE("order-1 counts match a brute-force recount on a toy corpus") {
    std::mt19937_64 rng(404);
    const Trajectory traj = random_trajectory(rng, 20, 3, 3, "toy");
    const std::vector<Trajectory> corpus{traj};
    const CountPredictor model = train_count_predictor(corpus, 1, 1.0);

    // Independent recount: (prev obs or -1, obs) -> action counts.
    std::map<std::pair<int, int>, std::array<std::int64_t, 3>> table;
    for (std::size_t t = 0; t < traj.steps.size(); ++t) {
        const int prev = t == 0 ? -1 : static_cast<int>(traj.steps[t - 1].obs);
        auto& row = table[{prev, static_cast<int>(traj.steps[t].obs)}];
        row[traj.steps[t].act] += 1;
    }

    for (const auto& [key, counts] : table) {
        auto probe = model.clone();
        probe->reset();
        if (key.first >= 0) probe->observe(static_cast<Token>(key.first), 0);
        const auto dist = probe->predict(static_cast<Token>(key.second));
        std::int64_t total = counts[0] + counts[1] + counts[2];
        for (Token a = 0; a < 3; ++a) {
            const double expected =
                (static_cast<double>(counts[a]) + 1.0) / (static_cast<double>(total) + 3.0);
            CHECK(dist[a] == doctest::Approx(expected).epsilon(1e-12));
        }
    }
}

TEST_CASE("step_loss is the negative log of the predicted probability") {
    SUBCASE("certain prediction has zero loss") {
        PolicyTable table{{1.0, 0.0}};  // single obs, deterministic action 0
        MixtureOraclePredictor oracle({table}, 0.0);
        CHECK(step_loss(oracle, 0, 0) == 0.0);
    }
    SUBCASE("probability e^-2 gives loss 2") {
        const double p = std::exp(-2.0);
        PolicyTable table{{p, 1.0 - p}};
        MixtureOraclePredictor oracle({table}, 0.0);
        CHECK(step_loss(oracle, 0, 0) == doctest::Approx(2.0).epsilon(1e-12));
    }
    SUBCASE("token out of vocab is a range error") {
        const CountPredictor model(0, 1.0, 2, 2);
        CHECK_THROWS_AS(step_loss(model, 5, 0), std::out_of_range);
        CHECK_THROWS_AS(step_loss(model, 0, 5), std::out_of_range);
    }
}

TEST_CASE("predictions are strictly positive distributions") {
    std::mt19937_64 rng(77);
    std::vector<Trajectory> corpus;
    for (int i = 0; i < 3; ++i)
        corpus.push_back(random_trajectory(rng, 60, 5, 4, "r" + std::to_string(i)));
    const CountPredictor model = train_count_predictor(corpus, 2, 0.5);

    auto probe = model.clone();
    for (int trial = 0; trial < 100; ++trial) {
        if (rng() % 4 == 0) probe->reset();
        const Token obs = static_cast<Token>(rng() % 5);
        const auto dist = probe->predict(obs);
        double sum = 0.0;
        for (double p : dist) {
            CHECK(p > 0.0);
            sum += p;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
        probe->observe(obs, static_cast<Token>(rng() % 4));
    }
}

TEST_CASE("context cap: only the most recent window steps matter") {
    std::mt19937_64 rng(99);
    std::vector<Trajectory> corpus{random_trajectory(rng, 300, 4, 3, "w")};
    CountPredictor model = train_count_predictor(corpus, 3, 1.0);
    model.set_context_cap(2);

    auto a = model.clone();
    auto b = model.clone();
    // Different long prefixes, identical last two observations.
    for (Token o : {0u, 1u, 2u, 3u, 1u, 2u}) a->observe(o, 0);
    for (Token o : {3u, 3u, 1u, 2u}) b->observe(o, 0);
    const auto da = a->predict(1);
    const auto db = b->predict(1);
    for (std::size_t i = 0; i < da.size(); ++i) CHECK(da[i] == db[i]);
}

TEST_CASE("model persistence round-trips bit-exactly") {
    std::mt19937_64 rng(2024);
    std::vector<Trajectory> corpus;
    for (int i = 0; i < 2; ++i)
        corpus.push_back(random_trajectory(rng, 120, 6, 5, "p" + std::to_string(i)));
    const CountPredictor model = train_count_predictor(corpus, 1, 0.25);

    const auto dir = test::fresh_dir("sbd_model_roundtrip");
    save_count_predictor(dir / "m.json", model);
    const CountPredictor loaded = load_count_predictor(dir / "m.json");
    save_count_predictor(dir / "m2.json", loaded);

    // Bytes stable across save -> load -> save.
    std::ifstream f1(dir / "m.json"), f2(dir / "m2.json");
    std::string s1((std::istreambuf_iterator<char>(f1)), {});
    std::string s2((std::istreambuf_iterator<char>(f2)), {});
    CHECK(s1 == s2);

    // Predictions identical with either object, including after context.
    auto a = model.clone();
    auto b = loaded.clone();
    for (int t = 0; t < 10; ++t) {
        const Token obs = static_cast<Token>(rng() % 6);
        const auto da = a->predict(obs);
        const auto db = b->predict(obs);
        for (std::size_t i = 0; i < da.size(); ++i) CHECK(da[i] == db[i]);
        const Token act = static_cast<Token>(rng() % 5);
        a->observe(obs, act);
        b->observe(obs, act);
    }
}

TEST_CASE("oracle with a single skill reproduces the skill exactly") {
    std::mt19937_64 rng(5);
    PolicyTable table;
    for (int o = 0; o < 3; ++o) {
        std::vector<double> row{0.7, 0.2, 0.1};
        std::shuffle(row.begin(), row.end(), rng);
        table.push_back(row);
    }
    MixtureOraclePredictor oracle({table}, 0.0);
    for (int t = 0; t < 50; ++t) {
        const Token obs = static_cast<Token>(rng() % 3);
        const Token act = static_cast<Token>(rng() % 3);
        CHECK(step_loss(oracle, obs, act) ==
              doctest::Approx(-std::log(table[obs][act])).epsilon(1e-12));
        oracle.observe(obs, act);
    }
}

TEST_CASE("oracle mixes a uniform posterior symmetrically") {
    PolicyTable skill_a{{1.0, 0.0}};
    PolicyTable skill_b{{0.0, 1.0}};
    MixtureOraclePredictor oracle({skill_a, skill_b}, 0.0);
    const auto dist = oracle.predict(0);
    CHECK(dist[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(dist[1] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("oracle propagates the switching prior before mixing") {
    // Deterministic skills: one observation pins the posterior, then the
    // switch prior leaks 1/K to the other skill.
    PolicyTable skill_a{{1.0, 0.0}};
    PolicyTable skill_b{{0.0, 1.0}};
    MixtureOraclePredictor oracle({skill_a, skill_b}, 0.01);
    oracle.observe(0, 0);
    CHECK(oracle.posterior()[0] == doctest::Approx(1.0).epsilon(1e-12));
    const auto dist = oracle.predict(0);
    CHECK(dist[0] == doctest::Approx(0.99).epsilon(1e-12));
    CHECK(dist[1] == doctest::Approx(0.01).epsilon(1e-12));
}

TEST_CASE("oracle filter matches exhaustive path enumeration") {
    std::mt19937_64 rng(31337);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t n = 2 + trial % 2;  // 2 or 3 skills
        const Token obs_vocab = 2, act_vocab = 3;
        std::vector<PolicyTable> skills;
        for (std::size_t j = 0; j < n; ++j) {
            PolicyTable table;
            for (Token o = 0; o < obs_vocab; ++o) {
                std::vector<double> row(act_vocab);
                double sum = 0.0;
                for (auto& v : row) {
                    v = 0.05 + static_cast<double>(rng() % 1000);
                    sum += v;
                }
                for (auto& v : row) v /= sum;
                table.push_back(row);
            }
            skills.push_back(table);
        }
        const double s = 0.15;

        MixtureOraclePredictor oracle(skills, s);
        std::vector<std::pair<Token, Token>> hist;
        for (int t = 0; t < 5; ++t) {
            const Token obs = static_cast<Token>(rng() % obs_vocab);

            const auto expected_dist = enumerate_predictive(skills, s, hist, obs);
            const auto dist = oracle.predict(obs);
            for (Token a = 0; a < act_vocab; ++a)
                CHECK(dist[a] == doctest::Approx(expected_dist[a]).epsilon(1e-9));

            const Token act = static_cast<Token>(rng() % act_vocab);
            oracle.observe(obs, act);
            hist.emplace_back(obs, act);

            const auto expected_post = enumerate_posterior(skills, s, hist);
            double sum = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                CHECK(oracle.posterior()[j] ==
                      doctest::Approx(expected_post[j]).epsilon(1e-9));
                sum += oracle.posterior()[j];
            }
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
        }
    }
}

TEST_CASE("oracle rejects malformed configurations") {
    CHECK_THROWS_AS(MixtureOraclePredictor({}, 0.0), std::invalid_argument);
    PolicyTable bad{{0.5, 0.4}};  // sums to 0.9
    CHECK_THROWS_AS(MixtureOraclePredictor({bad}, 0.0), std::invalid_argument);
    PolicyTable ok{{0.5, 0.5}};
    CHECK_THROWS_AS(MixtureOraclePredictor({ok}, 0.5), std::invalid_argument);
}

TEST_CASE("training validates its corpus") {
    CHECK_THROWS_AS(train_count_predictor({}, 1, 1.0), std::invalid_argument);
    std::mt19937_64 rng(1);
    std::vector<Trajectory> corpus{random_trajectory(rng, 10, 3, 3, "a"),
                                   random_trajectory(rng, 10, 4, 3, "b")};
    CHECK_THROWS_AS(train_count_predictor(corpus, 1, 1.0), std::invalid_argument);
    std::vector<Trajectory> one{random_trajectory(rng, 10, 3, 3, "a")};
    CHECK_THROWS_AS(train_count_predictor(one, 1, 0.0), std::invalid_argument);
}
