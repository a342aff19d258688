#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "sbd/synth.hpp"

using namespace sbd;

namespace {

GeneratorConfig base_config() {
    GeneratorConfig cfg;
    cfg.K = 50.0;
    cfg.c = 0.9;
    cfg.delta = 0.01;
    cfg.m = 0.05;
    cfg.obs_vocab = 8;
    cfg.act_vocab = 8;
    cfg.n_skills = 4;
    cfg.horizon = 500;
    cfg.seed = 99;
    cfg.p_event = 0.5;
    return cfg;
}

}  // namespace

TEST_CASE("skill library construction is deterministic and well-formed") {
    const GeneratorConfig cfg = base_config();
    const auto lib1 = build_skill_library(cfg);
    const auto lib2 = build_skill_library(cfg);
    REQUIRE(lib1.size() == 4);
    for (std::size_t j = 0; j < lib1.size(); ++j) {
        CHECK(lib1[j].policy == lib2[j].policy);
        for (Token o = 0; o < cfg.obs_vocab; ++o) {
            const auto& row = lib1[j].policy[o];
            double sum = 0.0, best = 0.0;
            for (double p : row) {
                CHECK(p >= 0.0);
                sum += p;
                best = std::max(best, p);
            }
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(best >= cfg.c);
        }
    }
}

TEST_CASE("deviance cap holds for every observation and skill pair") {
    // Exhaustive check of the cross-dominant inequality, including the tight
    // two-action case where naive uniform spreading would violate it.
    for (Token acts : {2u, 3u, 8u}) {
        GeneratorConfig cfg = base_config();
        cfg.n_skills = 2;
        cfg.act_vocab = acts;
        cfg.c = 0.9;
        cfg.m = 0.1;
        const auto lib = build_skill_library(cfg);
        const double cap = 0.5 * cfg.m * cfg.c;
        for (Token o = 0; o < cfg.obs_vocab; ++o) {
            for (int j = 0; j < 2; ++j) {
                const Token other_dom = (static_cast<Token>(1 - j) + o) % acts;
                CHECK(lib[j].policy[o][other_dom] <= cap + 1e-12);
            }
        }
    }
}

TEST_CASE("single-skill library has no deviance constraints") {
    GeneratorConfig cfg = base_config();
    cfg.n_skills = 1;
    cfg.K = 0.0;
    const auto lib = build_skill_library(cfg);
    REQUIRE(lib.size() == 1);
}

TEST_CASE("secondary share concentrates the confidence slack") {
    GeneratorConfig cfg = base_config();
    cfg.c = 0.8;
    cfg.delta = 0.15;
    cfg.secondary_share = 0.997;
    const auto lib = build_skill_library(cfg);
    for (int j = 0; j < cfg.n_skills; ++j) {
        for (Token o = 0; o < cfg.obs_vocab; ++o) {
            const Token dom = (static_cast<Token>(j) + o) % cfg.act_vocab;
            const Token sec = (static_cast<Token>(j + cfg.n_skills) + o) % cfg.act_vocab;
            CHECK(lib[j].policy[o][dom] == doctest::Approx(0.85).epsilon(1e-9));
            CHECK(lib[j].policy[o][sec] == doctest::Approx(0.15 * 0.997).epsilon(1e-9));
        }
    }
}

TEST_CASE("switching disabled produces zero boundaries") {
    GeneratorConfig cfg = base_config();
    cfg.K = 0.0;
    const auto lt = generate(cfg, 0);
    CHECK(lt.true_boundaries.boundaries.empty());
    for (const auto& step : lt.trajectory.steps) CHECK(step.skill == lt.trajectory.steps[0].skill);
}

TEST_CASE("generation is deterministic per (seed, index)") {
    const GeneratorConfig cfg = base_config();
    const auto a = generate(cfg, 3);
    const auto b = generate(cfg, 3);
    REQUIRE(a.trajectory.steps.size() == b.trajectory.steps.size());
    for (std::size_t t = 0; t < a.trajectory.steps.size(); ++t) {
        CHECK(a.trajectory.steps[t].obs == b.trajectory.steps[t].obs);
        CHECK(a.trajectory.steps[t].act == b.trajectory.steps[t].act);
        CHECK(a.trajectory.steps[t].skill == b.trajectory.steps[t].skill);
        CHECK(a.trajectory.steps[t].events == b.trajectory.steps[t].events);
    }
    const auto c = generate(cfg, 4);
    bool different = false;
    for (std::size_t t = 0; t < std::min(a.trajectory.steps.size(), c.trajectory.steps.size());
         ++t)
        different = different || a.trajectory.steps[t].act != c.trajectory.steps[t].act;
    CHECK(different);
}

TEST_CASE("true boundaries are exactly the skill changes") {
    const GeneratorConfig cfg = base_config();
    const auto lt = generate(cfg, 7);
    const auto derived = true_boundaries_of(lt.trajectory);
    CHECK(derived.indices() == lt.true_boundaries.indices());
    for (std::int64_t b : lt.true_boundaries.indices()) {
        CHECK(lt.trajectory.steps[b].skill != lt.trajectory.steps[b - 1].skill);
    }
}

TEST_CASE("empirical switch frequency matches 1/K") {
    GeneratorConfig cfg = base_config();
    cfg.K = 50.0;
    cfg.horizon = 10000;
    cfg.p_event = 0.0;
    std::int64_t switches = 0;
    const std::int64_t n_traj = 100;
    for (std::int64_t i = 0; i < n_traj; ++i) {
        const auto lt = generate(cfg, i);
        switches += static_cast<std::int64_t>(lt.true_boundaries.boundaries.size());
    }
    const double trials = static_cast<double>((cfg.horizon - 1) * n_traj);
    const double mean = trials / cfg.K;
    const double sigma = std::sqrt(trials * (1.0 / cfg.K) * (1.0 - 1.0 / cfg.K));
    CHECK(std::abs(static_cast<double>(switches) - mean) <= 3.0 * sigma);
}

TEST_CASE("every realized action has positive probability under its skill") {
    const GeneratorConfig cfg = base_config();
    const auto lib = build_skill_library(cfg);
    const auto lt = generate(cfg, 11);
    for (const auto& step : lt.trajectory.steps) {
        CHECK(lib[static_cast<std::size_t>(*step.skill)].policy[step.obs][step.act] > 0.0);
    }
}

TEST_CASE("post-switch actions are deviant under the previous skill") {
    const GeneratorConfig cfg = base_config();
    const auto lib = build_skill_library(cfg);
    std::int64_t boundaries = 0, deviant = 0;
    for (std::int64_t i = 0; i < 40; ++i) {
        const auto lt = generate(cfg, 100 + i);
        const auto& steps = lt.trajectory.steps;
        std::vector<std::int64_t> starts = {0};
        for (std::int64_t b : lt.true_boundaries.indices()) starts.push_back(b);
        starts.push_back(lt.trajectory.length());

        for (std::size_t s = 0; s + 2 < starts.size(); ++s) {
            const std::int64_t seg_begin = starts[s], boundary = starts[s + 1];
            const int old_skill = *steps[static_cast<std::size_t>(boundary - 1)].skill;
            const auto& policy = lib[static_cast<std::size_t>(old_skill)].policy;
            double log_sum = 0.0;
            for (std::int64_t t = seg_begin; t < boundary; ++t)
                log_sum += std::log(
                    policy[steps[static_cast<std::size_t>(t)].obs]
                          [steps[static_cast<std::size_t>(t)].act]);
            const double geomean =
                std::exp(log_sum / static_cast<double>(boundary - seg_begin));
            const auto& next = steps[static_cast<std::size_t>(boundary)];
            const double ratio = policy[next.obs][next.act] / geomean;
            boundaries += 1;
            if (ratio < 0.5 * cfg.m) deviant += 1;
        }
    }
    REQUIRE(boundaries > 200);
    const double rate = static_cast<double>(deviant) / static_cast<double>(boundaries);
    const double sigma = std::sqrt(cfg.delta / static_cast<double>(boundaries));
    CHECK(rate >= 1.0 - cfg.delta - 3.0 * sigma);
}

TEST_CASE("echo observations mirror the previous action") {
    GeneratorConfig cfg = base_config();
    cfg.obs_process = ObsProcess::echo();
    const auto lt = generate(cfg, 2);
    const auto& steps = lt.trajectory.steps;
    for (std::size_t t = 1; t < steps.size(); ++t) CHECK(steps[t].obs == steps[t - 1].act);
}

TEST_CASE("markov observations follow the chain support") {
    GeneratorConfig cfg = base_config();
    cfg.obs_vocab = 3;
    cfg.act_vocab = 8;
    // Deterministic cycle 0 -> 1 -> 2 -> 0.
    cfg.obs_process = ObsProcess::markov({{0, 1, 0}, {0, 0, 1}, {1, 0, 0}});
    const auto lt = generate(cfg, 0);
    const auto& steps = lt.trajectory.steps;
    for (std::size_t t = 1; t < steps.size(); ++t)
        CHECK(steps[t].obs == (steps[t - 1].obs + 1) % 3);
}

TEST_CASE("injected events sit only on true boundaries") {
    const GeneratorConfig cfg = base_config();
    std::int64_t flagged = 0, boundaries = 0;
    for (std::int64_t i = 0; i < 30; ++i) {
        const auto lt = generate(cfg, 500 + i);
        std::vector<bool> is_boundary(lt.trajectory.steps.size(), false);
        for (std::int64_t b : lt.true_boundaries.indices())
            is_boundary[static_cast<std::size_t>(b)] = true;
        boundaries += static_cast<std::int64_t>(lt.true_boundaries.boundaries.size());
        for (const auto& step : lt.trajectory.steps) {
            if (!step.events.empty()) {
                CHECK(is_boundary[static_cast<std::size_t>(step.index)]);
                flagged += 1;
            }
        }
    }
    const double rate = static_cast<double>(flagged) / static_cast<double>(boundaries);
    const double sigma = std::sqrt(0.25 / static_cast<double>(boundaries));
    CHECK(std::abs(rate - cfg.p_event) <= 3.0 * sigma);
}

TEST_CASE("generator configuration is validated") {
    GeneratorConfig cfg = base_config();
    cfg.K = 0.5;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

    cfg = base_config();
    cfg.n_skills = 9;  // > act_vocab with enforce_deviance
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

    cfg = base_config();
    cfg.obs_process = ObsProcess::echo();
    cfg.obs_vocab = 4;  // < act_vocab
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

    cfg = base_config();
    cfg.secondary_share = 0.9;
    cfg.n_skills = 5;  // 2 * 5 > act_vocab
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

    cfg = base_config();
    cfg.obs_process = ObsProcess::markov({{1.0}});  // wrong shape
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

    CHECK(base_config().separation_ok());
    cfg = base_config();
    cfg.m = cfg.c;
    CHECK_FALSE(cfg.separation_ok());
}
