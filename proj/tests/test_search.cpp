#include <catch_amalgamated.hpp>

#include <random>

#include "girl/envs.hpp"
#include "girl/search.hpp"
#include "oracles.hpp"

using namespace girl;
using Catch::Matchers::WithinAbs;

TEST_CASE("combination and assignment successors", "[search]") {
    std::vector<std::size_t> idx{0, 1};
    std::vector<std::vector<std::size_t>> seen{idx};
    while (detail::next_combination(idx, 4)) seen.push_back(idx);
    CHECK(seen == std::vector<std::vector<std::size_t>>{{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}});

    std::vector<std::size_t> digits{0, 0};
    std::size_t count = 1;
    while (detail::next_assignment(digits, 3)) ++count;
    CHECK(count == 9);
}

TEST_CASE("search score equals exhaustive minimization", "[search][oracle]") {
    std::mt19937_64 rng(51);
    for (int trial = 0; trial < 25; ++trial) {
        const auto task = oracle::random_task(rng, 4);
        const std::size_t n = task.known.n_states;
        const auto observed = oracle::random_actions(rng, n, task.known.n_actions);
        SearchConfig cfg;
        cfg.eta = n;
        const auto r = global_search(task, PolicyMatrix::deterministic(observed, task.known.n_actions), cfg);
        INFO("trial " << trial << " kind " << to_string(task.unknown_kind));
        CHECK_THAT(r.score, WithinAbs(oracle::exhaustive_score(task, observed, n), 1e-7));
        CHECK(oracle::result_certified(task, r, 1e-6));
    }
}

TEST_CASE("incremental and plain search agree on the score", "[search][property]") {
    std::mt19937_64 rng(52);
    for (int trial = 0; trial < 20; ++trial) {
        const auto task = oracle::random_task(rng, 4);
        const auto observed = PolicyMatrix::deterministic(
            oracle::random_actions(rng, task.known.n_states, task.known.n_actions), task.known.n_actions);
        SearchConfig plain;
        plain.eta = task.known.n_states;
        plain.incremental = false;
        SearchConfig inc = plain;
        inc.incremental = true;
        SearchConfig unpruned = inc;
        unpruned.prune = false;
        const double a = global_search(task, observed, plain).score;
        CHECK_THAT(global_search(task, observed, inc).score, WithinAbs(a, 1e-9));
        CHECK_THAT(global_search(task, observed, unpruned).score, WithinAbs(a, 1e-9));
    }
}

TEST_CASE("worker count does not change the result", "[search][property]") {
    std::mt19937_64 rng(53);
    for (int trial = 0; trial < 15; ++trial) {
        const auto task = oracle::random_task(rng, 4);
        const auto observed = PolicyMatrix::deterministic(
            oracle::random_actions(rng, task.known.n_states, task.known.n_actions), task.known.n_actions);
        SearchConfig cfg;
        cfg.eta = task.known.n_states;
        const auto one = global_search(task, observed, cfg);
        cfg.parallel_workers = 3;
        const auto three = global_search(task, observed, cfg);
        CHECK(one.score == three.score);
        CHECK(one.policy.entries() == three.policy.entries());
        CHECK(one.n_subproblems == three.n_subproblems);
        CHECK(one.estimate.candidate == three.estimate.candidate);
        if (one.estimate.reward) CHECK(*one.estimate.reward == *three.estimate.reward);
    }
}

TEST_CASE("grid reward search undoes noisy rows", "[search]") {
    const auto mdp = envs::make_discrete_grid({});
    const auto pi = solve_optimal_policy(mdp);
    GirlTask t;
    t.known = PartialMdp::from(mdp);
    t.known.reward.reset();
    t.penalty_weight = 4.0;
    SearchConfig cfg;
    cfg.eta = 2;
    const auto r = global_search(t, envs::make_noisy_policy(pi, 2), cfg);
    CHECK(criterion2(mdp, r.policy));
    CHECK(criterion1({CriterionKind::Reward, 25}, mdp.reward(), *r.estimate.reward) <= 1e-6);
    // C(25,0) + 3 C(25,1) + 9 C(25,2) policies at deviation levels 0..2.
    CHECK(r.n_subproblems == 1 + 75 + 2700);
}

TEST_CASE("search input validation", "[search]") {
    const auto mdp = envs::make_discrete_grid({});
    GirlTask t;
    t.known = PartialMdp::from(mdp);
    t.known.reward.reset();
    const auto pi = solve_optimal_policy(mdp);
    SearchConfig cfg;
    cfg.eta = 26;
    CHECK_THROWS_AS(global_search(t, pi, cfg), ValidationError);
    cfg.eta = 0;
    cfg.parallel_workers = 0;
    CHECK_THROWS_AS(global_search(t, pi, cfg), ValidationError);
    cfg.parallel_workers = 1;
    CHECK_THROWS_AS(global_search(t, PolicyMatrix::uniform(25, 4), cfg), ValidationError);
}

TEST_CASE("no feasible explanation is reported", "[search]") {
    // Known-reward task whose single candidate makes the observed policy suboptimal, with eta = 0.
    Matrix stay = Matrix::Identity(2, 2);
    Matrix swap(2, 2);
    swap << 0, 1, 1, 0;
    Vector r(2);
    r << 0, 1;
    const TabularMdp mdp({stay, swap}, r, 0.9);
    GirlTask t;
    t.known = PartialMdp::from(mdp);
    t.unknown_kind = UnknownKind::State;
    for (auto& p : t.known.transitions) p.reset();
    t.state_candidates = {mdp.transitions()};
    SearchConfig cfg;
    CHECK_THROWS_AS(global_search(t, PolicyMatrix::deterministic({0, 0}, 2), cfg), NoFeasibleExplanation);
    cfg.eta = 1;
    const auto res = global_search(t, PolicyMatrix::deterministic({0, 0}, 2), cfg);
    CHECK(res.policy.actions() == std::vector<std::size_t>{1, 0});
}
