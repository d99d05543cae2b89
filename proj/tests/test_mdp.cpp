#include <catch_amalgamated.hpp>

#include <random>

#include "girl/envs.hpp"
#include "girl/mdp.hpp"
#include "oracles.hpp"

using namespace girl;
using Catch::Matchers::WithinAbs;

namespace {

TabularMdp two_state_chain() {
    // Action 0 stays, action 1 swaps; reward only in state 1.
    Matrix stay = Matrix::Identity(2, 2);
    Matrix swap(2, 2);
    swap << 0, 1, 1, 0;
    Vector r(2);
    r << 0, 1;
    return TabularMdp({stay, swap}, r, 0.9);
}

} // namespace

TEST_CASE("construction rejects malformed models", "[mdp]") {
    Matrix bad(2, 2);
    bad << 0.5, 0.4, 0, 1;
    Vector r = Vector::Zero(2);
    CHECK_THROWS_AS(TabularMdp({bad}, r, 0.9), ValidationError);
    CHECK_THROWS_AS(TabularMdp({Matrix::Identity(3, 3)}, r, 0.9), ShapeError);
    CHECK_THROWS_AS(TabularMdp({Matrix::Identity(2, 2)}, r, 1.0), ValidationError);
    CHECK_THROWS_AS(TabularMdp({}, r, 0.5), ValidationError);
}

TEST_CASE("policy evaluation on a two-state chain", "[mdp]") {
    const auto mdp = two_state_chain();
    const auto go = PolicyMatrix::deterministic({1, 0}, 2);
    const Vector v = policy_value(mdp, go);
    // V(1) = 1 / (1 - 0.9) = 10, V(0) = 0.9 * 10.
    CHECK_THAT(v(1), WithinAbs(10.0, 1e-12));
    CHECK_THAT(v(0), WithinAbs(9.0, 1e-12));
    CHECK(is_optimal(mdp, go).satisfied);
    CHECK_FALSE(is_optimal(mdp, PolicyMatrix::deterministic({0, 0}, 2)).satisfied);
}

TEST_CASE("single-action MDP: the only policy is optimal", "[mdp]") {
    std::mt19937_64 rng(3);
    const auto mdp = oracle::random_mdp(rng, 4, 1, 0.8);
    const auto pi = solve_optimal_policy(mdp);
    CHECK(pi.actions() == std::vector<std::size_t>(4, 0));
    CHECK(is_optimal(mdp, pi).satisfied);
}

TEST_CASE("certificate rejects stochastic policies", "[mdp]") {
    const auto mdp = two_state_chain();
    CHECK_THROWS_AS(is_optimal(mdp, PolicyMatrix::uniform(2, 2)), ValidationError);
}

TEST_CASE("solver agrees with value iteration on random MDPs", "[mdp][oracle]") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + rng() % 6;
        const std::size_t na = 1 + rng() % 4;
        const auto mdp = oracle::random_mdp(rng, n, na, 0.5 + 0.45 * (rng() % 100) / 100.0);
        const auto pi = solve_optimal_policy(mdp);
        const Vector v = policy_value(mdp, pi);
        const Vector v_star = oracle::value_iteration(mdp);
        CHECK((v - v_star).cwiseAbs().maxCoeff() < 1e-8);
        CHECK(is_optimal(mdp, pi).satisfied);
    }
}

TEST_CASE("certificate matches value dominance on every deterministic policy", "[mdp][oracle]") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = 1 + rng() % 3;
        const std::size_t na = 1 + rng() % 3;
        const auto mdp = oracle::random_mdp(rng, n, na, 0.9);
        oracle::for_each_policy(n, na, [&](const std::vector<std::size_t>& actions) {
            const auto pi = PolicyMatrix::deterministic(actions, na);
            CHECK(is_optimal(mdp, pi, 1e-9).satisfied == oracle::dominates_all(mdp, actions, 1e-9));
        });
    }
}

TEST_CASE("5x5 grid optimal policy never moves down", "[mdp][grid]") {
    const auto mdp = envs::make_discrete_grid({});
    const auto pi = solve_optimal_policy(mdp);
    for (auto a : pi.actions()) CHECK(a != envs::Down);
    const Vector v = policy_value(mdp, pi);
    CHECK((v - oracle::value_iteration(mdp)).cwiseAbs().maxCoeff() < 1e-8);
}
