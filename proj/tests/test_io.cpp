#include <catch_amalgamated.hpp>

#include <filesystem>
#include <random>
#include <sstream>

#include "girl/envs.hpp"
#include "girl/io.hpp"
#include "oracles.hpp"

using namespace girl;

TEST_CASE("MDP JSON round trip is bit exact", "[io]") {
    std::mt19937_64 rng(61);
    for (int trial = 0; trial < 20; ++trial) {
        const auto mdp = oracle::random_mdp(rng, 1 + rng() % 6, 1 + rng() % 4, 0.37 + 0.01 * (rng() % 50));
        const auto text = io::to_json(mdp).dump();
        const auto back = io::mdp_from_json(io::json::parse(text));
        CHECK(back.gamma() == mdp.gamma());
        CHECK(back.reward() == mdp.reward());
        for (std::size_t a = 0; a < mdp.n_actions(); ++a) CHECK(back.transition(a) == mdp.transition(a));
    }
}

TEST_CASE("MDP JSON errors name the field", "[io]") {
    auto j = io::to_json(envs::make_discrete_grid({}));
    j.erase("gamma");
    CHECK_THROWS_WITH(io::mdp_from_json(j), Catch::Matchers::ContainsSubstring("gamma"));
    j = io::to_json(envs::make_discrete_grid({}));
    j["reward"].erase(0);
    CHECK_THROWS_AS(io::mdp_from_json(j), ShapeError);
    j = io::to_json(envs::make_discrete_grid({}));
    j["transitions"][0][3][1] = 0.9;
    CHECK_THROWS_AS(io::mdp_from_json(j), ValidationError);
}

TEST_CASE("policy JSON and text forms", "[io]") {
    const auto pi = PolicyMatrix::deterministic({1, 0, 3, 2}, 4);
    CHECK(io::policy_from_json(io::json::parse(io::to_json(pi).dump())).entries() == pi.entries());

    std::ostringstream out;
    io::policy_to_text(pi, out);
    CHECK(out.str() == "1\n0\n3\n2\n");
    std::istringstream in("# observed\n1\n\n0  # noisy\n3\n2\n");
    CHECK(io::policy_from_text(in, 4).actions() == pi.actions());

    std::istringstream bad("1\nx\n");
    CHECK_THROWS_WITH(io::policy_from_text(bad, 4), Catch::Matchers::ContainsSubstring("line 2"));
    std::istringstream range("4\n");
    CHECK_THROWS_AS(io::policy_from_text(range, 4), ValidationError);
}

TEST_CASE("task JSON round trip", "[io]") {
    envs::DiscreteGridSpec spec;
    const auto mdp = envs::make_discrete_grid(spec);
    GirlTask t;
    t.known = PartialMdp::from(mdp);
    t.known.reward.reset();
    t.unknown_kind = UnknownKind::RewardPlusAction;
    t.hidden_action = envs::Right;
    t.known.transitions[envs::Right].reset();
    t.action_candidates = {mdp.transition(envs::Right), envs::make_diag_action_matrix(spec)};
    t.candidate_labels = {"right", "up-right"};
    t.penalty_weight = 0.25;
    const auto back = io::task_from_json(io::json::parse(io::to_json(t).dump()));
    CHECK(back.unknown_kind == t.unknown_kind);
    CHECK(back.hidden_action == t.hidden_action);
    CHECK(back.penalty_weight == 0.25);
    CHECK(back.candidate_labels == t.candidate_labels);
    CHECK(back.action_candidates[1] == t.action_candidates[1]);
    CHECK_FALSE(back.known.transitions[envs::Right].has_value());
    CHECK_FALSE(back.known.reward.has_value());

    auto j = io::to_json(t);
    j["kind"] = "rewards";
    CHECK_THROWS_AS(io::task_from_json(j), ValidationError);
    j = io::to_json(t);
    j.erase("penalty_weight");
    CHECK(io::task_from_json(j).penalty_weight == GirlTask::default_penalty_weight(1.0, 25));
}

TEST_CASE("result document carries estimate and config", "[io]") {
    GirlResult r;
    r.policy = PolicyMatrix::deterministic({0, 1}, 2);
    r.estimate.candidate = 1;
    r.estimate.reward = Vector::Ones(2);
    r.score = 0.5;
    GirlTask t;
    t.candidate_labels = {"a", "b"};
    const auto j = io::to_json(r, {{"seed", 7}}, &t);
    CHECK(j.at("estimate").at("candidate_label") == "b");
    CHECK(j.at("config").at("seed") == 7);
    CHECK(j.at("score") == 0.5);
}

TEST_CASE("reading files reports paths", "[io]") {
    const auto dir = std::filesystem::temp_directory_path() / "girl-io-test";
    std::filesystem::create_directories(dir);
    const auto path = (dir / "broken.json").string();
    io::write_text_file(path, "{ nope");
    CHECK_THROWS_WITH(io::read_json_file(path), Catch::Matchers::ContainsSubstring("broken.json"));
    CHECK_THROWS_AS(io::read_json_file((dir / "missing.json").string()), ValidationError);
    std::filesystem::remove_all(dir);
}
