#include <catch_amalgamated.hpp>

#include <cmath>

#include "girl/envs.hpp"
#include "girl/policy.hpp"
#include "oracles.hpp"

using namespace girl;
using namespace girl::envs;
using Catch::Matchers::WithinAbs;

namespace {

const int kDr[4] = {1, 0, -1, 0};
const int kDc[4] = {0, 1, 0, -1};

void check_rows_match(const Matrix& m, const DiscreteGridSpec& spec, int dr, int dc) {
    const std::vector<std::size_t> blocked(spec.blocked.begin(), spec.blocked.end());
    for (std::size_t s = 0; s < spec.side * spec.side; ++s) {
        const auto expected = oracle::grid_row(spec.side, spec.noise_prob, s, dr, dc, blocked, spec.absorbing_cell());
        for (std::size_t t = 0; t < expected.size(); ++t)
            CHECK_THAT(m(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t)), WithinAbs(expected[t], 1e-15));
    }
}

} // namespace

TEST_CASE("discrete grid matches outcome enumeration", "[envs][oracle]") {
    for (std::size_t side : {2u, 3u, 5u}) {
        DiscreteGridSpec spec;
        spec.side = side;
        if (side == 5) spec.blocked = {12};
        const auto mdp = make_discrete_grid(spec);
        REQUIRE(mdp.n_states() == side * side);
        REQUIRE(mdp.n_actions() == 4);
        for (std::size_t a = 0; a < 4; ++a) check_rows_match(mdp.transition(a), spec, kDr[a], kDc[a]);
        check_rows_match(make_diag_action_matrix(spec), spec, 1, 1);
    }
}

TEST_CASE("discrete grid examples", "[envs]") {
    const DiscreteGridSpec spec;
    const auto mdp = make_discrete_grid(spec);
    // Interior cell 12 moving right lands in 13 with 0.7 + 0.3 / 4.
    CHECK_THAT(mdp.transition(Right)(12, 13), WithinAbs(0.775, 1e-15));
    for (std::size_t a = 0; a < 4; ++a) {
        CHECK(mdp.transition(a).row(24).sum() == 1.0);
        CHECK(mdp.transition(a)(24, 24) == 1.0);
    }
    CHECK(mdp.reward()(24) == 1.0);
    CHECK(mdp.reward().sum() == 1.0);
    const Matrix diag = make_diag_action_matrix(spec);
    CHECK_THAT(diag(12, 18), WithinAbs(0.7, 1e-15));
    // Cell 19 sits on the right wall: the diagonal clips to straight up.
    CHECK_THAT(diag(19, 24), WithinAbs(0.775, 1e-15));
}

TEST_CASE("blocked cell receives no mass", "[envs]") {
    DiscreteGridSpec spec;
    spec.blocked = {12};
    const auto mdp = make_discrete_grid(spec);
    for (std::size_t a = 0; a < 4; ++a) {
        CHECK(mdp.transition(a).col(12).sum() == 0.0);
        CHECK_THAT(mdp.transition(a)(7, 7), WithinAbs(a == Up ? 0.775 : 0.075, 1e-15));
    }
    CHECK(make_diag_action_matrix(spec).col(12).sum() == 0.0);
    spec.blocked = {24};
    CHECK_THROWS_AS(make_discrete_grid(spec), ValidationError);
    spec.blocked = {25};
    CHECK_THROWS_AS(make_discrete_grid(spec), ValidationError);
    spec.blocked = {};
    spec.noise_prob = 1.5;
    CHECK_THROWS_AS(make_discrete_grid(spec), ValidationError);
}

TEST_CASE("noisy policies", "[envs]") {
    const auto mdp = make_discrete_grid({});
    const auto pi = solve_optimal_policy(mdp);
    CHECK(make_noisy_policy(pi, 0).entries() == pi.entries());
    const auto two = make_noisy_policy(pi, 2);
    CHECK(distance(pi, two).hamming_rows == 2);
    CHECK_THAT(distance(pi, two).frobenius, WithinAbs(2.0, 1e-15));
    CHECK(two.actions()[0] == Down);
    CHECK(two.actions()[1] == Down);
    for (std::size_t n = 1; n <= 4; ++n) CHECK_FALSE(is_optimal(mdp, make_noisy_policy(pi, n)).satisfied);
    CHECK_THROWS_AS(make_noisy_policy(pi, 26), ValidationError);
}

TEST_CASE("continuous grid is stochastic and deterministic per seed", "[envs]") {
    ContinuousGridSpec spec;
    spec.seed = 11;
    const auto a = discretize_continuous_grid(spec);
    const auto b = discretize_continuous_grid(spec);
    REQUIRE(a.n_states() == 100);
    REQUIRE(a.n_actions() == 4);
    for (std::size_t k = 0; k < 4; ++k) {
        CHECK(a.transition(k) == b.transition(k));
        CHECK((a.transition(k).rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-12);
        CHECK(a.transition(k).minCoeff() >= 0.0);
    }
    // The region [0.8, 1]^2 holds exactly the top-right 2x2 block of centres.
    CHECK(a.reward().sum() == 4.0);
    for (std::size_t s : {88u, 89u, 98u, 99u}) CHECK(a.reward()(static_cast<Eigen::Index>(s)) == 1.0);
    CHECK(a.gamma() == 0.9);
    spec.seed = 12;
    CHECK(discretize_continuous_grid(spec).transition(0) != a.transition(0));
}

TEST_CASE("continuous moves respect the step and noise support", "[envs]") {
    for (std::size_t d : {10u, 20u}) {
        ContinuousGridSpec spec;
        spec.divisions = d;
        spec.n_samples = 300;
        const auto mdp = discretize_continuous_grid(spec);
        const double width = 1.0 / static_cast<double>(d);
        const auto reach = static_cast<std::size_t>(std::ceil((spec.step + spec.noise_half_width) / width));
        const auto g = spec.geometry();
        for (std::size_t row = 0; row < d; ++row) {
            const std::size_t s = g.index(row, 0);
            for (std::size_t t = 0; t < g.n_cells(); ++t) {
                if (mdp.transition(Right)(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t)) == 0.0) continue;
                CHECK(g.col_of(t) <= reach);
            }
        }
    }
}

TEST_CASE("more samples shrink the gap between independent seeds", "[envs][statistical]") {
    // Binomial standard errors scale as 1 / sqrt(n), so a tenfold n predicts a gap sqrt(10) times smaller.
    auto max_gap = [](std::size_t n) {
        ContinuousGridSpec a;
        a.n_samples = n;
        a.seed = 1;
        ContinuousGridSpec b = a;
        b.seed = 2;
        const auto ma = discretize_continuous_grid(a);
        const auto mb = discretize_continuous_grid(b);
        double gap = 0.0;
        for (std::size_t k = 0; k < 4; ++k) gap = std::max(gap, (ma.transition(k) - mb.transition(k)).cwiseAbs().maxCoeff());
        return gap;
    };
    const double small = max_gap(100);
    const double large = max_gap(1000);
    CHECK(large < small);
    CHECK(large <= 3.0 * small / std::sqrt(10.0));
}

TEST_CASE("gaussian features", "[envs]") {
    for (std::size_t d : {10u, 20u, 30u}) {
        const auto phi = gaussian_features({d, d}, default_features_for(d));
        CHECK(static_cast<std::size_t>(phi.rows()) == d * d);
        CHECK(static_cast<std::size_t>(phi.cols()) == (d / 2) * (d / 2));
        CHECK(phi.minCoeff() > 0.0);
        CHECK(phi.maxCoeff() <= 1.0);
    }
    // Centre (0.1, 0.1) and cell (0, 0) centre (0.05, 0.05) on a 10x10 grid with bandwidth 0.2.
    const auto phi = gaussian_features({10, 10}, default_features_for(10));
    CHECK_THAT(phi(0, 0), WithinAbs(std::exp(-0.005 / (2.0 * 0.04)), 1e-15));
    // Column order: j * k + i with j the lattice row from the bottom.
    CHECK_THAT(phi(99, 24), WithinAbs(phi.col(24).maxCoeff(), 1e-15));
    CHECK_THAT(phi(9, 4), WithinAbs(phi.col(4).maxCoeff(), 1e-15));
    CHECK_THROWS_AS(gaussian_features({10, 10}, GaussianFeatureSpec{4, 0.0}), ValidationError);
}

TEST_CASE("grid specs validate their ranges", "[envs]") {
    ContinuousGridSpec spec;
    spec.divisions = 1;
    CHECK_THROWS_AS(discretize_continuous_grid(spec), ValidationError);
    spec.divisions = 10;
    spec.n_samples = 0;
    CHECK_THROWS_AS(discretize_continuous_grid(spec), ValidationError);
}
