#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "girl/mdp.hpp"
#include "girl/types.hpp"

namespace girl::envs {

/// Compass action indices shared by all grid worlds.
enum Action : std::size_t { Up = 0, Right = 1, Down = 2, Left = 3 };
inline constexpr std::size_t kCompassActions = 4;
inline constexpr std::array<const char*, 4> kActionNames{"up", "right", "down", "left"};

/// Rectangular cell layout; cell s sits at column s % cols, row s / cols, row 0 at the bottom.
struct GridGeometry {
    std::size_t rows = 0;
    std::size_t cols = 0;

    std::size_t n_cells() const { return rows * cols; }
    std::size_t index(std::size_t row, std::size_t col) const { return row * cols + col; }
    std::size_t row_of(std::size_t s) const { return s / cols; }
    std::size_t col_of(std::size_t s) const { return s % cols; }
};

struct DiscreteGridSpec {
    std::size_t side = 5;
    double noise_prob = 0.3;
    std::set<std::size_t> blocked;
    /// Defaults to the upper-right cell.
    std::optional<std::size_t> absorbing;
    std::size_t start = 0;
    double goal_reward = 1.0;
    double gamma = 0.9;

    GridGeometry geometry() const { return {side, side}; }
    std::size_t absorbing_cell() const { return absorbing.value_or(side * side - 1); }

    void validate() const {
        detail::require(side >= 1, "grid side must be positive");
        detail::require(noise_prob >= 0.0 && noise_prob <= 1.0, "noise probability must lie in [0, 1]");
        detail::require(gamma >= 0.0 && gamma < 1.0, "gamma must lie in [0, 1)");
        detail::require(std::isfinite(goal_reward), "goal reward must be finite");
        const std::size_t n = side * side;
        detail::require(absorbing_cell() < n && start < n, "start and absorbing cells must lie on the grid");
        for (auto b : blocked) {
            detail::require(b < n, "blocked cell " + std::to_string(b) + " lies off the grid");
            detail::require(b != start && b != absorbing_cell(), "blocked cells must exclude start and absorbing cells");
        }
    }
};

namespace detail {

using girl::detail::require;

inline constexpr std::array<int, 4> kDeltaRow{1, 0, -1, 0};
inline constexpr std::array<int, 4> kDeltaCol{0, 1, 0, -1};

/// Cell reached by moving (dr, dc) with per-axis wall clipping; blocked targets keep the source cell.
inline std::size_t move(const DiscreteGridSpec& spec, std::size_t s, int dr, int dc) {
    const auto g = spec.geometry();
    const long r = std::clamp(static_cast<long>(g.row_of(s)) + dr, 0L, static_cast<long>(g.rows) - 1);
    const long c = std::clamp(static_cast<long>(g.col_of(s)) + dc, 0L, static_cast<long>(g.cols) - 1);
    const std::size_t target = g.index(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
    return spec.blocked.count(target) ? s : target;
}

/// Intended move with probability 1 - p, otherwise a compass direction drawn uniformly.
inline Matrix grid_matrix(const DiscreteGridSpec& spec, int intended_dr, int intended_dc) {
    spec.validate();
    const std::size_t n = spec.side * spec.side;
    Matrix p = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    const std::size_t absorbing = spec.absorbing_cell();
    for (std::size_t s = 0; s < n; ++s) {
        const auto si = static_cast<Eigen::Index>(s);
        if (s == absorbing) {
            p(si, si) = 1.0;
            continue;
        }
        if (spec.blocked.count(s)) {
            // Unreachable; parked on the absorbing cell so its own column stays empty.
            p(si, static_cast<Eigen::Index>(absorbing)) = 1.0;
            continue;
        }
        p(si, static_cast<Eigen::Index>(move(spec, s, intended_dr, intended_dc))) += 1.0 - spec.noise_prob;
        for (std::size_t d = 0; d < 4; ++d)
            p(si, static_cast<Eigen::Index>(move(spec, s, kDeltaRow[d], kDeltaCol[d]))) += spec.noise_prob / 4.0;
    }
    return p;
}

} // namespace detail

/// Grid world with actions (up, right, down, left) and reward only at the absorbing cell.
inline TabularMdp make_discrete_grid(const DiscreteGridSpec& spec) {
    spec.validate();
    std::vector<Matrix> ts;
    for (std::size_t a = 0; a < kCompassActions; ++a)
        ts.push_back(detail::grid_matrix(spec, detail::kDeltaRow[a], detail::kDeltaCol[a]));
    Vector reward = Vector::Zero(static_cast<Eigen::Index>(spec.side * spec.side));
    reward(static_cast<Eigen::Index>(spec.absorbing_cell())) = spec.goal_reward;
    return TabularMdp(std::move(ts), std::move(reward), spec.gamma);
}

/// Transition matrix of the diagonal up-right move under the same noise model.
inline Matrix make_diag_action_matrix(const DiscreteGridSpec& spec) { return detail::grid_matrix(spec, 1, 1); }

/// Copies the policy and forces `noisy_action` in the first n_noisy states.
inline PolicyMatrix make_noisy_policy(const PolicyMatrix& optimal, std::size_t n_noisy,
                                      std::size_t noisy_action = Down) {
    detail::require(n_noisy <= optimal.n_states(), "number of noisy states exceeds the number of states");
    detail::require(noisy_action < optimal.n_actions(), "noisy action index out of range");
    Matrix m = optimal.entries();
    for (std::size_t s = 0; s < n_noisy; ++s) {
        m.row(static_cast<Eigen::Index>(s)).setZero();
        m(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(noisy_action)) = 1.0;
    }
    return PolicyMatrix(std::move(m));
}

struct Box {
    double x_min = 0.8, x_max = 1.0, y_min = 0.8, y_max = 1.0;
};

struct ContinuousGridSpec {
    std::size_t divisions = 10;
    double step = 0.2;
    double noise_half_width = 0.1;
    std::size_t n_samples = 1000;
    std::uint64_t seed = 0;
    Box reward_region;
    double gamma = 0.9;

    GridGeometry geometry() const { return {divisions, divisions}; }

    void validate() const {
        detail::require(divisions >= 2, "continuous grid needs at least 2 divisions");
        detail::require(n_samples >= 1, "continuous grid needs at least one sample");
        detail::require(step >= 0.0 && noise_half_width >= 0.0, "step and noise width must be nonnegative");
        detail::require(gamma >= 0.0 && gamma < 1.0, "gamma must lie in [0, 1)");
        detail::require(reward_region.x_min <= reward_region.x_max && reward_region.y_min <= reward_region.y_max,
                        "reward region must be a non-empty box");
    }
};

/// splitmix64 finalizer, used to derive independent per-(cell, action) seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Uniform double in [0, 1) from the top 53 bits of a 64-bit draw.
inline double unit_double(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/**
 * Monte-Carlo discretization of the continuous grid world on [0, 1]^2.
 *
 * For every (cell, action) n_samples agents start at the cell center, move
 * `step` in the compass direction plus uniform noise in [-w, w]^2, are clamped
 * to [0, 1]^2 and binned. Each pair draws from an mt19937_64 seeded with
 * splitmix64(seed ^ splitmix64(cell * 4 + action)), so the result does not
 * depend on evaluation order. Cells whose center lies in the reward region
 * get reward 1.
 */
inline TabularMdp discretize_continuous_grid(const ContinuousGridSpec& spec) {
    spec.validate();
    const auto g = spec.geometry();
    const std::size_t n = g.n_cells();
    const double width = 1.0 / static_cast<double>(spec.divisions);
    const double h = spec.noise_half_width;
    auto bin = [&](double v) {
        const auto i = static_cast<std::size_t>(std::floor(v / width));
        return std::min(i, spec.divisions - 1);
    };
    std::vector<Matrix> ts(kCompassActions, Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)));
    std::vector<std::size_t> counts(n);
    for (std::size_t a = 0; a < kCompassActions; ++a) {
        for (std::size_t s = 0; s < n; ++s) {
            std::mt19937_64 rng(splitmix64(spec.seed ^ splitmix64(s * kCompassActions + a)));
            const double cx = (static_cast<double>(g.col_of(s)) + 0.5) * width;
            const double cy = (static_cast<double>(g.row_of(s)) + 0.5) * width;
            std::fill(counts.begin(), counts.end(), 0);
            for (std::size_t k = 0; k < spec.n_samples; ++k) {
                const double nx = -h + 2.0 * h * unit_double(rng);
                const double ny = -h + 2.0 * h * unit_double(rng);
                const double x = std::clamp(cx + spec.step * detail::kDeltaCol[a] + nx, 0.0, 1.0);
                const double y = std::clamp(cy + spec.step * detail::kDeltaRow[a] + ny, 0.0, 1.0);
                ++counts[g.index(bin(y), bin(x))];
            }
            for (std::size_t t = 0; t < n; ++t)
                if (counts[t])
                    ts[a](static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t)) =
                        static_cast<double>(counts[t]) / static_cast<double>(spec.n_samples);
        }
    }
    Vector reward = Vector::Zero(static_cast<Eigen::Index>(n));
    for (std::size_t s = 0; s < n; ++s) {
        const double cx = (static_cast<double>(g.col_of(s)) + 0.5) * width;
        const double cy = (static_cast<double>(g.row_of(s)) + 0.5) * width;
        const auto& box = spec.reward_region;
        if (cx >= box.x_min && cx <= box.x_max && cy >= box.y_min && cy <= box.y_max)
            reward(static_cast<Eigen::Index>(s)) = 1.0;
    }
    return TabularMdp(std::move(ts), std::move(reward), spec.gamma);
}

struct GaussianFeatureSpec {
    /// Centers form a k x k lattice, so d = k^2.
    std::size_t k = 5;
    /// Standard deviation; 0 selects the lattice spacing 1/k.
    double bandwidth = 0.0;

    double effective_bandwidth() const { return bandwidth > 0.0 ? bandwidth : 1.0 / static_cast<double>(k); }
};

/// Lattice size used with a given discretization: half the number of divisions.
inline GaussianFeatureSpec default_features_for(std::size_t divisions) {
    GaussianFeatureSpec f;
    f.k = divisions / 2;
    return f;
}

/**
 * |S| x k^2 matrix of Gaussian bumps exp(-|c(s) - mu_i|^2 / (2 b^2)) at the
 * cell centers c(s). Centers mu_i sit at ((i + 0.5) / k, (j + 0.5) / k),
 * column index j * k + i with row j counted from the bottom.
 */
inline Matrix gaussian_features(const GridGeometry& grid, const GaussianFeatureSpec& spec) {
    detail::require(spec.k >= 1, "feature lattice must be non-empty");
    detail::require(spec.bandwidth >= 0.0 && std::isfinite(spec.bandwidth), "bandwidth must be positive");
    detail::require(grid.rows == grid.cols && grid.rows >= 2, "features need a square grid");
    detail::require(grid.cols == 2 * spec.k,
                    "a " + std::to_string(grid.cols) + "x" + std::to_string(grid.rows) + " grid pairs with a " +
                        std::to_string(grid.cols / 2) + "x" + std::to_string(grid.cols / 2) + " feature lattice");
    const double b = spec.effective_bandwidth();
    const std::size_t n = grid.n_cells();
    const std::size_t d = spec.k * spec.k;
    Matrix phi(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    const double cell = 1.0 / static_cast<double>(grid.cols);
    const double spacing = 1.0 / static_cast<double>(spec.k);
    for (std::size_t s = 0; s < n; ++s) {
        const double x = (static_cast<double>(grid.col_of(s)) + 0.5) * cell;
        const double y = (static_cast<double>(grid.row_of(s)) + 0.5) * cell;
        for (std::size_t j = 0; j < spec.k; ++j) {
            for (std::size_t i = 0; i < spec.k; ++i) {
                const double mx = (static_cast<double>(i) + 0.5) * spacing;
                const double my = (static_cast<double>(j) + 0.5) * spacing;
                const double r2 = (x - mx) * (x - mx) + (y - my) * (y - my);
                phi(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(j * spec.k + i)) =
                    std::exp(-r2 / (2.0 * b * b));
            }
        }
    }
    return phi;
}

} // namespace girl::envs
