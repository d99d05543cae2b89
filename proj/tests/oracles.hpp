#pragma once

// Independent reference implementations used by the test suite. None of them
// calls into the library's solvers; they only share the data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "girl/girl.hpp"
#include "girl/mdp.hpp"
#include "girl/search.hpp"
#include "girl/types.hpp"

namespace oracle {

using girl::Matrix;
using girl::Vector;

/// Random row-stochastic matrix with a sprinkling of exact zeros.
inline Matrix random_stochastic(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = u(rng) < 0.25 ? 0.0 : u(rng);
        if (m.row(i).sum() == 0.0) m(i, static_cast<Eigen::Index>(rng() % cols)) = 1.0;
        m.row(i) /= m.row(i).sum();
    }
    return m;
}

inline girl::TabularMdp random_mdp(std::mt19937_64& rng, std::size_t n, std::size_t na, double gamma) {
    std::uniform_real_distribution<double> r(-1.0, 1.0);
    std::vector<Matrix> ts;
    for (std::size_t a = 0; a < na; ++a) ts.push_back(random_stochastic(rng, n, n));
    Vector reward(static_cast<Eigen::Index>(n));
    for (Eigen::Index s = 0; s < reward.size(); ++s) reward(s) = r(rng);
    return girl::TabularMdp(std::move(ts), std::move(reward), gamma);
}

/// Bellman optimality by plain value iteration to a fixed point.
inline Vector value_iteration(const girl::TabularMdp& mdp, double eps = 1e-13) {
    const auto n = static_cast<Eigen::Index>(mdp.n_states());
    Vector v = Vector::Zero(n);
    for (int it = 0; it < 100000; ++it) {
        Vector next = Vector::Constant(n, -std::numeric_limits<double>::infinity());
        for (std::size_t a = 0; a < mdp.n_actions(); ++a)
            next = next.cwiseMax(mdp.reward() + mdp.gamma() * (mdp.transition(a) * v));
        const double diff = (next - v).cwiseAbs().maxCoeff();
        v = next;
        if (diff < eps) break;
    }
    return v;
}

/// Value of a deterministic policy by dense linear solve.
inline Vector policy_value(const girl::TabularMdp& mdp, const std::vector<std::size_t>& actions) {
    const auto n = static_cast<Eigen::Index>(mdp.n_states());
    Matrix p(n, n);
    for (Eigen::Index s = 0; s < n; ++s) p.row(s) = mdp.transition(actions[static_cast<std::size_t>(s)]).row(s);
    Matrix a = Matrix::Identity(n, n) - mdp.gamma() * p;
    return a.fullPivLu().solve(mdp.reward());
}

/// Calls f(actions) for every deterministic policy in lexicographic order.
template <class F>
void for_each_policy(std::size_t n, std::size_t na, F&& f) {
    std::vector<std::size_t> actions(n, 0);
    for (;;) {
        f(actions);
        std::size_t i = n;
        while (i > 0) {
            --i;
            if (++actions[i] < na) break;
            actions[i] = 0;
            if (i == 0) return;
        }
        if (n == 0) return;
    }
}

/// Optimal by value dominance: no other deterministic policy is better anywhere by more than tol.
inline bool dominates_all(const girl::TabularMdp& mdp, const std::vector<std::size_t>& actions, double tol) {
    const Vector v = policy_value(mdp, actions);
    bool ok = true;
    for_each_policy(mdp.n_states(), mdp.n_actions(), [&](const std::vector<std::size_t>& other) {
        if (!ok) return;
        if ((policy_value(mdp, other) - v).maxCoeff() > tol) ok = false;
    });
    return ok;
}

/// Result of the vertex-enumeration LP oracle.
struct LpAnswer {
    bool feasible = false;
    double value = 0.0;
};

/**
 * Minimizes c.x over {x : G x <= h} by enumerating every n-subset of rows,
 * solving the square system and keeping the best feasible vertex. Only valid
 * for bounded feasible regions (which have a vertex whenever non-empty and
 * the rows include finite box bounds).
 */
inline LpAnswer vertex_enumeration(const Matrix& g, const Vector& h, const Vector& c, double feas_tol = 1e-9) {
    const auto m = g.rows();
    const auto n = g.cols();
    LpAnswer best;
    best.value = std::numeric_limits<double>::infinity();
    if (m < n) return best;
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    Matrix a(n, n);
    Vector b(n);
    for (;;) {
        for (Eigen::Index i = 0; i < n; ++i) {
            a.row(i) = g.row(idx[static_cast<std::size_t>(i)]);
            b(i) = h(idx[static_cast<std::size_t>(i)]);
        }
        Eigen::FullPivLU<Matrix> lu(a);
        if (lu.rank() == n) {
            const Vector x = lu.solve(b);
            const Vector slack = g * x - h;
            if (slack.maxCoeff() <= feas_tol * (1.0 + h.cwiseAbs().maxCoeff())) {
                const double v = c.dot(x);
                if (v < best.value) best.value = v;
                best.feasible = true;
            }
        }
        // next n-combination of {0..m-1}
        Eigen::Index i = n - 1;
        while (i >= 0 && idx[static_cast<std::size_t>(i)] == m - n + i) --i;
        if (i < 0) break;
        ++idx[static_cast<std::size_t>(i)];
        for (Eigen::Index j = i + 1; j < n; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
    }
    return best;
}

/// Frobenius norm computed entry by entry.
inline double frobenius(const Matrix& a, const Matrix& b) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j) sum += (a(i, j) - b(i, j)) * (a(i, j) - b(i, j));
    return std::sqrt(sum);
}

/**
 * Discrete grid transition row by enumerating the five outcome branches
 * (intended move with 1 - p, each compass move with p / 4).
 */
inline std::vector<double> grid_row(std::size_t side, double p, std::size_t s, int dr, int dc,
                                    const std::vector<std::size_t>& blocked, std::size_t absorbing) {
    std::vector<double> row(side * side, 0.0);
    if (s == absorbing) {
        row[s] = 1.0;
        return row;
    }
    // The blocked cell itself is unreachable; its row parks on the absorbing cell.
    if (std::find(blocked.begin(), blocked.end(), s) != blocked.end()) {
        row[absorbing] = 1.0;
        return row;
    }
    auto target = [&](int r, int c) {
        const int rr = std::min(std::max(r, 0), static_cast<int>(side) - 1);
        const int cc = std::min(std::max(c, 0), static_cast<int>(side) - 1);
        const auto t = static_cast<std::size_t>(rr) * side + static_cast<std::size_t>(cc);
        return std::find(blocked.begin(), blocked.end(), t) != blocked.end() ? s : t;
    };
    const int r = static_cast<int>(s / side);
    const int c = static_cast<int>(s % side);
    row[target(r + dr, c + dc)] += 1.0 - p;
    const int moves[4][2] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    for (const auto& mv : moves) row[target(r + mv[0], c + mv[1])] += p / 4.0;
    return row;
}

/// Candidate transition sets of a task, one full per-action list each.
inline std::vector<std::vector<Matrix>> candidate_models(const girl::GirlTask& t) {
    std::vector<Matrix> base;
    for (std::size_t a = 0; a < t.known.n_actions; ++a)
        base.push_back(t.known.transitions[a] ? *t.known.transitions[a] : Matrix());
    switch (t.unknown_kind) {
    case girl::UnknownKind::State: return t.state_candidates;
    case girl::UnknownKind::Action:
    case girl::UnknownKind::RewardPlusAction: {
        std::vector<std::vector<Matrix>> out;
        for (const auto& c : t.action_candidates) {
            auto ts = base;
            ts[t.hidden_action] = c;
            out.push_back(ts);
        }
        return out;
    }
    default: return {base};
    }
}

/**
 * Smallest composite score over every deterministic policy within eta rows
 * of `observed`. Reward gains come from the classic IRL LP (margin weight 1);
 * known-reward feasibility comes from value dominance.
 */
inline double exhaustive_score(const girl::GirlTask& t, const std::vector<std::size_t>& observed, std::size_t eta) {
    const auto models = candidate_models(t);
    double best = std::numeric_limits<double>::infinity();
    for_each_policy(t.known.n_states, t.known.n_actions, [&](const std::vector<std::size_t>& actions) {
        std::size_t changed = 0;
        for (std::size_t s = 0; s < actions.size(); ++s) changed += actions[s] != observed[s];
        if (changed > eta) return;
        const double dist = std::sqrt(2.0 * static_cast<double>(changed));
        const auto pi = girl::PolicyMatrix::deterministic(actions, t.known.n_actions);
        for (const auto& ts : models) {
            if (girl::learns_reward(t.unknown_kind)) {
                const auto r = girl::lp::solve(girl::build_irl_lp(ts, t.known.gamma, pi, t.penalty_weight, t.reward_bound));
                if (r.optimal()) best = std::min(best, dist + r.objective_value);
            } else if (dominates_all(girl::TabularMdp(ts, *t.known.reward, t.known.gamma), actions, 1e-9)) {
                best = std::min(best, dist);
            }
        }
    });
    return best;
}

/// Small random task of a random kind whose true model is always among the candidates.
inline girl::GirlTask random_task(std::mt19937_64& rng, std::size_t max_states) {
    using girl::UnknownKind;
    const std::size_t n = 1 + rng() % max_states;
    const std::size_t na = 2 + rng() % 2;
    const auto mdp = random_mdp(rng, n, na, 0.9);
    girl::GirlTask t;
    t.known = girl::PartialMdp::from(mdp);
    const UnknownKind kinds[] = {UnknownKind::Reward, UnknownKind::Action, UnknownKind::State,
                                 UnknownKind::RewardPlusAction};
    t.unknown_kind = kinds[rng() % 4];
    t.penalty_weight = 0.05 * static_cast<double>(1 + rng() % 10);
    const std::size_t n_decoys = 1 + rng() % 2;
    const std::size_t slot = rng() % (n_decoys + 1);
    switch (t.unknown_kind) {
    case UnknownKind::Reward: t.known.reward.reset(); break;
    case UnknownKind::RewardPlusAction: t.known.reward.reset(); [[fallthrough]];
    case UnknownKind::Action:
        t.hidden_action = rng() % na;
        t.known.transitions[t.hidden_action].reset();
        for (std::size_t c = 0; c <= n_decoys; ++c)
            t.action_candidates.push_back(c == slot ? mdp.transition(t.hidden_action) : random_stochastic(rng, n, n));
        break;
    case UnknownKind::State:
        for (auto& p : t.known.transitions) p.reset();
        for (std::size_t c = 0; c <= n_decoys; ++c) {
            if (c == slot) {
                t.state_candidates.push_back(mdp.transitions());
                continue;
            }
            std::vector<Matrix> set;
            for (std::size_t a = 0; a < na; ++a) set.push_back(random_stochastic(rng, n, n));
            t.state_candidates.push_back(set);
        }
        break;
    default: break;
    }
    return t;
}

/// Deterministic random policy.
inline std::vector<std::size_t> random_actions(std::mt19937_64& rng, std::size_t n, std::size_t na) {
    std::vector<std::size_t> a(n);
    for (auto& x : a) x = rng() % na;
    return a;
}

/// Certificate of a search result: the estimate makes the returned policy optimal.
inline bool result_certified(const girl::GirlTask& t, const girl::GirlResult& r, double tol) {
    const auto models = candidate_models(t);
    const std::size_t c = r.estimate.candidate.value_or(0);
    if (c >= models.size()) return false;
    const Vector reward = girl::learns_reward(t.unknown_kind) ? *r.estimate.reward : *t.known.reward;
    return girl::is_optimal(girl::TabularMdp(models[c], reward, t.known.gamma), r.policy, tol).satisfied;
}

struct RandomLp {
    girl::lp::LpProblem problem;
    girl::Matrix g;  ///< all rows and bounds as G x <= h
    girl::Vector h;
    girl::Vector c;
};

/// Random bounded LP with up to `max_vars` variables and `max_rows` constraints.
inline RandomLp random_lp(std::mt19937_64& rng, std::size_t max_vars, std::size_t max_rows) {
    std::uniform_real_distribution<double> coef(-1.0, 1.0);
    std::uniform_int_distribution<int> small(-3, 3);
    const std::size_t n = 1 + rng() % max_vars;
    const std::size_t m = rng() % (max_rows + 1);
    RandomLp out;
    out.problem = girl::lp::LpProblem(n);
    std::vector<std::vector<double>> rows;
    std::vector<double> rhs;
    for (std::size_t j = 0; j < n; ++j) {
        // Integer-valued data now and then, so degenerate vertices show up.
        out.problem.objective[j] = rng() % 3 == 0 ? small(rng) : coef(rng);
        const double lo = rng() % 4 == 0 ? -2.0 : 0.0;
        const double hi = lo + 1.0 + rng() % 4;
        out.problem.set_bounds(j, lo, hi);
        std::vector<double> up(n, 0.0), down(n, 0.0);
        up[j] = 1.0;
        down[j] = -1.0;
        rows.push_back(up);
        rhs.push_back(hi);
        rows.push_back(down);
        rhs.push_back(-lo);
    }
    // Most instances keep a planted interior point so that feasible ones dominate.
    const bool planted = rng() % 4 != 0;
    std::vector<double> x0(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double lo = out.problem.lower[j], hi = out.problem.upper[j];
        x0[j] = lo + (hi - lo) * 0.5 * (1.0 + coef(rng));
    }
    for (std::size_t i = 0; i < m; ++i) {
        std::vector<double> a(n);
        for (auto& x : a) x = rng() % 3 == 0 ? small(rng) : coef(rng);
        const int kind = static_cast<int>(rng() % 5);
        const girl::lp::Relation rel = kind < 3 ? girl::lp::Relation::LessEqual
                                     : kind == 3 ? girl::lp::Relation::GreaterEqual
                                                 : girl::lp::Relation::Equal;
        double b = rng() % 3 == 0 ? 0.0 : 2.0 * coef(rng);
        if (planted) {
            double ax = 0.0;
            for (std::size_t j = 0; j < n; ++j) ax += a[j] * x0[j];
            const double room = rng() % 3 == 0 ? 0.0 : std::abs(coef(rng));
            b = rel == girl::lp::Relation::LessEqual ? ax + room : rel == girl::lp::Relation::GreaterEqual ? ax - room : ax;
        }
        out.problem.add(a, rel, b);
        if (rel != girl::lp::Relation::GreaterEqual) {
            rows.push_back(a);
            rhs.push_back(b);
        }
        if (rel != girl::lp::Relation::LessEqual) {
            std::vector<double> neg(a);
            for (auto& x : neg) x = -x;
            rows.push_back(neg);
            rhs.push_back(-b);
        }
    }
    out.g.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(n));
    out.h.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < n; ++j) out.g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        out.h(static_cast<Eigen::Index>(i)) = rhs[i];
    }
    out.c = Eigen::Map<const girl::Vector>(out.problem.objective.data(), static_cast<Eigen::Index>(n));
    return out;
}

} // namespace oracle
