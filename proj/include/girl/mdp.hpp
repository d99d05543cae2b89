#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "girl/types.hpp"

namespace girl {

/**
 * Finite MDP with state rewards R(s), one row-stochastic transition matrix
 * per action and a discount factor in [0, 1).
 *
 * Instances are validated on construction and immutable afterwards.
 * Absorbing states are rows with a unit self-loop.
 */
class TabularMdp {
public:
    TabularMdp(std::vector<Matrix> transitions, Vector reward, double gamma)
        : transitions_(std::move(transitions)), reward_(std::move(reward)), gamma_(gamma) {
        detail::require(!transitions_.empty(), "MDP needs at least one action");
        const auto n = reward_.size();
        detail::require(n > 0, "MDP needs at least one state");
        detail::require(std::isfinite(gamma_) && gamma_ >= 0.0 && gamma_ < 1.0, "gamma must lie in [0, 1)");
        for (std::size_t a = 0; a < transitions_.size(); ++a) {
            const auto& p = transitions_[a];
            detail::require_shape(p.rows() == n && p.cols() == n,
                                  "transition matrix " + std::to_string(a) + " must be n_states x n_states");
            detail::require(detail::is_row_stochastic(p),
                            "transition matrix " + std::to_string(a) + " is not row-stochastic");
        }
        for (Eigen::Index s = 0; s < n; ++s)
            detail::require(std::isfinite(reward_(s)), "reward entries must be finite");
    }

    std::size_t n_states() const { return static_cast<std::size_t>(reward_.size()); }
    std::size_t n_actions() const { return transitions_.size(); }
    double gamma() const { return gamma_; }
    const Vector& reward() const { return reward_; }
    const Matrix& transition(std::size_t action) const { return transitions_.at(action); }
    const std::vector<Matrix>& transitions() const { return transitions_; }

    TabularMdp with_reward(Vector reward) const { return TabularMdp(transitions_, std::move(reward), gamma_); }

    TabularMdp with_transition(std::size_t action, Matrix p) const {
        auto ts = transitions_;
        ts.at(action) = std::move(p);
        return TabularMdp(std::move(ts), reward_, gamma_);
    }

private:
    std::vector<Matrix> transitions_;
    Vector reward_;
    double gamma_;
};

/// Outcome of checking (P^pi - P^a)(I - gamma P^pi)^{-1} R >= 0 for every action.
struct OptimalityReport {
    bool satisfied = true;
    /// Most negative entry over all actions and states (0 when none is negative).
    double worst_violation = 0.0;
    /// min over a != pi(s) of the advantage entry; +inf when |A| = 1.
    Vector per_state_margin;
};

namespace detail {

inline void check_policy_shape(const TabularMdp& mdp, const PolicyMatrix& pi) {
    require_shape(pi.n_states() == mdp.n_states() && pi.n_actions() == mdp.n_actions(),
                  "policy shape " + std::to_string(pi.n_states()) + "x" + std::to_string(pi.n_actions()) +
                      " does not match MDP " + std::to_string(mdp.n_states()) + "x" +
                      std::to_string(mdp.n_actions()));
}

/// Rows of the per-action matrices picked by a deterministic action vector.
inline Matrix select_rows(const std::vector<Matrix>& transitions, const std::vector<std::size_t>& actions) {
    const auto n = static_cast<Eigen::Index>(actions.size());
    Matrix out(n, n);
    for (Eigen::Index s = 0; s < n; ++s) out.row(s) = transitions[actions[static_cast<std::size_t>(s)]].row(s);
    return out;
}

/// Solves (I - gamma P) V = R with partial-pivoting LU.
inline Vector evaluate(const Matrix& p_pi, const Vector& reward, double gamma) {
    Matrix system = -gamma * p_pi;
    system.diagonal().array() += 1.0;
    Vector v = system.partialPivLu().solve(reward);
    if (!v.allFinite()) throw NumericalError("policy evaluation produced non-finite values");
    return v;
}

/// Advantage vectors (P^pi - P^a) V for every action, given V under pi.
inline std::vector<Vector> advantages(const std::vector<Matrix>& transitions, const std::vector<std::size_t>& actions,
                                      const Vector& value) {
    const auto n = value.size();
    std::vector<Vector> ev(transitions.size());
    for (std::size_t a = 0; a < transitions.size(); ++a) ev[a] = transitions[a] * value;
    std::vector<Vector> adv(transitions.size(), Vector(n));
    for (Eigen::Index s = 0; s < n; ++s) {
        const double chosen = ev[actions[static_cast<std::size_t>(s)]](s);
        for (std::size_t a = 0; a < transitions.size(); ++a) adv[a](s) = chosen - ev[a](s);
    }
    return adv;
}

inline OptimalityReport certify(const std::vector<Matrix>& transitions, const Vector& reward, double gamma,
                                const std::vector<std::size_t>& actions, double tol) {
    const Vector v = evaluate(select_rows(transitions, actions), reward, gamma);
    const auto adv = advantages(transitions, actions, v);
    OptimalityReport report;
    const auto n = reward.size();
    report.per_state_margin = Vector::Constant(n, std::numeric_limits<double>::infinity());
    for (Eigen::Index s = 0; s < n; ++s) {
        for (std::size_t a = 0; a < transitions.size(); ++a) {
            const double entry = adv[a](s);
            report.worst_violation = std::min(report.worst_violation, entry);
            if (a != actions[static_cast<std::size_t>(s)])
                report.per_state_margin(s) = std::min(report.per_state_margin(s), entry);
        }
    }
    report.satisfied = report.worst_violation >= -tol;
    return report;
}

} // namespace detail

/// P^pi(s) = sum_a P^a(s) Pi(s, a).
inline Matrix policy_transition_matrix(const TabularMdp& mdp, const PolicyMatrix& pi) {
    detail::check_policy_shape(mdp, pi);
    const auto n = static_cast<Eigen::Index>(mdp.n_states());
    Matrix out = Matrix::Zero(n, n);
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
        const Vector weights = pi.entries().col(static_cast<Eigen::Index>(a));
        out.noalias() += weights.asDiagonal() * mdp.transition(a);
    }
    return out;
}

/// Value of pi: the solution of (I - gamma P^pi) V = R.
inline Vector policy_value(const TabularMdp& mdp, const PolicyMatrix& pi) {
    return detail::evaluate(policy_transition_matrix(mdp, pi), mdp.reward(), mdp.gamma());
}

/**
 * Certifies optimality of a deterministic policy: pi is optimal iff
 * (P^pi - P^a)(I - gamma P^pi)^{-1} R >= -tol entrywise for every action a.
 */
inline OptimalityReport is_optimal(const TabularMdp& mdp, const PolicyMatrix& pi, double tol = 1e-8) {
    detail::check_policy_shape(mdp, pi);
    if (!pi.is_deterministic())
        throw ValidationError("optimality certificate is defined for deterministic policies only");
    return detail::certify(mdp.transitions(), mdp.reward(), mdp.gamma(), pi.actions(), tol);
}

/**
 * Forward oracle: policy iteration, then a final greedy pass that resolves
 * ties (within 1e-11 relative) towards the lowest action index.
 */
inline PolicyMatrix solve_optimal_policy(const TabularMdp& mdp, double tol = 1e-8) {
    const std::size_t n = mdp.n_states();
    const std::size_t na = mdp.n_actions();
    const double cap_exponent = static_cast<double>(std::min<std::size_t>(n, 8));
    const double cap = std::min(1e5, 10.0 * std::pow(static_cast<double>(na), cap_exponent));
    const auto max_iterations = static_cast<std::size_t>(cap);

    auto q_values = [&](const Vector& v) {
        std::vector<Vector> q(na);
        for (std::size_t a = 0; a < na; ++a) q[a] = mdp.reward() + mdp.gamma() * (mdp.transition(a) * v);
        return q;
    };
    auto tie_eps = [](double x) { return 1e-11 * (1.0 + std::abs(x)); };

    std::vector<std::size_t> actions(n, 0);
    Vector v;
    bool stable = false;
    for (std::size_t it = 0; it < max_iterations; ++it) {
        v = detail::evaluate(detail::select_rows(mdp.transitions(), actions), mdp.reward(), mdp.gamma());
        const auto q = q_values(v);
        stable = true;
        for (std::size_t s = 0; s < n; ++s) {
            const auto si = static_cast<Eigen::Index>(s);
            std::size_t best = actions[s];
            for (std::size_t a = 0; a < na; ++a)
                if (q[a](si) > q[best](si) + tie_eps(q[best](si))) best = a;
            if (best != actions[s]) {
                actions[s] = best;
                stable = false;
            }
        }
        if (stable) break;
    }
    if (!stable) throw NumericalError("policy iteration did not converge within the iteration cap");

    const auto q = q_values(v);
    for (std::size_t s = 0; s < n; ++s) {
        const auto si = static_cast<Eigen::Index>(s);
        double top = q[0](si);
        for (std::size_t a = 1; a < na; ++a) top = std::max(top, q[a](si));
        for (std::size_t a = 0; a < na; ++a) {
            if (q[a](si) >= top - tie_eps(top)) {
                actions[s] = a;
                break;
            }
        }
    }
    auto policy = PolicyMatrix::deterministic(actions, na);
    if (!detail::certify(mdp.transitions(), mdp.reward(), mdp.gamma(), actions, tol).satisfied)
        throw NumericalError("policy iteration result failed its optimality certificate");
    return policy;
}

} // namespace girl
