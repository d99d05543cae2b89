#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "girl/lp.hpp"
#include "girl/mdp.hpp"
#include "girl/types.hpp"

namespace girl {

/// Which MDP components a task has to recover.
enum class UnknownKind { Reward, TransitionRows, Action, State, RewardPlusAction };

inline const char* to_string(UnknownKind k) {
    switch (k) {
    case UnknownKind::Reward: return "reward";
    case UnknownKind::TransitionRows: return "transition";
    case UnknownKind::Action: return "action";
    case UnknownKind::State: return "state";
    case UnknownKind::RewardPlusAction: return "reward+action";
    }
    return "?";
}

inline UnknownKind unknown_kind_from_string(const std::string& s) {
    if (s == "reward") return UnknownKind::Reward;
    if (s == "transition") return UnknownKind::TransitionRows;
    if (s == "action") return UnknownKind::Action;
    if (s == "state") return UnknownKind::State;
    if (s == "reward+action") return UnknownKind::RewardPlusAction;
    throw ValidationError("unknown task kind '" + s + "'");
}

inline bool learns_reward(UnknownKind k) { return k == UnknownKind::Reward || k == UnknownKind::RewardPlusAction; }

/// The observed parts of an MDP. Missing components are empty optionals.
struct PartialMdp {
    std::size_t n_states = 0;
    std::size_t n_actions = 0;
    double gamma = 0.9;
    std::optional<Vector> reward;
    /// One entry per action; nullopt marks a hidden action's matrix.
    std::vector<std::optional<Matrix>> transitions;

    static PartialMdp from(const TabularMdp& mdp) {
        PartialMdp p;
        p.n_states = mdp.n_states();
        p.n_actions = mdp.n_actions();
        p.gamma = mdp.gamma();
        p.reward = mdp.reward();
        for (const auto& t : mdp.transitions()) p.transitions.emplace_back(t);
        return p;
    }
};

/// Position (action, state, column) of an unknown transition probability.
struct TransitionEntry {
    std::size_t action = 0;
    std::size_t state = 0;
    std::size_t column = 0;

    friend bool operator==(const TransitionEntry&, const TransitionEntry&) = default;
};

/**
 * A generalized IRL problem instance: what is known, what is unknown and the
 * uncertainty sets the unknowns come from.
 */
struct GirlTask {
    PartialMdp known;
    UnknownKind unknown_kind = UnknownKind::Reward;
    double reward_bound = 1.0;    ///< R_max
    double penalty_weight = 0.0;  ///< lambda on ||R||_1
    double margin_weight = 1.0;   ///< mu on the summed margins
    /// TransitionRows: the unknown entries. Their values in `known` are ignored.
    std::vector<TransitionEntry> unknown_transition_entries;
    /// Action / RewardPlusAction: which action slot is hidden and its candidate matrices.
    std::size_t hidden_action = 0;
    std::vector<Matrix> action_candidates;
    /// State: one full set of per-action matrices per candidate hidden state.
    std::vector<std::vector<Matrix>> state_candidates;
    /// Optional human-readable names of the candidates.
    std::vector<std::string> candidate_labels;
    /// Optional |S| x d basis; the reward becomes Phi * theta.
    std::optional<Matrix> reward_features;

    /// Default lambda = 0.05 * mu / |S|.
    static double default_penalty_weight(double mu, std::size_t n_states) {
        return 0.05 * mu / static_cast<double>(n_states);
    }

    std::size_t n_candidates() const {
        switch (unknown_kind) {
        case UnknownKind::Action:
        case UnknownKind::RewardPlusAction: return action_candidates.size();
        case UnknownKind::State: return state_candidates.size();
        default: return 1;
        }
    }

    void validate() const {
        using detail::require;
        using detail::require_shape;
        const auto n = static_cast<Eigen::Index>(known.n_states);
        require(known.n_states > 0 && known.n_actions > 0, "task needs states and actions");
        require(known.gamma >= 0.0 && known.gamma < 1.0, "gamma must lie in [0, 1)");
        require(known.transitions.size() == known.n_actions, "task must list one transition slot per action");
        require(reward_bound > 0.0 && std::isfinite(reward_bound), "reward bound must be positive");
        require(penalty_weight >= 0.0 && std::isfinite(penalty_weight), "penalty weight must be nonnegative");
        require(margin_weight >= 0.0 && std::isfinite(margin_weight), "margin weight must be nonnegative");

        const bool reward_unknown = learns_reward(unknown_kind);
        require(known.reward.has_value() != reward_unknown,
                reward_unknown ? "reward must be absent for reward-learning tasks"
                               : "reward must be present unless it is being learned");
        if (known.reward) require_shape(known.reward->size() == n, "reward length must equal n_states");

        const bool hides_action = unknown_kind == UnknownKind::Action || unknown_kind == UnknownKind::RewardPlusAction;
        if (hides_action) require(hidden_action < known.n_actions, "hidden action index out of range");
        for (std::size_t a = 0; a < known.n_actions; ++a) {
            const bool should_be_absent =
                unknown_kind == UnknownKind::State || (hides_action && a == hidden_action);
            require(known.transitions[a].has_value() != should_be_absent,
                    "transition slot " + std::to_string(a) +
                        (should_be_absent ? " must be absent for this task" : " must be present for this task"));
            if (!known.transitions[a]) continue;
            const Matrix& p = *known.transitions[a];
            require_shape(p.rows() == n && p.cols() == n, "transition matrix must be n_states x n_states");
            if (unknown_kind != UnknownKind::TransitionRows)
                require(detail::is_row_stochastic(p), "transition matrix " + std::to_string(a) + " is not row-stochastic");
        }

        if (unknown_kind == UnknownKind::TransitionRows) {
            require(!unknown_transition_entries.empty(), "transition task needs unknown entries");
            for (const auto& e : unknown_transition_entries) {
                require(e.action < known.n_actions && e.state < known.n_states && e.column < known.n_states,
                        "unknown transition entry out of range");
            }
            for (std::size_t i = 0; i < unknown_transition_entries.size(); ++i)
                for (std::size_t j = i + 1; j < unknown_transition_entries.size(); ++j)
                    require(!(unknown_transition_entries[i] == unknown_transition_entries[j]),
                            "duplicate unknown transition entry");
        }
        if (hides_action) {
            require(!action_candidates.empty(), "action task needs candidate matrices");
            for (const auto& c : action_candidates) {
                require_shape(c.rows() == n && c.cols() == n, "action candidate must be n_states x n_states");
                require(detail::is_row_stochastic(c), "action candidate is not row-stochastic");
            }
        }
        if (unknown_kind == UnknownKind::State) {
            require(!state_candidates.empty(), "state task needs candidate transition sets");
            for (const auto& set : state_candidates) {
                require(set.size() == known.n_actions, "state candidate must give one matrix per action");
                for (const auto& c : set) {
                    require_shape(c.rows() == n && c.cols() == n, "state candidate matrix must be n_states x n_states");
                    require(detail::is_row_stochastic(c), "state candidate matrix is not row-stochastic");
                }
            }
        }
        if (!candidate_labels.empty())
            require(candidate_labels.size() == n_candidates(), "one label per candidate is required");
        if (reward_features) {
            require(reward_unknown, "reward features only apply to reward-learning tasks");
            require_shape(reward_features->rows() == n && reward_features->cols() > 0,
                          "reward features must have n_states rows");
            require(reward_features->allFinite(), "reward features must be finite");
        }
    }
};

/// Recovered unknown components for one policy.
struct Estimate {
    std::optional<Vector> reward;
    std::optional<Vector> theta;
    std::optional<std::vector<double>> transition_entries;
    std::optional<std::size_t> candidate;
};

/// Optimal (feasible) or infeasible result of a fixed-policy subproblem.
struct FixedPolicyOutcome {
    bool feasible = false;
    /// Set when a cutoff proved the subproblem cannot beat the incumbent.
    bool pruned = false;
    Estimate estimate;
    double penalty = 0.0;  ///< ||R||_1 for reward tasks
    double margin = 0.0;   ///< summed margins for reward tasks
    /// mu * margin - lambda * penalty: what the score subtracts from the distance.
    double gain() const { return margin_weight * margin - penalty_weight * penalty; }
    double margin_weight = 1.0;
    double penalty_weight = 0.0;
    /// Row multipliers of the margin rows of the winning reward LP, indexed [state][action].
    std::vector<std::vector<double>> margin_duals;
};

struct SubproblemOptions {
    /// Certificate tolerance for known-reward feasibility checks.
    double tol = 1e-8;
    /// Alternate between value evaluation and the transition LP when unknown
    /// entries sit in rows the policy selects.
    bool transition_fixed_point = false;
    std::size_t fixed_point_rounds = 50;
    double fixed_point_tol = 1e-8;
};

/// R = Phi * theta.
inline Vector feature_reward_expand(const Vector& theta, const Matrix& features) {
    detail::require_shape(features.cols() == theta.size(), "theta length must equal the number of features");
    return features * theta;
}

// ---------------------------------------------------------------------------
// Constraint systems
// ---------------------------------------------------------------------------

/// Linear rows over a vector of unknowns; rows may be constant (zero unknowns).
struct LinearSystem {
    std::size_t n_vars = 0;
    std::vector<lp::Constraint> rows;
    std::vector<double> lower, upper;
    std::vector<std::string> variable_names;

    std::size_t add_var(std::string name, double lo, double hi) {
        variable_names.push_back(std::move(name));
        lower.push_back(lo);
        upper.push_back(hi);
        for (auto& r : rows) r.coefficients.push_back(0.0);
        return n_vars++;
    }

    void add_row(std::vector<double> coefficients, lp::Relation rel, double rhs) {
        coefficients.resize(n_vars, 0.0);
        rows.push_back({std::move(coefficients), rel, rhs});
    }

    lp::LpProblem as_problem() const {
        lp::LpProblem p(n_vars);
        p.constraints = rows;
        p.lower = lower;
        p.upper = upper;
        return p;
    }

    /// Feasibility with every row relaxed by tol.
    bool feasible(double tol) const {
        if (n_vars == 0) {
            for (const auto& r : rows) {
                switch (r.relation) {
                case lp::Relation::LessEqual: if (0.0 > r.rhs + tol) return false; break;
                case lp::Relation::GreaterEqual: if (0.0 < r.rhs - tol) return false; break;
                case lp::Relation::Equal: if (std::abs(r.rhs) > tol) return false; break;
                }
            }
            return true;
        }
        auto p = as_problem();
        for (auto& r : p.constraints) {
            if (r.relation == lp::Relation::LessEqual) r.rhs += tol;
            if (r.relation == lp::Relation::GreaterEqual) r.rhs -= tol;
        }
        for (auto& r : p.constraints) {
            if (r.relation != lp::Relation::Equal) continue;
            // a.x = b becomes b - tol <= a.x <= b + tol
            lp::Constraint upper_row = r;
            upper_row.relation = lp::Relation::LessEqual;
            upper_row.rhs += tol;
            r.relation = lp::Relation::GreaterEqual;
            r.rhs -= tol;
            p.constraints.push_back(std::move(upper_row));
        }
        return lp::solve(p).optimal();
    }
};

/// One system per candidate (a single one unless the task enumerates candidates).
struct Theorem1System {
    std::vector<LinearSystem> candidates;
};

namespace detail {

/// (I - gamma P^pi)^{-1} for a deterministic action vector.
inline Matrix resolvent(const std::vector<Matrix>& transitions, const std::vector<std::size_t>& actions, double gamma) {
    Matrix system = -gamma * select_rows(transitions, actions);
    system.diagonal().array() += 1.0;
    return system.partialPivLu().inverse();
}

/// Coefficients of the advantage rows (P^pi(s) - P^a(s)) (I - gamma P^pi)^{-1} B,
/// for every action a, where B maps the unknown reward parameters to R.
inline std::vector<Matrix> advantage_operators(const std::vector<Matrix>& transitions,
                                               const std::vector<std::size_t>& actions, double gamma,
                                               const Matrix* basis) {
    const Matrix p_pi = select_rows(transitions, actions);
    const Matrix inv = resolvent(transitions, actions, gamma);
    Matrix mapped;
    if (basis) mapped.noalias() = inv * (*basis);
    const Matrix& right = basis ? mapped : inv;
    std::vector<Matrix> out(transitions.size());
    for (std::size_t a = 0; a < transitions.size(); ++a) {
        const Matrix diff = p_pi - transitions[a];
        out[a].noalias() = diff * right;
    }
    return out;
}

inline std::vector<std::size_t> deterministic_actions(const PolicyMatrix& pi, std::size_t n_states,
                                                      std::size_t n_actions) {
    require_shape(pi.n_states() == n_states && pi.n_actions() == n_actions, "policy shape does not match the task");
    if (!pi.is_deterministic()) throw ValidationError("fixed-policy subproblems need a deterministic policy");
    return pi.actions();
}

/// Full transition sets per candidate, with unknown transition entries zeroed.
inline std::vector<std::vector<Matrix>> candidate_transitions(const GirlTask& task) {
    const auto& k = task.known;
    std::vector<std::vector<Matrix>> out;
    auto base = [&] {
        std::vector<Matrix> ts;
        for (const auto& t : k.transitions) ts.push_back(t ? *t : Matrix());
        return ts;
    };
    switch (task.unknown_kind) {
    case UnknownKind::Action:
    case UnknownKind::RewardPlusAction:
        for (const auto& c : task.action_candidates) {
            auto ts = base();
            ts[task.hidden_action] = c;
            out.push_back(std::move(ts));
        }
        break;
    case UnknownKind::State: out = task.state_candidates; break;
    case UnknownKind::TransitionRows: {
        auto ts = base();
        for (const auto& e : task.unknown_transition_entries)
            ts[e.action](static_cast<Eigen::Index>(e.state), static_cast<Eigen::Index>(e.column)) = 0.0;
        out.push_back(std::move(ts));
        break;
    }
    case UnknownKind::Reward: out.push_back(base()); break;
    }
    return out;
}

/// Appends the reward block: optimality rows, reward bound and L1 rows.
inline void reward_block(LinearSystem& sys, const std::vector<Matrix>& transitions,
                         const std::vector<std::size_t>& actions, const GirlTask& task) {
    const std::size_t n = task.known.n_states;
    const Matrix* basis = task.reward_features ? &*task.reward_features : nullptr;
    const auto ops = advantage_operators(transitions, actions, task.known.gamma, basis);
    const double rmax = task.reward_bound;
    std::vector<std::size_t> param;
    if (basis) {
        for (Eigen::Index i = 0; i < basis->cols(); ++i)
            param.push_back(sys.add_var("theta" + std::to_string(i), -lp::kInf, lp::kInf));
    } else {
        for (std::size_t s = 0; s < n; ++s) param.push_back(sys.add_var("R" + std::to_string(s), -rmax, rmax));
    }
    std::vector<std::size_t> u;
    for (std::size_t s = 0; s < n; ++s) u.push_back(sys.add_var("u" + std::to_string(s), 0.0, rmax));

    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t a = 0; a < transitions.size(); ++a) {
            if (a == actions[s]) continue;
            std::vector<double> row(sys.n_vars, 0.0);
            for (std::size_t j = 0; j < param.size(); ++j)
                row[param[j]] = ops[a](static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(j));
            sys.add_row(std::move(row), lp::Relation::GreaterEqual, 0.0);
        }
    }
    // -u_s <= R(s) <= u_s; with u_s <= R_max this also bounds |R(s)|.
    for (std::size_t s = 0; s < n; ++s) {
        for (double sign : {1.0, -1.0}) {
            std::vector<double> row(sys.n_vars, 0.0);
            if (basis) {
                for (std::size_t j = 0; j < param.size(); ++j)
                    row[param[j]] = sign * (*basis)(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(j));
            } else {
                row[param[s]] = sign;
            }
            row[u[s]] = -1.0;
            sys.add_row(std::move(row), lp::Relation::LessEqual, 0.0);
        }
    }
}

} // namespace detail

/**
 * Constraint system of a fixed deterministic policy: optimality rows with
 * P^pi assembled row by row from the selected actions, plus the block for the
 * task's unknown kind. Reward variables are R (or theta with features) and
 * the L1 auxiliaries u; transition variables are the unknown entries.
 */
inline Theorem1System theorem1_constraints(const GirlTask& task, const PolicyMatrix& pi) {
    task.validate();
    const auto actions = detail::deterministic_actions(pi, task.known.n_states, task.known.n_actions);
    const std::size_t n = task.known.n_states;
    Theorem1System out;
    const auto sets = detail::candidate_transitions(task);

    if (task.unknown_kind == UnknownKind::TransitionRows) {
        for (const auto& e : task.unknown_transition_entries)
            if (actions[e.state] == e.action)
                throw NonlinearCoupling("unknown entry of action " + std::to_string(e.action) + " in state " +
                                        std::to_string(e.state) + " lies in a row the policy selects");
        const auto& ts = sets.front();
        const Vector v = detail::evaluate(detail::select_rows(ts, actions), *task.known.reward, task.known.gamma);
        LinearSystem sys;
        std::map<std::pair<std::size_t, std::size_t>, std::vector<std::pair<std::size_t, std::size_t>>> by_row;
        for (const auto& e : task.unknown_transition_entries) {
            const auto var = sys.add_var("P" + std::to_string(e.action) + "[" + std::to_string(e.state) + "," +
                                             std::to_string(e.column) + "]",
                                         0.0, 1.0);
            by_row[{e.action, e.state}].push_back({var, e.column});
        }
        for (std::size_t s = 0; s < n; ++s) {
            const double chosen = ts[actions[s]].row(static_cast<Eigen::Index>(s)).dot(v);
            for (std::size_t a = 0; a < ts.size(); ++a) {
                if (a == actions[s]) continue;
                // (P^pi(s) - P^a(s)) V >= 0 with P^a(s) = known part + unknown entries.
                const double known_part = ts[a].row(static_cast<Eigen::Index>(s)).dot(v);
                std::vector<double> row(sys.n_vars, 0.0);
                if (auto it = by_row.find({a, s}); it != by_row.end())
                    for (auto [var, col] : it->second) row[var] = v(static_cast<Eigen::Index>(col));
                sys.add_row(std::move(row), lp::Relation::LessEqual, chosen - known_part);
            }
        }
        for (const auto& [key, vars] : by_row) {
            const double known_mass = ts[key.first].row(static_cast<Eigen::Index>(key.second)).sum();
            std::vector<double> row(sys.n_vars, 0.0);
            for (auto [var, col] : vars) row[var] = 1.0;
            sys.add_row(std::move(row), lp::Relation::Equal, 1.0 - known_mass);
        }
        out.candidates.push_back(std::move(sys));
        return out;
    }

    for (const auto& ts : sets) {
        LinearSystem sys;
        if (learns_reward(task.unknown_kind)) {
            detail::reward_block(sys, ts, actions, task);
        } else {
            const Vector v = detail::evaluate(detail::select_rows(ts, actions), *task.known.reward, task.known.gamma);
            const auto adv = detail::advantages(ts, actions, v);
            for (std::size_t s = 0; s < n; ++s)
                for (std::size_t a = 0; a < ts.size(); ++a)
                    if (a != actions[s])
                        sys.add_row({}, lp::Relation::LessEqual, adv[a](static_cast<Eigen::Index>(s)));
        }
        out.candidates.push_back(std::move(sys));
    }
    return out;
}

/**
 * Classic max-margin IRL LP for a fully known transition model, in
 * minimization form over [R (n) | m (n) | u (n)]:
 *
 *     minimize   -sum_s m_s + lambda * sum_s u_s
 *     subject to m_s <= (P^pi(s) - P^a(s)) (I - gamma P^pi)^{-1} R   for a != pi(s)
 *                (P^pi - P^a) (I - gamma P^pi)^{-1} R >= 0
 *                -u <= R <= u,  |R| <= R_max
 *
 * With a single action the margins are fixed at 0.
 */
inline lp::LpProblem build_irl_lp(const std::vector<Matrix>& transitions, double gamma, const PolicyMatrix& pi,
                                  double lambda, double reward_bound) {
    detail::require(!transitions.empty(), "IRL LP needs transition matrices");
    const std::size_t n = static_cast<std::size_t>(transitions.front().rows());
    const auto actions = detail::deterministic_actions(pi, n, transitions.size());
    detail::require(lambda >= 0.0 && reward_bound > 0.0, "IRL LP needs lambda >= 0 and R_max > 0");
    const auto ops = detail::advantage_operators(transitions, actions, gamma, nullptr);
    const std::size_t nv = 3 * n;
    lp::LpProblem p(nv);
    for (std::size_t s = 0; s < n; ++s) {
        p.set_bounds(s, -reward_bound, reward_bound);
        p.set_bounds(n + s, transitions.size() > 1 ? -lp::kInf : 0.0, transitions.size() > 1 ? lp::kInf : 0.0);
        p.set_bounds(2 * n + s, 0.0, lp::kInf);
        p.objective[n + s] = -1.0;
        p.objective[2 * n + s] = lambda;
    }
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t a = 0; a < transitions.size(); ++a) {
            if (a == actions[s]) continue;
            std::vector<double> adv(nv, 0.0);
            for (std::size_t j = 0; j < n; ++j)
                adv[j] = ops[a](static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(j));
            std::vector<double> margin_row(nv, 0.0);
            for (std::size_t j = 0; j < n; ++j) margin_row[j] = -adv[j];
            margin_row[n + s] = 1.0;
            p.add(std::move(margin_row), lp::Relation::LessEqual, 0.0);
            p.add(std::move(adv), lp::Relation::GreaterEqual, 0.0);
        }
    }
    for (std::size_t s = 0; s < n; ++s) {
        for (double sign : {1.0, -1.0}) {
            std::vector<double> row(nv, 0.0);
            row[s] = sign;
            row[2 * n + s] = -1.0;
            p.add(std::move(row), lp::Relation::LessEqual, 0.0);
        }
    }
    return p;
}

inline lp::LpProblem build_irl_lp(const TabularMdp& mdp_no_reward, const PolicyMatrix& pi, double lambda,
                                  double reward_bound) {
    return build_irl_lp(mdp_no_reward.transitions(), mdp_no_reward.gamma(), pi, lambda, reward_bound);
}

// ---------------------------------------------------------------------------
// Fixed-policy subproblems
// ---------------------------------------------------------------------------

namespace detail {

/**
 * The reward LP in a compact equivalent form. Tabular rewards use
 * R = p - q with p, q in [0, R_max]; feature rewards use a free theta with
 * u_s >= |Phi theta|_s, u_s <= R_max. Margins m_s >= 0 sit below every
 * alternative-action advantage, which also enforces the optimality rows.
 */
struct RewardLp {
    lp::LpProblem problem;
    std::size_t n_states = 0;
    std::size_t n_params = 0;  ///< reward parameters (p and q, or theta)
    bool features = false;
    /// Row index of each (state, alternative action) margin row.
    std::vector<std::vector<long>> margin_row;
};

inline RewardLp build_reward_lp(const std::vector<Matrix>& transitions, const std::vector<std::size_t>& actions,
                                const GirlTask& task) {
    RewardLp out;
    const std::size_t n = task.known.n_states;
    const std::size_t na = transitions.size();
    const double rmax = task.reward_bound;
    const double mu = task.margin_weight;
    const double lambda = task.penalty_weight;
    const Matrix* basis = task.reward_features ? &*task.reward_features : nullptr;
    const auto ops = advantage_operators(transitions, actions, task.known.gamma, basis);
    out.n_states = n;
    out.features = basis != nullptr;

    std::size_t m_off = 0;
    std::size_t nv = 0;
    if (basis) {
        const auto d = static_cast<std::size_t>(basis->cols());
        out.n_params = d;
        nv = d + 2 * n;  // theta | u | m
        m_off = d + n;
        out.problem = lp::LpProblem(nv);
        for (std::size_t j = 0; j < d; ++j) out.problem.set_bounds(j, -lp::kInf, lp::kInf);
        for (std::size_t s = 0; s < n; ++s) {
            out.problem.set_bounds(d + s, 0.0, rmax);
            out.problem.objective[d + s] = lambda;
        }
    } else {
        out.n_params = 2 * n;
        nv = 3 * n;  // p | q | m
        m_off = 2 * n;
        out.problem = lp::LpProblem(nv);
        for (std::size_t j = 0; j < 2 * n; ++j) {
            out.problem.set_bounds(j, 0.0, rmax);
            out.problem.objective[j] = lambda;
        }
    }
    for (std::size_t s = 0; s < n; ++s) {
        out.problem.set_bounds(m_off + s, 0.0, na > 1 ? lp::kInf : 0.0);
        out.problem.objective[m_off + s] = -mu;
    }

    out.margin_row.assign(n, std::vector<long>(na, -1));
    auto& rows = out.problem.constraints;
    rows.reserve(n * (na - 1) + (basis ? 2 * n : 0));
    for (std::size_t s = 0; s < n; ++s) {
        const auto si = static_cast<Eigen::Index>(s);
        for (std::size_t a = 0; a < na; ++a) {
            if (a == actions[s]) continue;
            lp::Constraint c;
            c.coefficients.assign(nv, 0.0);
            c.relation = lp::Relation::LessEqual;
            c.rhs = 0.0;
            if (basis) {
                for (std::size_t j = 0; j < out.n_params; ++j) c.coefficients[j] = -ops[a](si, static_cast<Eigen::Index>(j));
            } else {
                for (std::size_t j = 0; j < n; ++j) {
                    const double g = ops[a](si, static_cast<Eigen::Index>(j));
                    c.coefficients[j] = -g;
                    c.coefficients[n + j] = g;
                }
            }
            c.coefficients[m_off + s] = 1.0;
            out.margin_row[s][a] = static_cast<long>(rows.size());
            rows.push_back(std::move(c));
        }
    }
    if (basis) {
        const auto d = out.n_params;
        for (std::size_t s = 0; s < n; ++s) {
            for (double sign : {1.0, -1.0}) {
                lp::Constraint c;
                c.coefficients.assign(nv, 0.0);
                for (std::size_t j = 0; j < d; ++j)
                    c.coefficients[j] = sign * (*basis)(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(j));
                c.coefficients[d + s] = -1.0;
                c.relation = lp::Relation::LessEqual;
                rows.push_back(std::move(c));
            }
        }
    }
    return out;
}

/// Multipliers of the margin rows, indexed [state][action].
using MarginWeights = std::vector<std::vector<double>>;

/**
 * Upper bound on the reward LP's gain (mu * margin - lambda * ||R||_1) from
 * nonnegative multipliers on the margin rows. weights[s][a] is the multiplier
 * of the row comparing pi(s) against a; entries with a == pi(s) are ignored.
 * Multipliers are topped up so that each state's total reaches mu. With
 * several weight sets the smallest bound is returned.
 */
inline double tabular_gain_bound(const std::vector<Matrix>& transitions, const std::vector<std::size_t>& actions,
                                 double gamma, double mu, double lambda, double rmax,
                                 const std::vector<const MarginWeights*>& weight_sets) {
    const auto n = static_cast<Eigen::Index>(actions.size());
    const std::size_t na = transitions.size();
    if (na < 2 || weight_sets.empty()) return na < 2 ? 0.0 : std::numeric_limits<double>::infinity();
    Matrix w = Matrix::Zero(n, static_cast<Eigen::Index>(weight_sets.size()));
    for (std::size_t k = 0; k < weight_sets.size(); ++k) {
        const auto& weights = *weight_sets[k];
        const auto col = static_cast<Eigen::Index>(k);
        for (Eigen::Index s = 0; s < n; ++s) {
            const auto& ws = weights[static_cast<std::size_t>(s)];
            const std::size_t chosen = actions[static_cast<std::size_t>(s)];
            double total = 0.0;
            std::size_t heaviest = chosen == 0 ? 1 : 0;
            for (std::size_t a = 0; a < na; ++a) {
                if (a == chosen) continue;
                total += ws[a];
                if (ws[a] > ws[heaviest]) heaviest = a;
            }
            for (std::size_t a = 0; a < na; ++a) {
                if (a == chosen) continue;
                double y = ws[a];
                if (a == heaviest && total < mu) y += mu - total;
                if (y == 0.0) continue;
                w.col(col) += y * (transitions[chosen].row(s) - transitions[a].row(s)).transpose();
            }
        }
    }
    // c = w (I - gamma P^pi)^{-1}, i.e. (I - gamma P^pi)^T c^T = w^T.
    Matrix system = -gamma * select_rows(transitions, actions);
    system.diagonal().array() += 1.0;
    const Matrix c = system.transpose().partialPivLu().solve(w);
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < c.cols(); ++k) {
        double bound = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) bound += std::max(0.0, std::abs(c(j, k)) - lambda);
        best = std::min(best, rmax * bound);
    }
    return best;
}

inline FixedPolicyOutcome solve_reward(const std::vector<Matrix>& transitions, const std::vector<std::size_t>& actions,
                                       const GirlTask& task) {
    auto lp_data = build_reward_lp(transitions, actions, task);
    const auto res = lp::solve(lp_data.problem);
    if (!res.optimal()) throw NumericalError("reward LP is always feasible and bounded but solved as " +
                                             std::string(lp::to_string(res.status)));
    const std::size_t n = lp_data.n_states;
    FixedPolicyOutcome out;
    out.feasible = true;
    out.margin_weight = task.margin_weight;
    out.penalty_weight = task.penalty_weight;
    Vector reward(static_cast<Eigen::Index>(n));
    std::size_t m_off;
    if (lp_data.features) {
        const auto d = lp_data.n_params;
        Vector theta(static_cast<Eigen::Index>(d));
        for (std::size_t j = 0; j < d; ++j) theta(static_cast<Eigen::Index>(j)) = res.point[j];
        reward = feature_reward_expand(theta, *task.reward_features);
        out.estimate.theta = theta;
        m_off = d + n;
    } else {
        for (std::size_t s = 0; s < n; ++s) reward(static_cast<Eigen::Index>(s)) = res.point[s] - res.point[n + s];
        m_off = 2 * n;
    }
    double margin = 0.0;
    for (std::size_t s = 0; s < n; ++s) margin += res.point[m_off + s];
    out.margin = margin;
    out.penalty = reward.cwiseAbs().sum();
    out.estimate.reward = std::move(reward);
    out.margin_duals.assign(n, std::vector<double>(transitions.size(), 0.0));
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t a = 0; a < transitions.size(); ++a)
            if (lp_data.margin_row[s][a] >= 0)
                out.margin_duals[s][a] = std::max(0.0, -res.duals[static_cast<std::size_t>(lp_data.margin_row[s][a])]);
    return out;
}

inline FixedPolicyOutcome solve_transition(const GirlTask& task, const std::vector<Matrix>& base,
                                           const std::vector<std::size_t>& actions, const SubproblemOptions& opt) {
    const std::size_t n = task.known.n_states;
    const Vector& reward = *task.known.reward;
    const double gamma = task.known.gamma;
    const auto& entries = task.unknown_transition_entries;
    const std::size_t k = entries.size();

    bool coupled = false;
    for (const auto& e : entries)
        if (actions[e.state] == e.action) coupled = true;
    if (coupled && !opt.transition_fixed_point)
        throw NonlinearCoupling("unknown transition entries lie in rows the policy selects; enable the fixed-point fallback");

    std::map<std::pair<std::size_t, std::size_t>, std::vector<std::size_t>> by_row;
    for (std::size_t i = 0; i < k; ++i) by_row[{entries[i].action, entries[i].state}].push_back(i);
    std::vector<double> share(k, 0.0);
    for (const auto& [key, idx] : by_row) {
        const double mass = 1.0 - base[key.first].row(static_cast<Eigen::Index>(key.second)).sum();
        for (auto i : idx) share[i] = mass / static_cast<double>(idx.size());
    }

    // P^pi with the current unknown values written into the rows the policy selects.
    auto policy_rows = [&](const std::vector<double>& x) {
        Matrix p_pi = select_rows(base, actions);
        for (std::size_t i = 0; i < k; ++i)
            if (actions[entries[i].state] == entries[i].action)
                p_pi(static_cast<Eigen::Index>(entries[i].state), static_cast<Eigen::Index>(entries[i].column)) = x[i];
        return p_pi;
    };

    // LP over [x (k) | w (k)]: minimize sum w, w >= |x - share|, optimality rows at fixed V.
    auto solve_at = [&](const Matrix& p_pi, const Vector& v) -> std::optional<std::vector<double>> {
        lp::LpProblem p(2 * k);
        for (std::size_t i = 0; i < k; ++i) {
            p.set_bounds(i, 0.0, 1.0);
            p.objective[k + i] = 1.0;
        }
        auto unknown_dot = [&](std::size_t a, std::size_t s, std::vector<double>& row, double sign) {
            if (auto it = by_row.find({a, s}); it != by_row.end())
                for (auto i : it->second) row[i] += sign * v(static_cast<Eigen::Index>(entries[i].column));
            return base[a].row(static_cast<Eigen::Index>(s)).dot(v);
        };
        for (std::size_t s = 0; s < n; ++s) {
            const auto si = static_cast<Eigen::Index>(s);
            const std::size_t c = actions[s];
            const bool chosen_unknown = by_row.count({c, s}) > 0;
            const double chosen = p_pi.row(si).dot(v);
            for (std::size_t a = 0; a < base.size(); ++a) {
                if (a == c) continue;
                if (!chosen_unknown && !by_row.count({a, s})) {
                    if (chosen - base[a].row(si).dot(v) < -opt.tol) return std::nullopt;
                    continue;
                }
                // P^c(s) V - P^a(s) V >= 0, linear in the unknown entries at fixed V.
                std::vector<double> row(2 * k, 0.0);
                const double kc = unknown_dot(c, s, row, 1.0);
                const double ka = unknown_dot(a, s, row, -1.0);
                p.add(std::move(row), lp::Relation::GreaterEqual, ka - kc - opt.tol);
            }
        }
        for (const auto& [key, idx] : by_row) {
            std::vector<double> row(2 * k, 0.0);
            for (auto i : idx) row[i] = 1.0;
            const double mass = 1.0 - base[key.first].row(static_cast<Eigen::Index>(key.second)).sum();
            p.add(std::move(row), lp::Relation::Equal, mass);
        }
        for (std::size_t i = 0; i < k; ++i) {
            std::vector<double> hi(2 * k, 0.0), lo(2 * k, 0.0);
            hi[i] = 1.0;
            hi[k + i] = -1.0;
            lo[i] = -1.0;
            lo[k + i] = -1.0;
            p.add(std::move(hi), lp::Relation::LessEqual, share[i]);
            p.add(std::move(lo), lp::Relation::LessEqual, -share[i]);
        }
        const auto res = lp::solve(p);
        if (!res.optimal()) return std::nullopt;
        return std::vector<double>(res.point.begin(), res.point.begin() + static_cast<long>(k));
    };

    FixedPolicyOutcome out;
    std::vector<double> x = share;
    for (auto& xi : x) xi = std::max(0.0, xi);
    const std::size_t rounds = coupled ? opt.fixed_point_rounds : 1;
    bool converged = !coupled;
    for (std::size_t round = 0; round < rounds; ++round) {
        const Matrix p_pi = policy_rows(x);
        const Vector v = evaluate(p_pi, reward, gamma);
        const auto next = solve_at(p_pi, v);
        if (!next) return out;
        double change = 0.0;
        for (std::size_t i = 0; i < k; ++i) change = std::max(change, std::abs((*next)[i] - x[i]));
        x = *next;
        if (coupled && change <= opt.fixed_point_tol) {
            converged = true;
            break;
        }
    }
    if (!converged) return out;
    // Final certificate with the exact value of the recovered model.
    auto ts = base;
    for (std::size_t i = 0; i < k; ++i)
        ts[entries[i].action](static_cast<Eigen::Index>(entries[i].state), static_cast<Eigen::Index>(entries[i].column)) =
            x[i];
    if (!certify(ts, reward, gamma, actions, opt.tol).satisfied) return out;
    out.feasible = true;
    out.estimate.transition_entries = x;
    return out;
}

} // namespace detail

/// Reward-LP multipliers at a reference policy, used to bound nearby policies.
struct BoundReference {
    std::vector<std::size_t> actions;
    std::vector<detail::MarginWeights> duals;
};

/**
 * Prepared form of a task: candidate transition sets are materialized once so
 * that many policies can be evaluated cheaply. Immutable after construction.
 */
class FixedPolicySolver {
public:
    explicit FixedPolicySolver(GirlTask task, SubproblemOptions options = {})
        : task_(std::move(task)), options_(options) {
        task_.validate();
        sets_ = detail::candidate_transitions(task_);
        if (task_.unknown_kind == UnknownKind::Action || task_.unknown_kind == UnknownKind::State) build_greedy_sets();
    }

    const GirlTask& task() const { return task_; }
    const SubproblemOptions& options() const { return options_; }
    const std::vector<std::vector<Matrix>>& candidate_sets() const { return sets_; }

    FixedPolicyOutcome solve(const PolicyMatrix& pi) const {
        return solve(detail::deterministic_actions(pi, task_.known.n_states, task_.known.n_actions));
    }

    /**
     * Solves the subproblem for a deterministic action vector. When
     * `required_gain` is set, reward candidates whose multiplier bound shows a
     * gain below it are skipped, and a fully skipped policy is reported as
     * pruned.
     */
    FixedPolicyOutcome solve(const std::vector<std::size_t>& actions, std::optional<double> required_gain = {},
                             const std::vector<BoundReference>* references = nullptr) const {
        switch (task_.unknown_kind) {
        case UnknownKind::TransitionRows: return detail::solve_transition(task_, sets_.front(), actions, options_);
        case UnknownKind::Action:
        case UnknownKind::State: {
            FixedPolicyOutcome out;
            for (std::size_t c = 0; c < sets_.size(); ++c) {
                if (!greedy_.empty() && !greedy_everywhere(c, actions)) continue;
                if (detail::certify(sets_[c], *task_.known.reward, task_.known.gamma, actions, options_.tol).satisfied) {
                    out.feasible = true;
                    out.estimate.candidate = c;
                    return out;
                }
            }
            return out;
        }
        case UnknownKind::Reward:
        case UnknownKind::RewardPlusAction: {
            FixedPolicyOutcome best;
            bool any = false;
            bool all_pruned = true;
            std::vector<detail::MarginWeights> remapped;
            std::vector<const detail::MarginWeights*> sets;
            for (std::size_t c = 0; c < sets_.size(); ++c) {
                if (required_gain && references && !references->empty() && !task_.reward_features) {
                    remap(actions, c, *references, remapped);
                    sets.clear();
                    for (const auto& w : remapped) sets.push_back(&w);
                    const double bound = detail::tabular_gain_bound(sets_[c], actions, task_.known.gamma,
                                                                    task_.margin_weight, task_.penalty_weight,
                                                                    task_.reward_bound, sets);
                    if (bound < *required_gain) continue;
                }
                all_pruned = false;
                auto out = detail::solve_reward(sets_[c], actions, task_);
                // Ties between candidates go to the lowest index.
                if (!any || out.gain() > best.gain()) {
                    if (task_.unknown_kind == UnknownKind::RewardPlusAction) out.estimate.candidate = c;
                    best = std::move(out);
                    any = true;
                }
            }
            if (!any && all_pruned) {
                FixedPolicyOutcome pruned;
                pruned.pruned = true;
                return pruned;
            }
            return best;
        }
        }
        throw ValidationError("unsupported task kind");
    }

    /// Margin-row multipliers of the reward LP at `actions`, one set per candidate.
    BoundReference reference(const std::vector<std::size_t>& actions) const {
        BoundReference ref;
        ref.actions = actions;
        for (const auto& set : sets_) ref.duals.push_back(detail::solve_reward(set, actions, task_).margin_duals);
        return ref;
    }

private:
    /// Carries reference multipliers over to `actions`; rows of changed states put mu on the old action.
    void remap(const std::vector<std::size_t>& actions, std::size_t candidate, const std::vector<BoundReference>& refs,
               std::vector<detail::MarginWeights>& out) const {
        out.resize(refs.size());
        for (std::size_t k = 0; k < refs.size(); ++k) {
            const auto& ref = refs[k];
            out[k] = ref.duals[std::min(candidate, ref.duals.size() - 1)];
            for (std::size_t s = 0; s < actions.size(); ++s) {
                if (actions[s] == ref.actions[s]) continue;
                std::fill(out[k][s].begin(), out[k][s].end(), 0.0);
                out[k][s][ref.actions[s]] = task_.margin_weight;
            }
        }
    }

    /**
     * Marks, per candidate model, the actions that are greedy for its optimal
     * values. A policy passing the certificate at tol has values within
     * gamma tol / (1 - gamma) of optimal, so its actions are greedy up to
     * gamma tol / (1 - gamma); the screen uses a looser margin and only
     * policies passing it are certified exactly.
     */
    void build_greedy_sets() {
        const std::size_t n = task_.known.n_states;
        const std::size_t na = task_.known.n_actions;
        const double gamma = task_.known.gamma;
        const Vector& reward = *task_.known.reward;
        greedy_.assign(sets_.size(), std::vector<std::vector<bool>>(n, std::vector<bool>(na, true)));
        for (std::size_t c = 0; c < sets_.size(); ++c) {
            const TabularMdp model(sets_[c], reward, gamma);
            const Vector v = policy_value(model, solve_optimal_policy(model, options_.tol));
            std::vector<Vector> q(na);
            for (std::size_t a = 0; a < na; ++a) q[a] = reward + gamma * (sets_[c][a] * v);
            const double slack = 2.0 * options_.tol / (1.0 - gamma) + 1e-9 * (1.0 + v.cwiseAbs().maxCoeff());
            for (std::size_t s = 0; s < n; ++s) {
                const auto si = static_cast<Eigen::Index>(s);
                double top = q[0](si);
                for (std::size_t a = 1; a < na; ++a) top = std::max(top, q[a](si));
                for (std::size_t a = 0; a < na; ++a) greedy_[c][s][a] = q[a](si) >= top - slack;
            }
        }
    }

    bool greedy_everywhere(std::size_t candidate, const std::vector<std::size_t>& actions) const {
        const auto& g = greedy_[candidate];
        for (std::size_t s = 0; s < actions.size(); ++s)
            if (!g[s][actions[s]]) return false;
        return true;
    }

    GirlTask task_;
    SubproblemOptions options_;
    std::vector<std::vector<Matrix>> sets_;
    std::vector<std::vector<std::vector<bool>>> greedy_;
};

/// Solves the task's subproblem for one fixed deterministic policy.
inline FixedPolicyOutcome solve_fixed_policy(const GirlTask& task, const PolicyMatrix& pi,
                                             const SubproblemOptions& options = {}) {
    return FixedPolicySolver(task, options).solve(pi);
}

} // namespace girl
