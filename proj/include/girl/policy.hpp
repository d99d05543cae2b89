#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "girl/mdp.hpp"
#include "girl/types.hpp"

namespace girl {

/// Frobenius distance between policy matrices plus the deterministic row view.
struct PolicyDistance {
    double frobenius = 0.0;
    std::size_t hamming_rows = 0;
};

/// Two rows differ when some entry differs by more than this.
inline constexpr double kRowDifferenceTol = 1e-12;

/// Builds Pi(s, a) = pi(a | s) from one probability vector per state.
inline PolicyMatrix policy_matrix_of(const std::vector<std::vector<double>>& policy) {
    detail::require(!policy.empty(), "policy must cover at least one state");
    const std::size_t na = policy.front().size();
    detail::require(na > 0, "policy rows must be non-empty");
    Matrix m(static_cast<Eigen::Index>(policy.size()), static_cast<Eigen::Index>(na));
    for (std::size_t s = 0; s < policy.size(); ++s) {
        detail::require_shape(policy[s].size() == na, "policy row " + std::to_string(s) + " has the wrong length");
        double sum = 0.0;
        for (std::size_t a = 0; a < na; ++a) {
            const double p = policy[s][a];
            detail::require(std::isfinite(p) && p >= 0.0, "policy row " + std::to_string(s) + " has a negative entry");
            sum += p;
            m(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) = p;
        }
        detail::require(std::abs(sum - 1.0) <= kStochasticTol, "policy row " + std::to_string(s) + " does not sum to 1");
    }
    return PolicyMatrix(std::move(m));
}

inline PolicyDistance distance(const PolicyMatrix& a, const PolicyMatrix& b) {
    detail::require_shape(a.n_states() == b.n_states() && a.n_actions() == b.n_actions(),
                          "policy distance needs equally shaped matrices");
    PolicyDistance d;
    double sum = 0.0;
    for (Eigen::Index s = 0; s < a.entries().rows(); ++s) {
        bool differs = false;
        for (Eigen::Index c = 0; c < a.entries().cols(); ++c) {
            const double diff = a.entries()(s, c) - b.entries()(s, c);
            sum += diff * diff;
            if (std::abs(diff) > kRowDifferenceTol) differs = true;
        }
        if (differs) ++d.hamming_rows;
    }
    d.frobenius = std::sqrt(sum);
    return d;
}

enum class CriterionKind { Reward, Transition, State, Action };

/// Which normalized recovery error to compute and its normalizer.
struct Criterion1Spec {
    CriterionKind task_kind = CriterionKind::Reward;
    /// |S| for reward and state, |S|^2 for transition, |A| for action.
    double normalizer = 1.0;
};

/// Candidate-membership indicator over an uncertainty set.
using Membership = std::vector<bool>;

/// Inputs accepted by criterion1: a reward vector, a transition matrix or a membership indicator.
using CriterionValue = std::variant<Vector, Matrix, Membership>;

inline Membership membership_of(std::size_t selected, std::size_t universe) {
    detail::require(selected < universe, "selected candidate outside the candidate universe");
    Membership m(universe, false);
    m[selected] = true;
    return m;
}

/**
 * Normalized recovery error: ||R - R^||_1 / |S|, ||P - P^||_1 / |S|^2
 * (entrywise L1), or the symmetric-difference size of two candidate
 * membership indicators divided by |S| or |A|.
 */
inline double criterion1(const Criterion1Spec& spec, const CriterionValue& truth, const CriterionValue& estimate) {
    detail::require(spec.normalizer > 0.0, "criterion normalizer must be positive");
    detail::require(truth.index() == estimate.index(), "criterion inputs must be of the same kind");
    switch (spec.task_kind) {
    case CriterionKind::Reward: {
        detail::require(std::holds_alternative<Vector>(truth), "reward criterion needs reward vectors");
        const auto& t = std::get<Vector>(truth);
        const auto& e = std::get<Vector>(estimate);
        detail::require_shape(t.size() == e.size(), "reward vectors differ in length");
        return (t - e).cwiseAbs().sum() / spec.normalizer;
    }
    case CriterionKind::Transition: {
        detail::require(std::holds_alternative<Matrix>(truth), "transition criterion needs matrices");
        const auto& t = std::get<Matrix>(truth);
        const auto& e = std::get<Matrix>(estimate);
        detail::require_shape(t.rows() == e.rows() && t.cols() == e.cols(), "transition matrices differ in shape");
        return (t - e).cwiseAbs().sum() / spec.normalizer;
    }
    case CriterionKind::State:
    case CriterionKind::Action: {
        detail::require(std::holds_alternative<Membership>(truth), "set criterion needs membership indicators");
        const auto& t = std::get<Membership>(truth);
        const auto& e = std::get<Membership>(estimate);
        detail::require_shape(t.size() == e.size(), "membership indicators differ in length");
        std::size_t mismatches = 0;
        for (std::size_t i = 0; i < t.size(); ++i)
            if (t[i] != e[i]) ++mismatches;
        return static_cast<double>(mismatches) / spec.normalizer;
    }
    }
    throw ValidationError("unknown criterion kind");
}

/// Whether a recovered deterministic policy is optimal for the true MDP.
inline bool criterion2(const TabularMdp& true_mdp, const PolicyMatrix& recovered, double tol = 1e-8) {
    return is_optimal(true_mdp, recovered, tol).satisfied;
}

} // namespace girl
