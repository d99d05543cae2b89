#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "girl/errors.hpp"

namespace girl {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Row sums of a stochastic matrix must match 1 within this tolerance.
inline constexpr double kStochasticTol = 1e-9;

namespace detail {

inline bool is_row_stochastic(const Matrix& m, double tol = kStochasticTol) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        double sum = 0.0;
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            const double p = m(r, c);
            if (!std::isfinite(p) || p < 0.0 || p > 1.0) return false;
            sum += p;
        }
        if (std::abs(sum - 1.0) > tol) return false;
    }
    return true;
}

} // namespace detail

/**
 * Row-stochastic |S| x |A| matrix with entry (s, a) = pi(a | s).
 *
 * Deterministic policies have exactly one unit entry per row.
 */
class PolicyMatrix {
public:
    PolicyMatrix() = default;

    explicit PolicyMatrix(Matrix entries) : entries_(std::move(entries)) {
        detail::require(entries_.rows() > 0 && entries_.cols() > 0, "policy matrix must be non-empty");
        detail::require(detail::is_row_stochastic(entries_), "policy matrix rows must be probability vectors");
    }

    /// One-hot policy from an action index per state.
    static PolicyMatrix deterministic(const std::vector<std::size_t>& actions, std::size_t n_actions) {
        detail::require(!actions.empty() && n_actions > 0, "deterministic policy needs states and actions");
        Matrix m = Matrix::Zero(static_cast<Eigen::Index>(actions.size()), static_cast<Eigen::Index>(n_actions));
        for (std::size_t s = 0; s < actions.size(); ++s) {
            detail::require(actions[s] < n_actions, "action index out of range in state " + std::to_string(s));
            m(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(actions[s])) = 1.0;
        }
        return PolicyMatrix(std::move(m));
    }

    static PolicyMatrix uniform(std::size_t n_states, std::size_t n_actions) {
        detail::require(n_states > 0 && n_actions > 0, "uniform policy needs states and actions");
        return PolicyMatrix(Matrix::Constant(static_cast<Eigen::Index>(n_states), static_cast<Eigen::Index>(n_actions),
                                             1.0 / static_cast<double>(n_actions)));
    }

    std::size_t n_states() const { return static_cast<std::size_t>(entries_.rows()); }
    std::size_t n_actions() const { return static_cast<std::size_t>(entries_.cols()); }
    const Matrix& entries() const { return entries_; }
    double operator()(std::size_t s, std::size_t a) const {
        return entries_(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a));
    }

    bool is_deterministic() const {
        for (Eigen::Index s = 0; s < entries_.rows(); ++s) {
            int ones = 0;
            for (Eigen::Index a = 0; a < entries_.cols(); ++a) {
                const double p = entries_(s, a);
                if (p == 1.0)
                    ++ones;
                else if (p != 0.0)
                    return false;
            }
            if (ones != 1) return false;
        }
        return true;
    }

    /// Chosen action per state; throws for stochastic policies.
    std::vector<std::size_t> actions() const {
        if (!is_deterministic()) throw ValidationError("policy is not deterministic");
        std::vector<std::size_t> out(n_states());
        for (Eigen::Index s = 0; s < entries_.rows(); ++s) {
            Eigen::Index a = 0;
            entries_.row(s).maxCoeff(&a);
            out[static_cast<std::size_t>(s)] = static_cast<std::size_t>(a);
        }
        return out;
    }

    friend bool operator==(const PolicyMatrix& a, const PolicyMatrix& b) {
        return a.entries_.rows() == b.entries_.rows() && a.entries_.cols() == b.entries_.cols() &&
               a.entries_ == b.entries_;
    }

private:
    Matrix entries_;
};

} // namespace girl
