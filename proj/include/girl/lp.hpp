#pragma once

/**
 * Dense linear programming.
 *
 * Two-phase bounded-variable primal simplex on a dense condensed tableau
 * that keeps one column per nonbasic variable. Every row
 * a.x (<=, >=, =) b receives a slack s with a.x + s = b and bounds
 * [0, inf), (-inf, 0] or [0, 0]; rows whose slack cannot absorb the initial
 * residual get an artificial variable that phase 1 drives to zero.
 *
 * Pricing is Devex: the largest squared reduced cost over an approximate
 * reference-framework edge weight. After 5 * (n_vars + n_constraints)
 * consecutive degenerate pivots it switches to Bland's rule until the next
 * pivot that moves the objective, which rules out cycling. Reduced costs are
 * recomputed from the tableau periodically and before optimality is declared.
 *
 * Internal tolerances:
 *   - pivot tolerance 1e-10: smaller tableau entries never become pivots;
 *   - zero tolerance 1e-12: ratio ties and updates below this are treated as 0;
 *   - optimality tolerance 1e-9 on reduced costs;
 *   - phase-1 feasibility tolerance 1e-9 (scaled by the right-hand sides).
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <limits>
#include <locale>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "girl/errors.hpp"

namespace girl::lp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Relation { LessEqual, GreaterEqual, Equal };

struct Constraint {
    std::vector<double> coefficients;
    Relation relation = Relation::LessEqual;
    double rhs = 0.0;
};

/// minimize objective . x subject to constraints and lower <= x <= upper.
struct LpProblem {
    std::size_t n_vars = 0;
    std::vector<double> objective;
    std::vector<Constraint> constraints;
    std::vector<double> lower;
    std::vector<double> upper;

    LpProblem() = default;
    /// Variables default to [0, +inf).
    explicit LpProblem(std::size_t n) : n_vars(n), objective(n, 0.0), lower(n, 0.0), upper(n, kInf) {}

    void add(std::vector<double> coefficients, Relation relation, double rhs) {
        constraints.push_back({std::move(coefficients), relation, rhs});
    }

    void set_bounds(std::size_t var, double lo, double hi) {
        lower.at(var) = lo;
        upper.at(var) = hi;
    }

    void validate() const {
        detail::require(n_vars > 0, "LP needs at least one variable");
        detail::require(objective.size() == n_vars && lower.size() == n_vars && upper.size() == n_vars,
                        "LP objective and bounds must have n_vars entries");
        for (std::size_t j = 0; j < n_vars; ++j) {
            detail::require(std::isfinite(objective[j]), "LP objective has a non-finite coefficient");
            detail::require(!std::isnan(lower[j]) && !std::isnan(upper[j]), "LP bound is NaN");
            detail::require(lower[j] != kInf && upper[j] != -kInf, "LP bound excludes every value");
            if (!(lower[j] <= upper[j]))
                throw ValidationError("LP lower bound exceeds upper bound for variable " + std::to_string(j));
        }
        for (std::size_t i = 0; i < constraints.size(); ++i) {
            const auto& c = constraints[i];
            if (c.coefficients.size() != n_vars)
                throw ValidationError("LP constraint " + std::to_string(i) + " has wrong length");
            if (!std::isfinite(c.rhs)) throw ValidationError("LP constraint " + std::to_string(i) + " has a non-finite rhs");
            for (double a : c.coefficients)
                if (!std::isfinite(a))
                    throw ValidationError("LP constraint " + std::to_string(i) + " has a non-finite coefficient");
        }
    }
};

enum class LpStatus { Optimal, Infeasible, Unbounded };

inline const char* to_string(LpStatus s) {
    switch (s) {
    case LpStatus::Optimal: return "optimal";
    case LpStatus::Infeasible: return "infeasible";
    case LpStatus::Unbounded: return "unbounded";
    }
    return "?";
}

struct LpOutcome {
    LpStatus status = LpStatus::Infeasible;
    std::vector<double> point;     ///< empty unless Optimal
    double objective_value = 0.0;  ///< meaningful only when Optimal
    /// Row multipliers y at the optimum: reduced costs are objective - A^T y.
    std::vector<double> duals;
    std::size_t iterations = 0;

    bool optimal() const { return status == LpStatus::Optimal; }
};

struct SolverOptions {
    double pivot_tol = 1e-10;
    double zero_tol = 1e-12;
    double optimality_tol = 1e-9;
    double feasibility_tol = 1e-9;
    /// Consecutive degenerate pivots before Bland's rule engages; 0 selects 5 * (n_vars + n_constraints).
    std::size_t bland_after = 0;
    /// 0 selects a cap proportional to the problem size.
    std::size_t max_iterations = 0;
};

namespace detail {

enum class NonbasicAt : unsigned char { Lower, Upper, Zero, Basic };

class Simplex {
public:
    Simplex(const LpProblem& p, const SolverOptions& opt) : p_(p), opt_(opt) {
        n_ = p.n_vars;
        m_ = p.constraints.size();
        build();
    }

    LpOutcome run() {
        LpOutcome out;
        const std::size_t dims = n_ + m_;
        bland_after_ = opt_.bland_after ? opt_.bland_after : 5 * dims;
        max_iterations_ = opt_.max_iterations ? opt_.max_iterations : 200 * dims + 100000;

        if (n_art_ > 0) {
            std::vector<double> cost(vars_, 0.0);
            for (std::size_t v = n_ + m_; v < vars_; ++v) cost[v] = 1.0;
            set_costs(cost);
            iterate(/*phase_one=*/true);
            double infeasibility = 0.0;
            for (std::size_t v = n_ + m_; v < vars_; ++v) infeasibility += current(v);
            if (infeasibility > opt_.feasibility_tol * (1.0 + rhs_scale_)) {
                out.status = LpStatus::Infeasible;
                out.iterations = iterations_;
                return out;
            }
            retire_artificials();
        }

        std::vector<double> cost(vars_, 0.0);
        for (std::size_t j = 0; j < n_; ++j) cost[j] = p_.objective[j];
        set_costs(cost);
        if (!iterate(/*phase_one=*/false)) {
            out.status = LpStatus::Unbounded;
            out.iterations = iterations_;
            return out;
        }

        out.status = LpStatus::Optimal;
        out.point.assign(n_, 0.0);
        for (std::size_t j = 0; j < n_; ++j) {
            // Snap values that drifted past a bound by rounding noise.
            out.point[j] = std::clamp(current(j), p_.lower[j], p_.upper[j]);
        }
        double obj = 0.0;
        for (std::size_t j = 0; j < n_; ++j) obj += p_.objective[j] * out.point[j];
        out.objective_value = obj;
        out.duals.assign(m_, 0.0);
        for (std::size_t i = 0; i < m_; ++i) {
            const std::size_t v = n_ + i;
            if (state_[v] != NonbasicAt::Basic) out.duals[i] = -reduced_[slot_[v]];
        }
        out.iterations = iterations_;
        return out;
    }

private:
    double& at(std::size_t i, std::size_t k) { return tab_[i * cols_ + k]; }

    double current(std::size_t v) const { return state_[v] == NonbasicAt::Basic ? beta_[slot_[v]] : value_[v]; }

    /**
     * Variables are structural (0..n-1), slacks (n..n+m-1) and artificials.
     * The tableau keeps one column per nonbasic variable: row i reads
     * x_B(i) + sum_k T(i, k) x_N(k) = const, and beta holds the basic values.
     */
    void build() {
        lo_.assign(n_ + 2 * m_, 0.0);
        hi_.assign(n_ + 2 * m_, 0.0);
        value_.assign(n_ + 2 * m_, 0.0);
        state_.assign(n_ + 2 * m_, NonbasicAt::Lower);
        for (std::size_t j = 0; j < n_; ++j) {
            lo_[j] = p_.lower[j];
            hi_[j] = p_.upper[j];
            if (std::isfinite(lo_[j])) {
                state_[j] = NonbasicAt::Lower;
                value_[j] = lo_[j];
            } else if (std::isfinite(hi_[j])) {
                state_[j] = NonbasicAt::Upper;
                value_[j] = hi_[j];
            } else {
                state_[j] = NonbasicAt::Zero;
                value_[j] = 0.0;
            }
        }
        for (std::size_t i = 0; i < m_; ++i) {
            const auto rel = p_.constraints[i].relation;
            lo_[n_ + i] = rel == Relation::GreaterEqual ? -kInf : 0.0;
            hi_[n_ + i] = rel == Relation::LessEqual ? kInf : 0.0;
            rhs_scale_ = std::max(rhs_scale_, std::abs(p_.constraints[i].rhs));
        }

        // Residuals decide which rows need an artificial variable.
        std::vector<double> residual(m_);
        std::vector<double> sign(m_, 0.0);
        for (std::size_t i = 0; i < m_; ++i) {
            double r = p_.constraints[i].rhs;
            const auto& a = p_.constraints[i].coefficients;
            for (std::size_t j = 0; j < n_; ++j)
                if (a[j] != 0.0) r -= a[j] * value_[j];
            residual[i] = r;
            const std::size_t s = n_ + i;
            const double tol = opt_.feasibility_tol * (1.0 + std::abs(p_.constraints[i].rhs));
            if (r >= lo_[s] - tol && r <= hi_[s] + tol) continue;
            sign[i] = r > hi_[s] ? 1.0 : -1.0;
            ++n_art_;
        }

        vars_ = n_ + m_ + n_art_;
        cols_ = n_ + n_art_;
        tab_.assign(m_ * cols_, 0.0);
        weight_.assign(cols_, 1.0);
        basis_.assign(m_, 0);
        beta_.assign(m_, 0.0);
        col_var_.assign(cols_, 0);
        slot_.assign(vars_, 0);
        for (std::size_t j = 0; j < n_; ++j) {
            col_var_[j] = j;
            slot_[j] = j;
        }
        std::size_t art = n_ + m_;
        std::size_t col = n_;
        for (std::size_t i = 0; i < m_; ++i) {
            const auto& a = p_.constraints[i].coefficients;
            const std::size_t s = n_ + i;
            if (sign[i] == 0.0) {
                for (std::size_t j = 0; j < n_; ++j) at(i, j) = a[j];
                basis_[i] = s;
                slot_[s] = i;
                state_[s] = NonbasicAt::Basic;
                beta_[i] = residual[i];
                continue;
            }
            // a.x + s + sign * art = b with the slack parked at its violated bound.
            const double parked = sign[i] > 0.0 ? hi_[s] : lo_[s];
            state_[s] = sign[i] > 0.0 ? NonbasicAt::Upper : NonbasicAt::Lower;
            value_[s] = parked;
            const double g = sign[i];
            for (std::size_t j = 0; j < n_; ++j) at(i, j) = g * a[j];
            at(i, col) = g;
            col_var_[col] = s;
            slot_[s] = col;
            lo_[art] = 0.0;
            hi_[art] = kInf;
            state_[art] = NonbasicAt::Basic;
            basis_[i] = art;
            slot_[art] = i;
            beta_[i] = g * (residual[i] - parked);
            ++art;
            ++col;
        }
        lo_.resize(vars_);
        hi_.resize(vars_);
        value_.resize(vars_);
        state_.resize(vars_);
    }

    void set_costs(const std::vector<double>& cost) {
        cost_ = cost;
        refresh_reduced();
    }

    void refresh_reduced() {
        reduced_.assign(cols_, 0.0);
        for (std::size_t k = 0; k < cols_; ++k) reduced_[k] = cost_[col_var_[k]];
        for (std::size_t i = 0; i < m_; ++i) {
            const double cb = cost_[basis_[i]];
            if (cb == 0.0) continue;
            const double* row = &tab_[i * cols_];
            for (std::size_t k = 0; k < cols_; ++k) reduced_[k] -= cb * row[k];
        }
    }

    /// Returns false on an unbounded ray.
    bool iterate(bool phase_one) {
        std::vector<std::size_t> nz;
        nz.reserve(cols_);
        std::size_t degenerate_run = 0;
        std::size_t since_refresh = 0;
        std::size_t final_checks = 0;
        for (;;) {
            if (iterations_ >= max_iterations_)
                throw NumericalError("simplex iteration guard exceeded (" + std::to_string(iterations_) + " pivots)");
            if (++since_refresh >= kRefreshEvery) {
                refresh_reduced();
                since_refresh = 0;
            }
            const bool bland = degenerate_run >= bland_after_;

            // Devex picks the largest d^2 / w; Bland the eligible variable with the smallest index.
            std::size_t enter = cols_;
            double dir = 0.0;
            double best = 0.0;
            for (std::size_t k = 0; k < cols_; ++k) {
                const std::size_t v = col_var_[k];
                if (lo_[v] == hi_[v]) continue;
                const auto st = state_[v];
                const double d = reduced_[k];
                double cand_dir = 0.0;
                if (d < -opt_.optimality_tol && (st == NonbasicAt::Lower || st == NonbasicAt::Zero))
                    cand_dir = 1.0;
                else if (d > opt_.optimality_tol && (st == NonbasicAt::Upper || st == NonbasicAt::Zero))
                    cand_dir = -1.0;
                if (cand_dir == 0.0) continue;
                const double score = d * d / weight_[k];
                const bool take = bland ? (enter == cols_ || v < col_var_[enter]) : score > best;
                if (take) {
                    best = score;
                    enter = k;
                    dir = cand_dir;
                }
            }
            if (enter == cols_) {
                // Confirm optimality against freshly computed reduced costs.
                if (since_refresh == 0 || final_checks >= kMaxFinalChecks) return true;
                refresh_reduced();
                since_refresh = 0;
                ++final_checks;
                continue;
            }
            const std::size_t ev = col_var_[enter];

            // Ratio test: basic i moves by -dir * T(i, enter) * t.
            double t_max = hi_[ev] - lo_[ev];
            std::size_t leave_row = m_;
            double leave_alpha = 0.0;
            double col_max = 0.0;
            for (std::size_t i = 0; i < m_; ++i) col_max = std::max(col_max, std::abs(at(i, enter)));
            const double min_pivot = opt_.pivot_tol * std::max(1.0, col_max);
            auto limit_of = [&](std::size_t i, double alpha, double slack) {
                const double delta = -dir * alpha;
                const std::size_t b = basis_[i];
                if (delta < 0.0)
                    return std::isfinite(lo_[b]) ? (beta_[i] - lo_[b] + slack) / -delta : kInf;
                return std::isfinite(hi_[b]) ? (hi_[b] - beta_[i] + slack) / delta : kInf;
            };
            if (bland) {
                for (std::size_t i = 0; i < m_; ++i) {
                    const double alpha = at(i, enter);
                    if (std::abs(alpha) <= min_pivot) continue;
                    const double limit = std::max(0.0, limit_of(i, alpha, 0.0));
                    if (!std::isfinite(limit)) continue;
                    bool take = false;
                    if (leave_row == m_)
                        take = limit <= t_max + opt_.zero_tol;
                    else if (limit < t_max - opt_.zero_tol)
                        take = true;
                    else if (limit <= t_max + opt_.zero_tol)
                        take = basis_[i] < basis_[leave_row];
                    if (take) {
                        t_max = std::min(t_max, limit);
                        leave_row = i;
                        leave_alpha = alpha;
                    }
                }
            } else {
                // Harris: bound the step with relaxed bounds, then take the largest pivot below it.
                double relaxed = t_max;
                for (std::size_t i = 0; i < m_; ++i) {
                    const double alpha = at(i, enter);
                    if (std::abs(alpha) <= min_pivot) continue;
                    relaxed = std::min(relaxed, limit_of(i, alpha, opt_.feasibility_tol));
                }
                for (std::size_t i = 0; i < m_; ++i) {
                    const double alpha = at(i, enter);
                    if (std::abs(alpha) <= min_pivot) continue;
                    const double limit = limit_of(i, alpha, 0.0);
                    if (limit > relaxed) continue;
                    if (leave_row == m_ || std::abs(alpha) > std::abs(leave_alpha)) {
                        leave_row = i;
                        leave_alpha = alpha;
                    }
                }
                if (leave_row != m_) {
                    const double limit = std::max(0.0, limit_of(leave_row, leave_alpha, 0.0));
                    if (limit < t_max || !std::isfinite(t_max))
                        t_max = limit;
                    else
                        leave_row = m_;
                }
            }

            if (!std::isfinite(t_max)) {
                if (phase_one) throw NumericalError("unbounded ray in phase one");
                return false;
            }
            ++iterations_;
            degenerate_run = t_max <= opt_.zero_tol ? degenerate_run + 1 : 0;

            const double step = dir * t_max;
            for (std::size_t i = 0; i < m_; ++i) {
                const double alpha = at(i, enter);
                if (alpha != 0.0) beta_[i] -= alpha * step;
            }
            if (leave_row == m_) {
                // Bound flip: the entering variable crosses its whole range.
                state_[ev] = dir > 0.0 ? NonbasicAt::Upper : NonbasicAt::Lower;
                value_[ev] = dir > 0.0 ? hi_[ev] : lo_[ev];
                continue;
            }

            const std::size_t leaving = basis_[leave_row];
            const double leave_delta = -dir * leave_alpha;
            state_[leaving] = leave_delta < 0.0 ? NonbasicAt::Lower : NonbasicAt::Upper;
            value_[leaving] = leave_delta < 0.0 ? lo_[leaving] : hi_[leaving];
            if (lo_[leaving] == hi_[leaving]) state_[leaving] = NonbasicAt::Lower;
            const double entering_value = value_[ev] + step;
            exchange(leave_row, enter, entering_value, nz);
        }
    }

    /// Swaps the basic variable of row r with the nonbasic variable of column k.
    void exchange(std::size_t r, std::size_t k, double entering_value, std::vector<std::size_t>& nz) {
        const std::size_t ev = col_var_[k];
        const std::size_t lv = basis_[r];
        state_[ev] = NonbasicAt::Basic;
        basis_[r] = ev;
        slot_[ev] = r;
        col_var_[k] = lv;
        slot_[lv] = k;
        beta_[r] = entering_value;
        pivot(r, k, nz);
    }

    /// Condensed-tableau pivot: the pivot column turns into the leaving variable's column.
    void pivot(std::size_t r, std::size_t c, std::vector<std::size_t>& nz) {
        double* prow = &tab_[r * cols_];
        const double inv = 1.0 / prow[c];
        nz.clear();
        for (std::size_t j = 0; j < cols_; ++j) {
            if (prow[j] == 0.0) continue;
            prow[j] *= inv;
            if (std::abs(prow[j]) < opt_.zero_tol * 1e-3 && j != c)
                prow[j] = 0.0;
            else
                nz.push_back(j);
        }
        // Devex weights: the leaving variable inherits the entering weight over the pivot squared.
        const double wq = weight_[c];
        for (std::size_t j : nz)
            if (j != c) weight_[j] = std::max(weight_[j], prow[j] * prow[j] * wq);
        weight_[c] = std::max(wq * inv * inv, 1.0);
        prow[c] = inv;
        // Past a quarter fill a contiguous sweep beats the indexed one; zeros leave entries unchanged.
        const bool dense = 4 * nz.size() > cols_;
        auto eliminate = [&](double* row) {
            const double f = row[c];
            if (f == 0.0) return;
            row[c] = 0.0;
            if (dense)
                for (std::size_t j = 0; j < cols_; ++j) row[j] -= f * prow[j];
            else
                for (std::size_t j : nz) row[j] -= f * prow[j];
        };
        for (std::size_t i = 0; i < m_; ++i)
            if (i != r) eliminate(&tab_[i * cols_]);
        eliminate(reduced_.data());
    }

    /// Fixes artificials at zero and pivots basic ones out where possible.
    void retire_artificials() {
        std::vector<std::size_t> nz;
        for (std::size_t v = n_ + m_; v < vars_; ++v) {
            lo_[v] = 0.0;
            hi_[v] = 0.0;
            if (state_[v] != NonbasicAt::Basic) {
                state_[v] = NonbasicAt::Lower;
                value_[v] = 0.0;
            }
        }
        reduced_.assign(cols_, 0.0);
        for (std::size_t i = 0; i < m_; ++i) {
            if (basis_[i] < n_ + m_) continue;
            std::size_t best = cols_;
            double best_abs = opt_.pivot_tol;
            for (std::size_t k = 0; k < cols_; ++k) {
                if (col_var_[k] >= n_ + m_) continue;
                const double a = std::abs(at(i, k));
                if (a > best_abs) {
                    best_abs = a;
                    best = k;
                }
            }
            if (best == cols_) continue;  // redundant row; the artificial stays basic at 0
            // Degenerate pivot: the artificial leaves at 0 and the entering variable absorbs its value.
            const std::size_t art = basis_[i];
            const double theta = beta_[i] / at(i, best);
            for (std::size_t q = 0; q < m_; ++q) {
                const double alpha = at(q, best);
                if (alpha != 0.0 && q != i) beta_[q] -= alpha * theta;
            }
            const double entering_value = value_[col_var_[best]] + theta;
            state_[art] = NonbasicAt::Lower;
            value_[art] = 0.0;
            exchange(i, best, entering_value, nz);
        }
    }

    static constexpr std::size_t kRefreshEvery = 64;
    static constexpr std::size_t kMaxFinalChecks = 8;

    const LpProblem& p_;
    SolverOptions opt_;
    std::size_t n_ = 0, m_ = 0, vars_ = 0, cols_ = 0, n_art_ = 0;
    std::vector<double> tab_;
    std::vector<double> lo_, hi_, value_, beta_, cost_, reduced_, weight_;
    std::vector<NonbasicAt> state_;
    std::vector<std::size_t> basis_, col_var_, slot_;
    double rhs_scale_ = 0.0;
    std::size_t iterations_ = 0, bland_after_ = 0, max_iterations_ = 0;
};

} // namespace detail

inline LpOutcome solve(const LpProblem& problem, const SolverOptions& options = {}) {
    problem.validate();
    detail::Simplex simplex(problem, options);
    return simplex.run();
}

/// Largest violation of constraints and bounds at x (0 when feasible).
inline double max_violation(const LpProblem& p, const std::vector<double>& x) {
    double worst = 0.0;
    for (const auto& c : p.constraints) {
        double lhs = 0.0;
        for (std::size_t j = 0; j < p.n_vars; ++j) lhs += c.coefficients[j] * x[j];
        double v = 0.0;
        switch (c.relation) {
        case Relation::LessEqual: v = lhs - c.rhs; break;
        case Relation::GreaterEqual: v = c.rhs - lhs; break;
        case Relation::Equal: v = std::abs(lhs - c.rhs); break;
        }
        worst = std::max(worst, v);
    }
    for (std::size_t j = 0; j < p.n_vars; ++j) {
        worst = std::max(worst, p.lower[j] - x[j]);
        worst = std::max(worst, x[j] - p.upper[j]);
    }
    return worst;
}

/**
 * Writes a line-oriented text dump of a problem:
 *
 *     lp <n_vars> <n_constraints>
 *     min <c_1> ... <c_n>
 *     row <le|ge|eq> <rhs> <a_1> ... <a_n>      (one per constraint)
 *     bounds <lower> <upper>                    (one per variable; inf / -inf)
 *
 * Numbers use the classic locale with 17 significant digits.
 */
inline void dump(const LpProblem& p, std::ostream& os) {
    std::ostringstream out;
    out.imbue(std::locale::classic());
    out << std::setprecision(17);
    auto num = [&out](double v) {
        if (v == kInf)
            out << "inf";
        else if (v == -kInf)
            out << "-inf";
        else
            out << v;
    };
    out << "lp " << p.n_vars << ' ' << p.constraints.size() << '\n';
    out << "min";
    for (double c : p.objective) {
        out << ' ';
        num(c);
    }
    out << '\n';
    for (const auto& c : p.constraints) {
        out << "row " << (c.relation == Relation::LessEqual ? "le" : c.relation == Relation::GreaterEqual ? "ge" : "eq")
            << ' ';
        num(c.rhs);
        for (double a : c.coefficients) {
            out << ' ';
            num(a);
        }
        out << '\n';
    }
    for (std::size_t j = 0; j < p.n_vars; ++j) {
        out << "bounds ";
        num(p.lower[j]);
        out << ' ';
        num(p.upper[j]);
        out << '\n';
    }
    os << out.str();
}

} // namespace girl::lp
