#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <exception>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>
#include <utility>
#include <vector>

#include "girl/girl.hpp"
#include "girl/policy.hpp"

namespace girl {

struct SearchConfig {
    /// Noise threshold: at most this many rows of the observed policy are rewritten.
    std::size_t eta = 0;
    /// Search deviation levels 0..eta in order and stop once no higher level can win.
    bool incremental = true;
    std::size_t parallel_workers = 1;
    double tol = 1e-8;
    /// Skip reward subproblems whose Lagrangian bound shows they cannot win.
    bool prune = true;
    /// Fixed-point fallback for transition tasks whose unknowns couple with P^pi.
    bool transition_fixed_point = false;
};

struct GirlResult {
    PolicyMatrix policy;
    Estimate estimate;
    double distance = 0.0;
    double penalty = 0.0;
    double margin = 0.0;
    double score = 0.0;
    /// Policy matrices enumerated (deterministic for a given task and config).
    std::size_t n_subproblems = 0;
    /// Subproblems actually solved; depends on pruning order under parallelism.
    std::size_t n_solved = 0;
    double elapsed_seconds = 0.0;
};

namespace detail {

/// Lexicographic successor of a k-subset of {0..n-1}; false after the last one.
inline bool next_combination(std::vector<std::size_t>& idx, std::size_t n) {
    const std::size_t k = idx.size();
    for (std::size_t i = k; i-- > 0;) {
        if (idx[i] < n - k + i) {
            ++idx[i];
            for (std::size_t j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
            return true;
        }
    }
    return false;
}

/// Lexicographic successor of a mixed-radix digit vector; false after the last one.
inline bool next_assignment(std::vector<std::size_t>& digits, std::size_t radix) {
    for (std::size_t i = digits.size(); i-- > 0;) {
        if (++digits[i] < radix) return true;
        digits[i] = 0;
    }
    return false;
}

/// Position of a candidate in the sequential enumeration order.
struct EnumIndex {
    std::size_t level = 0;
    std::size_t combo = 0;
    std::size_t assignment = 0;
    auto operator<=>(const EnumIndex&) const = default;
};

struct Incumbent {
    bool valid = false;
    double score = std::numeric_limits<double>::infinity();
    EnumIndex index;
    std::vector<std::size_t> actions;
    FixedPolicyOutcome outcome;

    /// Non-strict replacement: equal scores go to the later enumeration index.
    bool improved_by(double s, const EnumIndex& i) const {
        return !valid || s < score || (s == score && i > index);
    }
};

/// Lock-free running minimum shared by workers for pruning.
inline void atomic_min(std::atomic<double>& target, double value) {
    double current = target.load(std::memory_order_relaxed);
    while (value < current && !target.compare_exchange_weak(current, value, std::memory_order_relaxed)) {
    }
}

class SearchRun {
public:
    SearchRun(const FixedPolicySolver& solver, const std::vector<std::size_t>& observed, const SearchConfig& cfg)
        : solver_(solver), observed_(observed), cfg_(cfg), task_(solver.task()) {
        const std::size_t n = task_.known.n_states;
        const std::size_t na = task_.known.n_actions;
        if (learns_reward(task_.unknown_kind) && na > 1) {
            // Advantages are bounded by the value range, at most 2 R_max / (1 - gamma) per state.
            const double value_range = 2.0 * task_.reward_bound / (1.0 - task_.known.gamma);
            if (task_.reward_features) {
                max_gain_ = std::numeric_limits<double>::infinity();
            } else {
                max_gain_ = task_.margin_weight * static_cast<double>(n) * value_range;
            }
        }
        use_bounds_ = cfg_.prune && learns_reward(task_.unknown_kind) && !task_.reward_features && na > 1;
        if (use_bounds_)
            references_ = std::make_shared<const std::vector<BoundReference>>(1, solver_.reference(observed_));
    }

    /// Searches one level: subsets of `k` rows with assignments drawn from `choices`.
    void run_level(std::size_t level, std::size_t k, bool exclude_observed) {
        const std::size_t n = task_.known.n_states;
        const std::size_t na = task_.known.n_actions;
        const std::size_t radix = exclude_observed ? na - 1 : na;
        if (k > n || (k > 0 && radix == 0)) return;

        std::vector<std::size_t> combo(k);
        for (std::size_t i = 0; i < k; ++i) combo[i] = i;
        std::size_t combo_ordinal = 0;
        bool combos_left = true;
        std::mutex combo_mutex;

        auto take = [&](std::vector<std::size_t>& out, std::size_t& ordinal) {
            std::lock_guard lock(combo_mutex);
            if (!combos_left) return false;
            out = combo;
            ordinal = combo_ordinal++;
            combos_left = next_combination(combo, n);
            return true;
        };

        auto work = [&](Incumbent& local, std::size_t& enumerated, std::size_t& solved) {
            std::vector<std::size_t> rows;
            std::size_t ordinal = 0;
            std::vector<std::size_t> digits(k);
            std::vector<std::size_t> actions;
            while (take(rows, ordinal)) {
                std::fill(digits.begin(), digits.end(), 0);
                std::size_t assignment = 0;
                do {
                    actions = observed_;
                    std::size_t changed = 0;
                    for (std::size_t i = 0; i < k; ++i) {
                        const std::size_t s = rows[i];
                        std::size_t a = digits[i];
                        if (exclude_observed && a >= observed_[s]) ++a;
                        actions[s] = a;
                        if (a != observed_[s]) ++changed;
                    }
                    ++enumerated;
                    evaluate(actions, changed, {level, ordinal, assignment}, local, solved);
                    ++assignment;
                } while (next_assignment(digits, radix));
            }
        };

        const std::size_t workers = std::max<std::size_t>(1, cfg_.parallel_workers);
        std::vector<Incumbent> locals(workers);
        std::vector<std::size_t> enumerated(workers, 0), solved(workers, 0);
        std::vector<std::exception_ptr> errors(workers);
        auto guarded = [&](std::size_t w) {
            try {
                work(locals[w], enumerated[w], solved[w]);
            } catch (...) {
                errors[w] = std::current_exception();
                std::lock_guard lock(combo_mutex);
                combos_left = false;
            }
        };
        if (workers == 1) {
            guarded(0);
        } else {
            std::vector<std::thread> pool;
            for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(guarded, w);
            for (auto& t : pool) t.join();
        }
        for (const auto& e : errors)
            if (e) std::rethrow_exception(e);
        for (std::size_t w = 0; w < workers; ++w) {
            n_enumerated_ += enumerated[w];
            n_solved_ += solved[w];
            if (locals[w].valid && best_.improved_by(locals[w].score, locals[w].index)) best_ = std::move(locals[w]);
        }
    }

    const Incumbent& best() const { return best_; }
    std::size_t enumerated() const { return n_enumerated_; }
    std::size_t solved() const { return n_solved_; }
    double max_gain() const { return max_gain_; }

private:
    static constexpr std::size_t kMaxReferences = 4;

    using References = std::shared_ptr<const std::vector<BoundReference>>;

    References references() const {
        std::lock_guard lock(reference_mutex_);
        return references_;
    }

    /// Adds the multipliers of a new incumbent; the observed policy's set is always kept.
    void add_reference(const std::vector<std::size_t>& actions) {
        auto ref = solver_.reference(actions);
        std::lock_guard lock(reference_mutex_);
        auto next = std::make_shared<std::vector<BoundReference>>(*references_);
        if (next->size() >= kMaxReferences) next->erase(next->begin() + 1);
        next->push_back(std::move(ref));
        references_ = std::move(next);
    }

    void evaluate(const std::vector<std::size_t>& actions, std::size_t changed, const EnumIndex& index,
                  Incumbent& local, std::size_t& solved) {
        const double dist = std::sqrt(2.0 * static_cast<double>(changed));
        const double shared = shared_best_.load(std::memory_order_relaxed);
        // A candidate whose best possible score is strictly worse can never be the incumbent.
        if (dist - max_gain_ > shared + 1e-9) return;

        std::optional<double> required;
        References refs;
        if (use_bounds_ && std::isfinite(shared)) {
            required = dist - shared - 1e-9;
            refs = references();
        }
        FixedPolicyOutcome out = solver_.solve(actions, required, refs.get());
        if (out.pruned) return;
        ++solved;
        if (!out.feasible) return;
        const double score = dist - out.gain();
        if (local.improved_by(score, index)) {
            local.valid = true;
            local.score = score;
            local.index = index;
            local.actions = actions;
            local.outcome = std::move(out);
        }
        if (score < shared_best_.load(std::memory_order_relaxed)) {
            atomic_min(shared_best_, score);
            if (use_bounds_ && changed > 0) add_reference(actions);
        }
    }

    const FixedPolicySolver& solver_;
    const std::vector<std::size_t>& observed_;
    const SearchConfig& cfg_;
    const GirlTask& task_;
    double max_gain_ = 0.0;
    bool use_bounds_ = false;
    mutable std::mutex reference_mutex_;
    References references_;
    std::atomic<double> shared_best_{std::numeric_limits<double>::infinity()};
    Incumbent best_;
    std::size_t n_enumerated_ = 0;
    std::size_t n_solved_ = 0;
};

} // namespace detail

/**
 * Global search over policy matrices near the observed one.
 *
 * Plain mode enumerates every subset of exactly eta rows in lexicographic
 * order and every action assignment to those rows (observed actions
 * included). Incremental mode visits deviation levels k = 0..eta, each
 * listing only assignments that change all k rows, and stops once
 * sqrt(2(k+1)) minus the largest attainable gain cannot beat the incumbent.
 * Each policy's score is distance - mu * margin + lambda * ||R||_1; among
 * equal scores the later enumerated policy wins.
 */
inline GirlResult global_search(const GirlTask& task, const PolicyMatrix& observed, const SearchConfig& cfg) {
    const auto start = std::chrono::steady_clock::now();
    task.validate();
    detail::require(cfg.parallel_workers >= 1, "search needs at least one worker");
    detail::require(cfg.tol > 0.0, "search tolerance must be positive");
    const auto obs = detail::deterministic_actions(observed, task.known.n_states, task.known.n_actions);
    detail::require(cfg.eta <= task.known.n_states, "eta must not exceed the number of states");

    SubproblemOptions options;
    options.tol = cfg.tol;
    options.transition_fixed_point = cfg.transition_fixed_point;
    const FixedPolicySolver solver(task, options);
    detail::SearchRun run(solver, obs, cfg);

    if (cfg.incremental) {
        for (std::size_t k = 0; k <= cfg.eta; ++k) {
            run.run_level(k, k, true);
            if (k == cfg.eta || !run.best().valid) continue;
            const double next_bound = std::sqrt(2.0 * static_cast<double>(k + 1)) - run.max_gain();
            if (next_bound > run.best().score) break;
        }
    } else {
        run.run_level(0, cfg.eta, false);
    }

    const auto& best = run.best();
    if (!best.valid) throw NoFeasibleExplanation("no policy within the noise threshold admits a feasible explanation");

    GirlResult result;
    result.policy = PolicyMatrix::deterministic(best.actions, task.known.n_actions);
    result.estimate = best.outcome.estimate;
    result.distance = distance(result.policy, observed).frobenius;
    result.penalty = best.outcome.penalty;
    result.margin = best.outcome.margin;
    result.score = best.score;
    result.n_subproblems = run.enumerated();
    result.n_solved = run.solved();
    result.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

} // namespace girl
