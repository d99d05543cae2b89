#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <type_traits>
#include <fstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "girl/envs.hpp"
#include "girl/girl.hpp"
#include "girl/io.hpp"
#include "girl/mdp.hpp"
#include "girl/policy.hpp"
#include "girl/search.hpp"

namespace girl::lab {

using nlohmann::json;

/// Noise threshold per run: the injected noise count, or a fixed value.
struct EtaPolicy {
    bool match_noise = true;
    std::size_t fixed = 0;

    std::size_t for_noise(std::size_t n_noisy) const { return match_noise ? n_noisy : fixed; }
    std::string describe() const { return match_noise ? "match-noise" : std::to_string(fixed); }
};

struct ExperimentConfig {
    std::string experiment = "table3";
    std::uint64_t seed = 7;
    std::size_t workers = 1;
    std::string out_dir = "girl-out";
    /// Unset values fall back to per-experiment defaults.
    std::optional<double> mu;
    std::optional<double> lambda;
    std::optional<double> reward_bound;
    std::optional<EtaPolicy> eta;
    std::vector<std::size_t> noise_levels{0, 1, 2, 3, 4};
    std::vector<std::string> tasks{"reward", "transition", "state", "action", "reward+action"};
    double tol = 1e-8;
    bool incremental = true;

    envs::DiscreteGridSpec grid;
    /// Blocked cell of the state task; its left neighbour is the decoy candidate.
    std::size_t blocked_cell = 12;

    std::vector<std::size_t> divisions{10, 20, 30};
    std::size_t n_samples = 1000;
    /// 0 selects the feature-lattice spacing.
    double bandwidth = 0.0;

    /// Single-run inputs (the raw JSON config).
    json single;
};

inline void validate(const ExperimentConfig& c) {
    girl::detail::require(c.experiment == "table3" || c.experiment == "table4" || c.experiment == "single",
                    "experiment must be one of table3, table4, single");
    girl::detail::require(c.workers >= 1, "workers must be at least 1");
    girl::detail::require(!c.mu || *c.mu >= 0.0, "mu must be nonnegative");
    girl::detail::require(!c.lambda || *c.lambda >= 0.0, "lambda must be nonnegative");
    girl::detail::require(!c.reward_bound || *c.reward_bound > 0.0, "reward_bound must be positive");
    girl::detail::require(c.tol > 0.0, "tol must be positive");
    girl::detail::require(c.n_samples >= 1, "n_samples must be at least 1");
    girl::detail::require(c.bandwidth >= 0.0, "bandwidth must be nonnegative");
    for (const auto& t : c.tasks)
        girl::detail::require(t == "reward" || t == "transition" || t == "state" || t == "action" || t == "reward+action",
                        "unknown task '" + t + "' in tasks");
    for (std::size_t d : c.divisions) girl::detail::require(d >= 2 && d % 2 == 0, "divisions must be even and at least 2");
}

namespace detail {

inline EtaPolicy eta_from_json(const json& v) {
    if (v.is_string()) {
        if (v.get<std::string>() == "match-noise") return {};
        throw ValidationError("config field 'eta' must be \"match-noise\" or a nonnegative integer");
    }
    if (!v.is_number_integer() || v.get<long long>() < 0)
        throw ValidationError("config field 'eta' must be \"match-noise\" or a nonnegative integer");
    return {false, v.get<std::size_t>()};
}

} // namespace detail

inline EtaPolicy parse_eta(const std::string& text) {
    if (text == "match-noise") return {};
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
        v = std::stoull(text, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos == 0 || pos != text.size() || text.front() == '-')
        throw ValidationError("--eta must be \"match-noise\" or a nonnegative integer");
    return {false, static_cast<std::size_t>(v)};
}

/**
 * Applies a JSON config object on top of `c`. Recognised keys: experiment,
 * seed, workers, out_dir, mu, lambda, reward_bound, eta, noise_levels, tasks,
 * tol, incremental, blocked_cell, divisions, n_samples, bandwidth. Single-run
 * keys (task, observed_policy, observed_policy_text, builtin, search) are kept
 * verbatim.
 */
inline void apply_config(ExperimentConfig& c, const json& j) {
    if (!j.is_object()) throw ValidationError("config must be a JSON object");
    auto typed = [&](const char* key, auto& out) {
        using T = std::remove_reference_t<decltype(out)>;
        try {
            out = j.at(key).get<T>();
        } catch (const json::exception&) {
            throw ValidationError(std::string("config field '") + key + "' has the wrong type");
        }
    };
    for (const auto& [key, value] : j.items()) {
        if (key == "experiment") typed("experiment", c.experiment);
        else if (key == "seed") typed("seed", c.seed);
        else if (key == "workers") typed("workers", c.workers);
        else if (key == "out_dir") typed("out_dir", c.out_dir);
        else if (key == "mu") { double v; typed("mu", v); c.mu = v; }
        else if (key == "lambda") { double v; typed("lambda", v); c.lambda = v; }
        else if (key == "reward_bound") { double v; typed("reward_bound", v); c.reward_bound = v; }
        else if (key == "eta") c.eta = detail::eta_from_json(value);
        else if (key == "noise_levels") typed("noise_levels", c.noise_levels);
        else if (key == "tasks") typed("tasks", c.tasks);
        else if (key == "tol") typed("tol", c.tol);
        else if (key == "incremental") typed("incremental", c.incremental);
        else if (key == "blocked_cell") typed("blocked_cell", c.blocked_cell);
        else if (key == "divisions") typed("divisions", c.divisions);
        else if (key == "n_samples") typed("n_samples", c.n_samples);
        else if (key == "bandwidth") typed("bandwidth", c.bandwidth);
        else if (key == "task" || key == "observed_policy" || key == "observed_policy_text" || key == "builtin" ||
                 key == "search")
            c.single[key] = value;
        else throw ValidationError("unknown config field '" + key + "'");
    }
    validate(c);
}

/// Defaults of the table3 experiment: mu = 1, lambda = 4 mu, R_max = 1.
inline constexpr double kTable3PenaltyRatio = 4.0;

struct ReportRow {
    std::string task;
    std::size_t n_noisy = 0;
    std::size_t eta = 0;
    bool ok = false;
    double criterion1 = 0.0;
    bool criterion2 = false;
    double distance = 0.0;
    double margin = 0.0;
    double penalty = 0.0;
    double score = 0.0;
    std::size_t n_subproblems = 0;
    std::size_t n_solved = 0;
    double elapsed_seconds = 0.0;
    std::string selected;
    std::string message;
};

struct ExperimentReport {
    std::string experiment;
    std::vector<ReportRow> rows;
    json config;
    json manifest;
};

/// Column order of report.csv.
inline const char* const kReportHeader =
    "task,n_noisy,eta,status,criterion1,criterion2,distance,margin,penalty,score,n_subproblems,selected";

namespace detail {

inline std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

inline std::string cell_label(const envs::GridGeometry& g, std::size_t s) {
    return "cell " + std::to_string(s) + " (row " + std::to_string(g.row_of(s)) + ", col " +
           std::to_string(g.col_of(s)) + ")";
}

} // namespace detail

inline std::string report_csv(const ExperimentReport& report) {
    std::ostringstream out;
    out << kReportHeader << '\n';
    for (const auto& r : report.rows) {
        out << detail::csv_escape(r.task) << ',' << r.n_noisy << ',' << r.eta << ',' << (r.ok ? "ok" : "failed") << ',';
        if (r.ok) {
            out << detail::fmt(r.criterion1) << ',' << (r.criterion2 ? "pass" : "fail") << ',' << detail::fmt(r.distance)
                << ',' << detail::fmt(r.margin) << ',' << detail::fmt(r.penalty) << ',' << detail::fmt(r.score);
        } else {
            out << ",fail,,,,";
        }
        out << ',' << r.n_subproblems << ',' << detail::csv_escape(r.selected) << '\n';
    }
    return out.str();
}

inline json report_json(const ExperimentReport& report) {
    json rows = json::array();
    for (const auto& r : report.rows) {
        json j = {{"task", r.task},
                  {"n_noisy", r.n_noisy},
                  {"eta", r.eta},
                  {"status", r.ok ? "ok" : "failed"},
                  {"criterion2", r.criterion2},
                  {"n_subproblems", r.n_subproblems},
                  {"n_solved", r.n_solved},
                  {"elapsed_seconds", r.elapsed_seconds}};
        if (r.ok) {
            j["criterion1"] = r.criterion1;
            j["distance"] = r.distance;
            j["margin"] = r.margin;
            j["penalty"] = r.penalty;
            j["score"] = r.score;
        }
        if (!r.selected.empty()) j["selected"] = r.selected;
        if (!r.message.empty()) j["message"] = r.message;
        rows.push_back(std::move(j));
    }
    return {{"experiment", report.experiment},
            {"rows", std::move(rows)},
            {"config", report.config},
            {"manifest", "manifest.json"}};
}

/// Writes a rows x cols CSV of a grid vector, first line = top grid row.
inline std::string heatmap_csv(const Vector& values, const envs::GridGeometry& grid) {
    girl::detail::require_shape(static_cast<std::size_t>(values.size()) == grid.n_cells(),
                          "heat-map vector length must equal the number of grid cells");
    std::ostringstream out;
    for (std::size_t r = grid.rows; r-- > 0;) {
        for (std::size_t c = 0; c < grid.cols; ++c) {
            if (c) out << ',';
            out << detail::fmt(values(static_cast<Eigen::Index>(grid.index(r, c))));
        }
        out << '\n';
    }
    return out.str();
}

inline void export_heatmap(const Vector& values, const envs::GridGeometry& grid, const std::string& path) {
    io::write_text_file(path, heatmap_csv(values, grid));
}

inline json to_json(const envs::DiscreteGridSpec& s) {
    return {{"kind", "discrete"},
            {"side", s.side},
            {"noise_prob", s.noise_prob},
            {"blocked", std::vector<std::size_t>(s.blocked.begin(), s.blocked.end())},
            {"absorbing", s.absorbing_cell()},
            {"start", s.start},
            {"goal_reward", s.goal_reward},
            {"gamma", s.gamma}};
}

inline json to_json(const envs::ContinuousGridSpec& s) {
    return {{"kind", "continuous"},
            {"divisions", s.divisions},
            {"step", s.step},
            {"noise_half_width", s.noise_half_width},
            {"n_samples", s.n_samples},
            {"seed", s.seed},
            {"sample_origin", "cell-center"},
            {"rng", "mt19937_64 per (cell, action), seeded splitmix64(seed ^ splitmix64(cell * 4 + action))"},
            {"reward_region",
             {s.reward_region.x_min, s.reward_region.x_max, s.reward_region.y_min, s.reward_region.y_max}},
            {"gamma", s.gamma}};
}

inline json config_echo(const ExperimentConfig& c, double mu, double lambda, double rmax, const EtaPolicy& eta) {
    return {{"experiment", c.experiment},
            {"seed", c.seed},
            {"workers", c.workers},
            {"mu", mu},
            {"lambda", lambda},
            {"reward_bound", rmax},
            {"eta", eta.describe()},
            {"tol", c.tol},
            {"incremental", c.incremental},
            {"noise_levels", c.noise_levels}};
}

namespace detail {

inline void ensure_dir(const std::string& dir) { std::filesystem::create_directories(dir); }

inline std::string path_in(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

inline SearchConfig search_config(const ExperimentConfig& c, std::size_t eta) {
    SearchConfig s;
    s.eta = eta;
    s.incremental = c.incremental;
    s.parallel_workers = c.workers;
    s.tol = c.tol;
    return s;
}

/// Runs one search and fills the shared report columns; failures become failed rows.
inline ReportRow run_cell(const std::string& task_name, std::size_t n_noisy, std::size_t eta, const GirlTask& task,
                          const PolicyMatrix& observed, const SearchConfig& cfg, const TabularMdp& truth,
                          const std::function<void(const GirlResult&, ReportRow&)>& score) {
    ReportRow row;
    row.task = task_name;
    row.n_noisy = n_noisy;
    row.eta = eta;
    try {
        const auto res = global_search(task, observed, cfg);
        row.ok = true;
        row.distance = res.distance;
        row.margin = res.margin;
        row.penalty = res.penalty;
        row.score = res.score;
        row.n_subproblems = res.n_subproblems;
        row.n_solved = res.n_solved;
        row.elapsed_seconds = res.elapsed_seconds;
        row.criterion2 = criterion2(truth, res.policy, cfg.tol);
        score(res, row);
    } catch (const Error& e) {
        row.ok = false;
        row.message = e.what();
    }
    return row;
}

} // namespace detail

/// The five discrete learning tasks, ready to search.
struct Table3Setup {
    envs::DiscreteGridSpec spec;
    TabularMdp mdp;
    envs::DiscreteGridSpec blocked_spec;
    TabularMdp blocked_mdp;
    std::size_t decoy_cell = 0;
    double mu = 1.0, lambda = kTable3PenaltyRatio, rmax = 1.0;
};

inline Table3Setup table3_setup(const ExperimentConfig& c) {
    auto blocked = c.grid;
    blocked.blocked = {c.blocked_cell};
    girl::detail::require(c.blocked_cell % c.grid.side != 0, "the blocked cell needs a left neighbour");
    Table3Setup s{c.grid, envs::make_discrete_grid(c.grid), blocked, envs::make_discrete_grid(blocked),
                  c.blocked_cell - 1};
    s.mu = c.mu.value_or(1.0);
    s.lambda = c.lambda.value_or(kTable3PenaltyRatio * s.mu);
    s.rmax = c.reward_bound.value_or(1.0);
    return s;
}

/// Index of the hidden compass action in the action tasks and its diagonal rival.
inline constexpr std::size_t kHiddenAction = envs::Right;

inline GirlTask table3_task(const Table3Setup& s, const std::string& name) {
    GirlTask t;
    t.reward_bound = s.rmax;
    t.margin_weight = s.mu;
    t.penalty_weight = s.lambda;
    if (name == "state") {
        t.known = PartialMdp::from(s.blocked_mdp);
        t.unknown_kind = UnknownKind::State;
        for (auto& p : t.known.transitions) p.reset();
        auto decoy = s.blocked_spec;
        decoy.blocked = {s.decoy_cell};
        t.state_candidates = {envs::make_discrete_grid(decoy).transitions(), s.blocked_mdp.transitions()};
        const auto g = s.spec.geometry();
        t.candidate_labels = {detail::cell_label(g, s.decoy_cell), detail::cell_label(g, *s.blocked_spec.blocked.begin())};
        return t;
    }
    t.known = PartialMdp::from(s.mdp);
    if (name == "reward") {
        t.unknown_kind = UnknownKind::Reward;
        t.known.reward.reset();
    } else if (name == "transition") {
        t.unknown_kind = UnknownKind::TransitionRows;
        // First two entries of the right-move row of the second state.
        t.unknown_transition_entries = {{envs::Right, 1, 0}, {envs::Right, 1, 1}};
    } else if (name == "action" || name == "reward+action") {
        t.unknown_kind = name == "action" ? UnknownKind::Action : UnknownKind::RewardPlusAction;
        if (t.unknown_kind == UnknownKind::RewardPlusAction) t.known.reward.reset();
        t.hidden_action = kHiddenAction;
        t.known.transitions[kHiddenAction].reset();
        t.action_candidates = {s.mdp.transition(kHiddenAction), envs::make_diag_action_matrix(s.spec)};
        t.candidate_labels = {"right", "up-right"};
    } else {
        throw ValidationError("unknown table3 task '" + name + "'");
    }
    return t;
}

/// Truth-relative criterion1 for a table3 task result.
inline double table3_criterion1(const Table3Setup& s, const std::string& name, const GirlTask& task,
                                const GirlResult& r) {
    const double n = static_cast<double>(s.mdp.n_states());
    auto reward_error = [&] {
        return criterion1({CriterionKind::Reward, n}, CriterionValue{s.mdp.reward()}, CriterionValue{*r.estimate.reward});
    };
    auto candidate_error = [&](CriterionKind kind, double normalizer, std::size_t truth) {
        const std::size_t universe = task.n_candidates();
        return criterion1({kind, normalizer}, CriterionValue{membership_of(truth, universe)},
                          CriterionValue{membership_of(*r.estimate.candidate, universe)});
    };
    if (name == "reward") return reward_error();
    if (name == "transition") {
        Matrix est = s.mdp.transition(envs::Right);
        for (std::size_t i = 0; i < task.unknown_transition_entries.size(); ++i) {
            const auto& e = task.unknown_transition_entries[i];
            est(static_cast<Eigen::Index>(e.state), static_cast<Eigen::Index>(e.column)) = (*r.estimate.transition_entries)[i];
        }
        return criterion1({CriterionKind::Transition, n * n}, CriterionValue{s.mdp.transition(envs::Right)},
                          CriterionValue{est});
    }
    if (name == "state") return candidate_error(CriterionKind::State, n, 1);
    const double na = static_cast<double>(s.mdp.n_actions());
    if (name == "action") return candidate_error(CriterionKind::Action, na, 0);
    return reward_error() + candidate_error(CriterionKind::Action, na, 0);
}

/**
 * Five discrete tasks x noise levels. Noisy observed policies force the down
 * action in the first n states of the task's true optimal policy.
 */
inline ExperimentReport run_table3(const ExperimentConfig& c,
                                   const std::function<void(const std::string&, const Vector&,
                                                            const envs::GridGeometry&)>& heatmap_sink = {}) {
    const auto setup = table3_setup(c);
    const EtaPolicy eta = c.eta.value_or(EtaPolicy{});
    ExperimentReport report;
    report.experiment = "table3";
    report.config = config_echo(c, setup.mu, setup.lambda, setup.rmax, eta);
    report.config["tasks"] = c.tasks;
    report.config["blocked_cell"] = c.blocked_cell;
    report.config["decoy_cell"] = setup.decoy_cell;
    report.manifest = {{"seed", c.seed},
                       {"environments", {{"grid", to_json(setup.spec)}, {"blocked_grid", to_json(setup.blocked_spec)}}},
                       {"mdp", "mdp.json"}};

    const auto geometry = setup.spec.geometry();
    if (heatmap_sink) heatmap_sink("table3_true", setup.mdp.reward(), geometry);
    const auto optimal = solve_optimal_policy(setup.mdp, c.tol);
    const auto blocked_optimal = solve_optimal_policy(setup.blocked_mdp, c.tol);
    for (const auto& name : c.tasks) {
        const GirlTask task = table3_task(setup, name);
        const bool blocked = name == "state";
        const TabularMdp& truth = blocked ? setup.blocked_mdp : setup.mdp;
        const PolicyMatrix& opt = blocked ? blocked_optimal : optimal;
        for (std::size_t n : c.noise_levels) {
            const auto observed = envs::make_noisy_policy(opt, n);
            const std::size_t e = std::min(eta.for_noise(n), truth.n_states());
            auto cfg = detail::search_config(c, e);
            cfg.transition_fixed_point = name == "transition";
            report.rows.push_back(detail::run_cell(name, n, e, task, observed, cfg, truth,
                                                   [&](const GirlResult& r, ReportRow& row) {
                                                       row.criterion1 = table3_criterion1(setup, name, task, r);
                                                       if (r.estimate.candidate && !task.candidate_labels.empty())
                                                           row.selected = task.candidate_labels[*r.estimate.candidate];
                                                       if (heatmap_sink && learns_reward(task.unknown_kind))
                                                           heatmap_sink("table3_" + name + "_noise" + std::to_string(n) +
                                                                            "_estimated",
                                                                        *r.estimate.reward, geometry);
                                                   }));
        }
    }
    return report;
}

/// Defaults of the table4 experiment: mu = 1, lambda = mu, R_max = 1, eta fixed at 0.
inline constexpr double kTable4PenaltyRatio = 1.0;

/// Continuous-world reward recovery per discretization and noise level.
inline ExperimentReport run_table4(const ExperimentConfig& c,
                                   const std::function<void(const std::string&, const Vector&,
                                                            const envs::GridGeometry&)>& heatmap_sink = {}) {
    const EtaPolicy eta = c.eta.value_or(EtaPolicy{false, 0});
    const double mu = c.mu.value_or(1.0);
    const double lambda = c.lambda.value_or(kTable4PenaltyRatio * mu);
    const double rmax = c.reward_bound.value_or(1.0);
    ExperimentReport report;
    report.experiment = "table4";
    report.config = config_echo(c, mu, lambda, rmax, eta);
    report.config["divisions"] = c.divisions;
    report.config["n_samples"] = c.n_samples;
    report.config["bandwidth"] = c.bandwidth > 0.0 ? json(c.bandwidth) : json("lattice spacing");
    json envs_json = json::array();

    for (std::size_t d : c.divisions) {
        envs::ContinuousGridSpec spec;
        spec.divisions = d;
        spec.n_samples = c.n_samples;
        spec.seed = c.seed;
        envs_json.push_back(to_json(spec));
        const auto mdp = envs::discretize_continuous_grid(spec);
        auto fspec = envs::default_features_for(d);
        fspec.bandwidth = c.bandwidth;
        const Matrix phi = envs::gaussian_features(spec.geometry(), fspec);
        const auto optimal = solve_optimal_policy(mdp, c.tol);
        const std::string tag = std::to_string(d) + "x" + std::to_string(d);
        if (heatmap_sink) heatmap_sink("table4_" + tag + "_true", mdp.reward(), spec.geometry());

        GirlTask task;
        task.known = PartialMdp::from(mdp);
        task.known.reward.reset();
        task.unknown_kind = UnknownKind::Reward;
        task.reward_features = phi;
        task.reward_bound = rmax;
        task.margin_weight = mu;
        task.penalty_weight = lambda;
        for (std::size_t n : c.noise_levels) {
            const auto observed = envs::make_noisy_policy(optimal, n);
            const std::size_t e = std::min(eta.for_noise(n), mdp.n_states());
            const auto cfg = detail::search_config(c, e);
            report.rows.push_back(detail::run_cell(
                tag, n, e, task, observed, cfg, mdp, [&](const GirlResult& r, ReportRow& row) {
                    const double ns = static_cast<double>(mdp.n_states());
                    row.criterion1 = criterion1({CriterionKind::Reward, ns}, CriterionValue{mdp.reward()},
                                                CriterionValue{*r.estimate.reward});
                    if (heatmap_sink)
                        heatmap_sink("table4_" + tag + "_noise" + std::to_string(n) + "_estimated", *r.estimate.reward,
                                     spec.geometry());
                }));
        }
    }
    report.manifest = {{"seed", c.seed}, {"environments", envs_json}};
    return report;
}

/// Outcome of a single configured search.
struct SingleRun {
    GirlTask task;
    PolicyMatrix observed;
    SearchConfig search;
    GirlResult result;
    json config;
    std::optional<TabularMdp> truth;
};

/**
 * Runs one search from a JSON config. Either
 *   {"task": <task>, "observed_policy": <policy> | "observed_policy_text": "<path>", ...}
 * or a built-in discrete task
 *   {"builtin": {"task": "state", "n_noisy": 2}, ...}.
 * Optional "search": {"eta", "incremental", "tol"}; "mu"/"lambda"/"eta" flags override.
 */
inline SingleRun run_single(const ExperimentConfig& c) {
    const json& j = c.single;
    if (!j.is_object()) throw ValidationError("single-run config must be a JSON object");
    SingleRun run;
    std::optional<std::size_t> n_noisy;
    if (j.contains("builtin")) {
        const auto& b = j.at("builtin");
        const auto name = io::detail::get<std::string>(b, "task");
        n_noisy = io::detail::get_or<std::size_t>(b, "n_noisy", 0);
        const auto setup = table3_setup(c);
        run.task = table3_task(setup, name);
        const bool blocked = name == "state";
        run.truth = blocked ? setup.blocked_mdp : setup.mdp;
        run.observed = envs::make_noisy_policy(solve_optimal_policy(*run.truth, c.tol), *n_noisy);
    } else {
        run.task = io::task_from_json(io::detail::field(j, "task"));
        if (j.contains("observed_policy")) {
            run.observed = io::policy_from_json(j.at("observed_policy"));
        } else {
            const auto path = io::detail::get<std::string>(j, "observed_policy_text");
            std::ifstream in(path);
            if (!in) throw ValidationError("cannot open observed_policy_text '" + path + "'");
            run.observed = io::policy_from_text(in, run.task.known.n_actions);
        }
        if (c.mu) run.task.margin_weight = *c.mu;
        if (c.lambda) run.task.penalty_weight = *c.lambda;
    }
    const json search = j.value("search", json::object());
    std::size_t eta = io::detail::get_or<std::size_t>(search, "eta", n_noisy.value_or(0));
    if (c.eta) eta = c.eta->for_noise(n_noisy.value_or(eta));
    run.search = detail::search_config(c, eta);
    run.search.incremental = io::detail::get_or(search, "incremental", c.incremental);
    run.search.tol = io::detail::get_or(search, "tol", c.tol);
    run.search.transition_fixed_point = io::detail::get_or(search, "transition_fixed_point",
                                                           run.task.unknown_kind == UnknownKind::TransitionRows);
    run.config = io::to_json(run.search);
    run.config["mu"] = run.task.margin_weight;
    run.config["lambda"] = run.task.penalty_weight;
    run.config["reward_bound"] = run.task.reward_bound;
    run.config["seed"] = c.seed;
    run.result = global_search(run.task, run.observed, run.search);
    return run;
}

inline std::string single_summary(const SingleRun& run) {
    std::ostringstream out;
    const auto& r = run.result;
    out << "task: " << to_string(run.task.unknown_kind) << '\n';
    out << "eta: " << run.search.eta << '\n';
    out << "distance: " << detail::fmt(r.distance) << '\n';
    out << "changed states: " << distance(r.policy, run.observed).hamming_rows << '\n';
    out << "score: " << detail::fmt(r.score) << '\n';
    out << "margin: " << detail::fmt(r.margin) << '\n';
    out << "penalty: " << detail::fmt(r.penalty) << '\n';
    if (r.estimate.candidate) {
        out << "selected candidate: " << *r.estimate.candidate;
        if (*r.estimate.candidate < run.task.candidate_labels.size())
            out << " (" << run.task.candidate_labels[*r.estimate.candidate] << ')';
        out << '\n';
    }
    if (r.estimate.transition_entries) {
        out << "transition entries:";
        for (double x : *r.estimate.transition_entries) out << ' ' << detail::fmt(x);
        out << '\n';
    }
    if (run.truth) out << "recovered policy optimal: " << (criterion2(*run.truth, r.policy, run.search.tol) ? "yes" : "no") << '\n';
    out << "policy matrices enumerated: " << r.n_subproblems << '\n';
    return out.str();
}

/// Writes report.csv, report.json and manifest.json into the output directory.
inline void write_report(const ExperimentReport& report, const std::string& out_dir) {
    detail::ensure_dir(out_dir);
    io::write_text_file(detail::path_in(out_dir, "report.csv"), report_csv(report));
    io::write_json_file(detail::path_in(out_dir, "report.json"), report_json(report));
    io::write_json_file(detail::path_in(out_dir, "manifest.json"), report.manifest);
}

} // namespace girl::lab
