#pragma once

#include <cstddef>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "girl/girl.hpp"
#include "girl/mdp.hpp"
#include "girl/search.hpp"
#include "girl/types.hpp"

namespace girl::io {

using nlohmann::json;

namespace detail {

using girl::detail::require;

/// Field lookup that names the offending key on failure.
inline const json& field(const json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) throw ValidationError(std::string("missing field '") + key + "'");
    return j.at(key);
}

template <class T>
T get(const json& j, const char* key) {
    try {
        return field(j, key).get<T>();
    } catch (const json::exception&) {
        throw ValidationError(std::string("field '") + key + "' has the wrong type");
    }
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return fallback;
    return get<T>(j, key);
}

inline json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Matrix matrix_from_json(const json& j, const std::string& name) {
    if (!j.is_array()) throw ValidationError("field '" + name + "' must be an array of rows");
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = rows ? static_cast<Eigen::Index>(j.front().size()) : 0;
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto& row = j[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
            throw ShapeError("field '" + name + "' has ragged rows");
        for (Eigen::Index c = 0; c < cols; ++c) {
            const auto& v = row[static_cast<std::size_t>(c)];
            if (!v.is_number()) throw ValidationError("field '" + name + "' must contain numbers");
            m(r, c) = v.get<double>();
        }
    }
    return m;
}

inline json vector_to_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

inline Vector vector_from_json(const json& j, const std::string& name) {
    if (!j.is_array()) throw ValidationError("field '" + name + "' must be an array");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw ValidationError("field '" + name + "' must contain numbers");
        v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    }
    return v;
}

} // namespace detail

// ---------------------------------------------------------------------------
// TabularMdp
// ---------------------------------------------------------------------------

/// {"n_states", "n_actions", "gamma", "reward", "transitions"} with transitions action-major.
inline json to_json(const TabularMdp& mdp) {
    json t = json::array();
    for (const auto& p : mdp.transitions()) t.push_back(detail::matrix_to_json(p));
    return {{"n_states", mdp.n_states()},
            {"n_actions", mdp.n_actions()},
            {"gamma", mdp.gamma()},
            {"reward", detail::vector_to_json(mdp.reward())},
            {"transitions", std::move(t)}};
}

inline TabularMdp mdp_from_json(const json& j) {
    const auto n = detail::get<std::size_t>(j, "n_states");
    const auto na = detail::get<std::size_t>(j, "n_actions");
    const auto gamma = detail::get<double>(j, "gamma");
    Vector reward = detail::vector_from_json(detail::field(j, "reward"), "reward");
    const auto& tj = detail::field(j, "transitions");
    if (!tj.is_array() || tj.size() != na) throw ShapeError("field 'transitions' must hold n_actions matrices");
    std::vector<Matrix> ts;
    for (std::size_t a = 0; a < na; ++a) ts.push_back(detail::matrix_from_json(tj[a], "transitions"));
    if (static_cast<std::size_t>(reward.size()) != n) throw ShapeError("field 'reward' must have n_states entries");
    return TabularMdp(std::move(ts), std::move(reward), gamma);
}

// ---------------------------------------------------------------------------
// PolicyMatrix
// ---------------------------------------------------------------------------

inline json to_json(const PolicyMatrix& pi) {
    return {{"n_states", pi.n_states()}, {"n_actions", pi.n_actions()}, {"rows", detail::matrix_to_json(pi.entries())}};
}

inline PolicyMatrix policy_from_json(const json& j) {
    const auto n = detail::get<std::size_t>(j, "n_states");
    const auto na = detail::get<std::size_t>(j, "n_actions");
    Matrix m = detail::matrix_from_json(detail::field(j, "rows"), "rows");
    if (static_cast<std::size_t>(m.rows()) != n || static_cast<std::size_t>(m.cols()) != na)
        throw ShapeError("field 'rows' must be n_states x n_actions");
    return PolicyMatrix(std::move(m));
}

/// Deterministic policy from text: one action index per line, blank lines and '#' comments ignored.
inline PolicyMatrix policy_from_text(std::istream& in, std::size_t n_actions) {
    std::vector<std::size_t> actions;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        ls.imbue(std::locale::classic());
        long long a = 0;
        if (!(ls >> a)) {
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            throw ValidationError("policy line " + std::to_string(line_no) + " is not an action index");
        }
        std::string rest;
        if (ls >> rest) throw ValidationError("policy line " + std::to_string(line_no) + " has trailing text");
        if (a < 0 || static_cast<std::size_t>(a) >= n_actions)
            throw ValidationError("policy line " + std::to_string(line_no) + " has an action out of range");
        actions.push_back(static_cast<std::size_t>(a));
    }
    return PolicyMatrix::deterministic(actions, n_actions);
}

inline void policy_to_text(const PolicyMatrix& pi, std::ostream& out) {
    for (auto a : pi.actions()) out << a << '\n';
}

// ---------------------------------------------------------------------------
// GirlTask
// ---------------------------------------------------------------------------

inline json to_json(const GirlTask& task) {
    const auto& k = task.known;
    json transitions = json::array();
    for (const auto& t : k.transitions) transitions.push_back(t ? detail::matrix_to_json(*t) : json(nullptr));
    json j = {{"kind", to_string(task.unknown_kind)},
              {"n_states", k.n_states},
              {"n_actions", k.n_actions},
              {"gamma", k.gamma},
              {"reward", k.reward ? detail::vector_to_json(*k.reward) : json(nullptr)},
              {"transitions", std::move(transitions)},
              {"reward_bound", task.reward_bound},
              {"penalty_weight", task.penalty_weight},
              {"margin_weight", task.margin_weight}};
    if (!task.unknown_transition_entries.empty()) {
        json e = json::array();
        for (const auto& u : task.unknown_transition_entries)
            e.push_back({{"action", u.action}, {"state", u.state}, {"column", u.column}});
        j["unknown_transition_entries"] = std::move(e);
    }
    if (!task.action_candidates.empty()) {
        j["hidden_action"] = task.hidden_action;
        json c = json::array();
        for (const auto& m : task.action_candidates) c.push_back(detail::matrix_to_json(m));
        j["action_candidates"] = std::move(c);
    }
    if (!task.state_candidates.empty()) {
        json c = json::array();
        for (const auto& set : task.state_candidates) {
            json s = json::array();
            for (const auto& m : set) s.push_back(detail::matrix_to_json(m));
            c.push_back(std::move(s));
        }
        j["state_candidates"] = std::move(c);
    }
    if (!task.candidate_labels.empty()) j["candidate_labels"] = task.candidate_labels;
    if (task.reward_features) j["reward_features"] = detail::matrix_to_json(*task.reward_features);
    return j;
}

inline GirlTask task_from_json(const json& j) {
    GirlTask task;
    task.unknown_kind = unknown_kind_from_string(detail::get<std::string>(j, "kind"));
    auto& k = task.known;
    k.n_states = detail::get<std::size_t>(j, "n_states");
    k.n_actions = detail::get<std::size_t>(j, "n_actions");
    k.gamma = detail::get<double>(j, "gamma");
    if (j.contains("reward") && !j.at("reward").is_null()) k.reward = detail::vector_from_json(j.at("reward"), "reward");
    const auto& tj = detail::field(j, "transitions");
    if (!tj.is_array()) throw ValidationError("field 'transitions' must be an array");
    for (const auto& t : tj) {
        if (t.is_null())
            k.transitions.emplace_back();
        else
            k.transitions.emplace_back(detail::matrix_from_json(t, "transitions"));
    }
    task.reward_bound = detail::get_or(j, "reward_bound", task.reward_bound);
    task.margin_weight = detail::get_or(j, "margin_weight", task.margin_weight);
    task.penalty_weight =
        detail::get_or(j, "penalty_weight", GirlTask::default_penalty_weight(task.margin_weight, k.n_states));
    if (j.contains("unknown_transition_entries")) {
        for (const auto& e : j.at("unknown_transition_entries"))
            task.unknown_transition_entries.push_back({detail::get<std::size_t>(e, "action"),
                                                       detail::get<std::size_t>(e, "state"),
                                                       detail::get<std::size_t>(e, "column")});
    }
    task.hidden_action = detail::get_or<std::size_t>(j, "hidden_action", 0);
    if (j.contains("action_candidates"))
        for (const auto& m : j.at("action_candidates"))
            task.action_candidates.push_back(detail::matrix_from_json(m, "action_candidates"));
    if (j.contains("state_candidates")) {
        for (const auto& set : j.at("state_candidates")) {
            std::vector<Matrix> ms;
            for (const auto& m : set) ms.push_back(detail::matrix_from_json(m, "state_candidates"));
            task.state_candidates.push_back(std::move(ms));
        }
    }
    task.candidate_labels = detail::get_or(j, "candidate_labels", std::vector<std::string>{});
    if (j.contains("reward_features") && !j.at("reward_features").is_null())
        task.reward_features = detail::matrix_from_json(j.at("reward_features"), "reward_features");
    task.validate();
    return task;
}

// ---------------------------------------------------------------------------
// GirlResult
// ---------------------------------------------------------------------------

inline json to_json(const Estimate& e, const GirlTask* task = nullptr) {
    json j = json::object();
    if (e.reward) j["reward"] = detail::vector_to_json(*e.reward);
    if (e.theta) j["theta"] = detail::vector_to_json(*e.theta);
    if (e.transition_entries) {
        json entries = json::array();
        for (std::size_t i = 0; i < e.transition_entries->size(); ++i) {
            json entry = {{"value", (*e.transition_entries)[i]}};
            if (task && i < task->unknown_transition_entries.size()) {
                const auto& u = task->unknown_transition_entries[i];
                entry["action"] = u.action;
                entry["state"] = u.state;
                entry["column"] = u.column;
            }
            entries.push_back(std::move(entry));
        }
        j["transition_entries"] = std::move(entries);
    }
    if (e.candidate) {
        j["candidate"] = *e.candidate;
        if (task && *e.candidate < task->candidate_labels.size())
            j["candidate_label"] = task->candidate_labels[*e.candidate];
    }
    return j;
}

/// Result document; `config` echoes the settings (mu, lambda, eta, tol, seed, ...).
inline json to_json(const GirlResult& r, const json& config, const GirlTask* task = nullptr) {
    return {{"policy", to_json(r.policy)},
            {"estimate", to_json(r.estimate, task)},
            {"distance", r.distance},
            {"penalty", r.penalty},
            {"margin", r.margin},
            {"score", r.score},
            {"n_subproblems", r.n_subproblems},
            {"n_solved", r.n_solved},
            {"elapsed_seconds", r.elapsed_seconds},
            {"config", config}};
}

inline json to_json(const SearchConfig& cfg) {
    return {{"eta", cfg.eta},
            {"incremental", cfg.incremental},
            {"parallel_workers", cfg.parallel_workers},
            {"tol", cfg.tol},
            {"prune", cfg.prune},
            {"transition_fixed_point", cfg.transition_fixed_point}};
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError("'" + path + "' is not valid JSON: " + e.what());
    }
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path + "'");
    out << text;
    if (!out) throw Error("failed writing '" + path + "'");
}

inline void write_json_file(const std::string& path, const json& j) { write_text_file(path, j.dump(2) + "\n"); }

} // namespace girl::io
