// girl-lab: experiment harness for generalized inverse reinforcement learning.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "girl/experiments.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitSolver = 1;
constexpr int kExitUsage = 2;

struct Flags {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> workers;
    std::optional<std::string> out_dir;
    std::optional<double> mu;
    std::optional<double> lambda;
    std::optional<std::string> eta;
    std::string config;
};

void add_common(CLI::App* app, Flags& f) {
    app->add_option("--seed", f.seed, "Top-level random seed");
    app->add_option("--workers", f.workers, "Search worker threads")->check(CLI::PositiveNumber);
    app->add_option("--out-dir", f.out_dir, "Output directory");
    app->add_option("--mu", f.mu, "Margin weight");
    app->add_option("--lambda", f.lambda, "Reward L1 penalty weight");
    app->add_option("--eta", f.eta, "Noise threshold: match-noise or an integer");
    app->add_option("--config", f.config, "JSON config file");
}

girl::lab::ExperimentConfig make_config(const std::string& experiment, const Flags& f) {
    girl::lab::ExperimentConfig c;
    c.experiment = experiment;
    if (!f.config.empty()) girl::lab::apply_config(c, girl::io::read_json_file(f.config));
    if (c.experiment != experiment)
        throw girl::ValidationError("config experiment '" + c.experiment + "' does not match subcommand '" +
                                    experiment + "'");
    if (f.seed) c.seed = *f.seed;
    if (f.workers) c.workers = *f.workers;
    if (f.out_dir) c.out_dir = *f.out_dir;
    if (f.mu) c.mu = *f.mu;
    if (f.lambda) c.lambda = *f.lambda;
    if (f.eta) c.eta = girl::lab::parse_eta(*f.eta);
    girl::lab::validate(c);
    return c;
}

int finish_report(const girl::lab::ExperimentReport& report, const std::string& out_dir) {
    girl::lab::write_report(report, out_dir);
    std::cout << girl::lab::report_csv(report);
    std::size_t failed = 0;
    for (const auto& r : report.rows) failed += r.ok ? 0 : 1;
    if (failed) {
        std::cerr << failed << " run(s) found no feasible explanation\n";
        return kExitSolver;
    }
    return kExitOk;
}

auto heatmap_writer(const std::string& out_dir) {
    return [out_dir](const std::string& name, const girl::Vector& v, const girl::envs::GridGeometry& g) {
        girl::lab::export_heatmap(v, g, (std::filesystem::path(out_dir) / (name + ".heatmap.csv")).string());
    };
}

int run_table(const std::string& experiment, const Flags& f) {
    const auto c = make_config(experiment, f);
    std::filesystem::create_directories(c.out_dir);
    if (experiment == "table3") {
        const auto report = girl::lab::run_table3(c, heatmap_writer(c.out_dir));
        girl::io::write_json_file((std::filesystem::path(c.out_dir) / "mdp.json").string(),
                                  girl::io::to_json(girl::lab::table3_setup(c).mdp));
        return finish_report(report, c.out_dir);
    }
    return finish_report(girl::lab::run_table4(c, heatmap_writer(c.out_dir)), c.out_dir);
}

int run_single(const Flags& f) {
    if (f.config.empty()) throw girl::ValidationError("single requires --config <path>");
    const auto c = make_config("single", f);
    const auto run = girl::lab::run_single(c);
    std::filesystem::create_directories(c.out_dir);
    const auto dir = std::filesystem::path(c.out_dir);
    girl::io::write_json_file((dir / "result.json").string(), girl::io::to_json(run.result, run.config, &run.task));
    const auto summary = girl::lab::single_summary(run);
    girl::io::write_text_file((dir / "summary.txt").string(), summary);
    std::cout << summary;
    return kExitOk;
}

struct ExportFlags {
    std::string env = "discrete";
    std::size_t side = 5;
    std::vector<std::size_t> blocked;
    std::size_t divisions = 10;
    std::size_t samples = 1000;
};

int export_mdp(const Flags& f, const ExportFlags& e) {
    const std::string out_dir = f.out_dir.value_or("girl-out");
    std::filesystem::create_directories(out_dir);
    const auto dir = std::filesystem::path(out_dir);
    nlohmann::json manifest;
    const auto mdp = [&] {
        if (e.env == "discrete") {
            girl::envs::DiscreteGridSpec spec;
            spec.side = e.side;
            spec.blocked = {e.blocked.begin(), e.blocked.end()};
            auto m = girl::envs::make_discrete_grid(spec);
            manifest = {{"seed", f.seed.value_or(7)}, {"environment", girl::lab::to_json(spec)}, {"mdp", "mdp.json"}};
            girl::lab::export_heatmap(m.reward(), spec.geometry(), (dir / "reward.heatmap.csv").string());
            return m;
        }
        girl::envs::ContinuousGridSpec spec;
        spec.divisions = e.divisions;
        spec.n_samples = e.samples;
        spec.seed = f.seed.value_or(7);
        auto m = girl::envs::discretize_continuous_grid(spec);
        manifest = {{"seed", spec.seed}, {"environment", girl::lab::to_json(spec)}, {"mdp", "mdp.json"}};
        girl::lab::export_heatmap(m.reward(), spec.geometry(), (dir / "reward.heatmap.csv").string());
        return m;
    }();
    girl::io::write_json_file((dir / "mdp.json").string(), girl::io::to_json(mdp));
    girl::io::write_json_file((dir / "manifest.json").string(), manifest);
    std::cout << "wrote " << (dir / "mdp.json").string() << " and " << (dir / "manifest.json").string() << '\n';
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Generalized inverse reinforcement learning experiments"};
    app.require_subcommand(1);
    Flags flags;
    ExportFlags exp;
    auto* table3 = app.add_subcommand("table3", "Five discrete learning tasks over noise levels 0-4");
    auto* table4 = app.add_subcommand("table4", "Continuous grid reward study over three discretizations");
    auto* single = app.add_subcommand("single", "One search from a JSON config");
    auto* export_cmd = app.add_subcommand("export-mdp", "Write a benchmark MDP and its manifest");
    for (auto* sub : {table3, table4, single, export_cmd}) add_common(sub, flags);
    export_cmd->add_option("--env", exp.env, "discrete or continuous")->check(CLI::IsMember({"discrete", "continuous"}));
    export_cmd->add_option("--side", exp.side, "Discrete grid side");
    export_cmd->add_option("--blocked", exp.blocked, "Blocked cells of the discrete grid");
    export_cmd->add_option("--divisions", exp.divisions, "Continuous grid divisions");
    export_cmd->add_option("--samples", exp.samples, "Samples per (cell, action)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (table3->parsed()) return run_table("table3", flags);
        if (table4->parsed()) return run_table("table4", flags);
        if (single->parsed()) return run_single(flags);
        return export_mdp(flags, exp);
    } catch (const girl::ValidationError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const girl::ShapeError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const girl::Error& e) {
        std::cerr << "solver failure: " << e.what() << '\n';
        return kExitSolver;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitSolver;
    }
}
