// Experiment runner: scenario registry, config handling and result emission
// for the BSDE/PDE laboratory.

#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include "logbsde/scenarios.hpp"

namespace {

using logbsde::Json;

Json load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in.good()) logbsde::fail("config-error", "cannot read config file: " + path);
    Json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        logbsde::fail("config-error", std::string("config parse failure: ") + e.what());
    }
    return j;
}

struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    unsigned jobs = 1;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "JSON config file");
    cmd->add_option("--out", opts.out_dir, "output directory");
    cmd->add_option("--seed", opts.seed, "master seed override")
        ->each([&](const std::string&) { opts.seed_set = true; });
    cmd->add_option("--jobs", opts.jobs, "worker threads");
}

int finish(const logbsde::ResultRecord& rec) {
    std::cout << rec.scenario << ": " << rec.overall() << " (config " << rec.config_hash
              << ", " << logbsde::fmt_real(rec.wall_time_s) << " s)\n";
    for (const auto& [name, verdict] : rec.verdicts.items())
        std::cout << "  " << name << ": " << verdict.get<std::string>() << '\n';
    const std::string v = rec.overall();
    if (v == "fail") return 2;
    if (v == "inconclusive") return 3;
    return 0;
}

int run_pipeline(const std::string& pipeline, const CommonOpts& opts) {
    Json cfg = logbsde::pipeline_default_config(pipeline);
    if (!opts.config_path.empty())
        cfg = logbsde::merge_config(cfg, load_config_file(opts.config_path));
    cfg["pipeline"] = pipeline;
    if (opts.seed_set) cfg["seed"] = opts.seed;
    if (!opts.out_dir.empty()) {
        cfg["out_dir"] = opts.out_dir;
    } else if (const char* env = std::getenv("LOGBSDE_OUT"); env != nullptr && *env) {
        cfg["out_dir"] = std::string(env) + "/" + cfg["scenario"].get<std::string>();
    }
    return finish(logbsde::run_scenario(cfg, opts.jobs));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"numerical laboratory for multidimensional BSDEs with logarithmic "
                 "drivers and their degenerate PDE systems"};
    app.require_subcommand(1);

    const std::vector<std::string> pipeline_names = {
        "simulate-forward", "check-assumptions", "mollify-demo",   "solve-bsde",
        "apriori-check",    "stability-sweep",   "pde-compare"};
    std::vector<std::pair<CLI::App*, std::shared_ptr<CommonOpts>>> subs;
    for (const auto& name : pipeline_names) {
        auto opts = std::make_shared<CommonOpts>();
        CLI::App* cmd = app.add_subcommand(name, "run the " + name + " pipeline");
        add_common(cmd, *opts);
        subs.emplace_back(cmd, opts);
    }

    auto run_opts = std::make_shared<CommonOpts>();
    std::string scenario_id;
    CLI::App* run_cmd = app.add_subcommand("run", "run a registered scenario by id");
    run_cmd->add_option("scenario", scenario_id, "scenario id (see `list`)")->required();
    add_common(run_cmd, *run_opts);

    CLI::App* list_cmd = app.add_subcommand("list", "list registered scenarios");

    CLI11_PARSE(app, argc, argv);

    try {
        if (list_cmd->parsed()) {
            for (const auto& name : logbsde::list_scenarios()) std::cout << name << '\n';
            return 0;
        }
        if (run_cmd->parsed()) {
            Json cfg = logbsde::scenario_config(scenario_id);
            if (!run_opts->config_path.empty())
                cfg = logbsde::merge_config(cfg, load_config_file(run_opts->config_path));
            if (run_opts->seed_set) cfg["seed"] = run_opts->seed;
            if (!run_opts->out_dir.empty()) {
                cfg["out_dir"] = run_opts->out_dir;
            } else if (const char* env = std::getenv("LOGBSDE_OUT");
                       env != nullptr && *env) {
                cfg["out_dir"] = std::string(env) + "/" + scenario_id;
            }
            return finish(logbsde::run_scenario(cfg, run_opts->jobs));
        }
        for (std::size_t i = 0; i < subs.size(); ++i) {
            if (subs[i].first->parsed()) return run_pipeline(pipeline_names[i], *subs[i].second);
        }
    } catch (const logbsde::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.code() == "config-error" ? 2 : 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
