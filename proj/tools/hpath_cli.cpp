// Command-line harness for the horizontal path space Monte Carlo library.
//
// Subcommands: run, sweep, converge, list-checks, list-models, export-frames.
// Exit codes: 0 = pass/complete, 1 = statistical FAIL, 2 = usage error.

#include "hpath/hpath.hpp"

#include "CLI11.hpp"

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

namespace {

void add_config_flags(CLI::App* cmd, hpath::harness::ExperimentConfig& cfg,
                      std::string& config_file, std::string& epsilon_list,
                      std::string& times_list, std::string& x0_list, std::string& r_grid_list,
                      std::string& dt_ladder_list) {
    cmd->add_option("--config", config_file, "flat key-value config file (flags override)");
    cmd->add_option("--check", cfg.check, "check identifier (see list-checks)");
    cmd->add_option("--model", cfg.model, "model name (see list-models)");
    cmd->add_option("--epsilon", epsilon_list, "epsilon (comma list for sweep)");
    cmd->add_option("--T", cfg.T, "time horizon");
    cmd->add_option("--dt", cfg.dt, "time step");
    cmd->add_option("--n-paths", cfg.n_paths, "number of Monte Carlo paths");
    cmd->add_option("--seed", cfg.seed, "master seed (required for run)");
    cmd->add_option("--function", cfg.function, "cylinder function registry key");
    cmd->add_option("--function2", cfg.function2, "second function (dirichlet-energy)");
    cmd->add_option("--gamma", cfg.gamma, "variation direction registry key");
    cmd->add_option("--times", times_list, "partition times, comma separated");
    cmd->add_option("--x0", x0_list, "start point coordinates, comma separated");
    cmd->add_option("--output", cfg.output, "output path prefix (.json/.csv)");
    cmd->add_option("--workers", cfg.workers, "worker threads");
    cmd->add_option("--substeps", cfg.substeps, "transport substeps (0 = auto)");
    cmd->add_option("--n-inner", cfg.n_inner, "inner samples (clark-ocone)");
    cmd->add_option("--n-outer", cfg.n_outer, "outer paths (clark-ocone)");
    cmd->add_option("--r-grid", r_grid_list, "tail thresholds, comma separated");
    cmd->add_option("--dt-ladder", dt_ladder_list, "dt ladder for converge, comma separated");
    cmd->add_option("--dump-paths", cfg.dump_paths, "binary dump file for paths");
    cmd->add_option("--dump-transports", cfg.dump_transports, "binary dump file for transports");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Monte Carlo verification harness for horizontal Brownian motion, "
                 "path-space gradients and concentration bounds on model foliations"};
    app.require_subcommand(1);

    hpath::harness::ExperimentConfig flags;
    std::string config_file, epsilon_list, times_list, x0_list, r_grid_list, dt_ladder_list;

    auto* cmd_run = app.add_subcommand("run", "run one named check");
    auto* cmd_sweep = app.add_subcommand("sweep", "run a check over an epsilon list");
    auto* cmd_converge = app.add_subcommand("converge", "integrator convergence study");
    auto* cmd_list_checks = app.add_subcommand("list-checks", "print available checks");
    auto* cmd_list_models = app.add_subcommand("list-models", "print available models");
    auto* cmd_frames = app.add_subcommand("export-frames", "print model frame constants as JSON");
    std::string frames_model = "heisenberg-1";
    cmd_frames->add_option("--model", frames_model, "model name");

    for (CLI::App* cmd : {cmd_run, cmd_sweep, cmd_converge}) {
        add_config_flags(cmd, flags, config_file, epsilon_list, times_list, x0_list,
                         r_grid_list, dt_ladder_list);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (cmd_list_checks->parsed()) {
            for (const auto& c : hpath::harness::check_names()) std::cout << c << "\n";
            return 0;
        }
        if (cmd_list_models->parsed()) {
            for (const auto& m : hpath::harness::model_names()) std::cout << m << "\n";
            return 0;
        }
        if (cmd_frames->parsed()) {
            std::cout << hpath::harness::export_frames(frames_model).dump(2) << "\n";
            return 0;
        }

        hpath::harness::ExperimentConfig cfg;
        if (!config_file.empty()) cfg = hpath::harness::load_config_file(config_file);

        // flag overrides on top of the file
        auto override_if = [&](const std::string& key, const std::string& value, bool given) {
            if (given) hpath::harness::apply_key(cfg, key, value);
        };
        CLI::App* active = cmd_run->parsed() ? cmd_run
                           : cmd_sweep->parsed() ? cmd_sweep
                                                 : cmd_converge;
        auto given = [&](const std::string& flag) { return active->count(flag) > 0; };
        override_if("check", flags.check, given("--check"));
        override_if("model", flags.model, given("--model"));
        override_if("epsilon", epsilon_list, given("--epsilon"));
        if (given("--T")) cfg.T = flags.T;
        if (given("--dt")) cfg.dt = flags.dt;
        if (given("--n-paths")) cfg.n_paths = flags.n_paths;
        if (given("--seed")) {
            cfg.seed = flags.seed;
            cfg.seed_set = true;
        }
        override_if("function", flags.function, given("--function"));
        override_if("function2", flags.function2, given("--function2"));
        override_if("gamma", flags.gamma, given("--gamma"));
        override_if("times", times_list, given("--times"));
        override_if("x0", x0_list, given("--x0"));
        if (given("--output")) cfg.output = flags.output;
        if (given("--workers")) cfg.workers = flags.workers;
        if (given("--substeps")) cfg.substeps = flags.substeps;
        if (given("--n-inner")) cfg.n_inner = flags.n_inner;
        if (given("--n-outer")) cfg.n_outer = flags.n_outer;
        override_if("r_grid", r_grid_list, given("--r-grid"));
        override_if("dt_ladder", dt_ladder_list, given("--dt-ladder"));
        if (given("--dump-paths")) cfg.dump_paths = flags.dump_paths;
        if (given("--dump-transports")) cfg.dump_transports = flags.dump_transports;

        hpath::harness::RunArtifacts art;
        if (cmd_run->parsed()) {
            if (cfg.check.empty()) throw hpath::UsageError("run: --check is required");
            art = hpath::harness::run(cfg);
        } else if (cmd_sweep->parsed()) {
            if (cfg.check.empty()) throw hpath::UsageError("sweep: --check is required");
            art = hpath::harness::sweep(cfg);
        } else {
            art = hpath::harness::convergence_study(cfg);
        }
        std::cout << art.summary.dump(2) << "\n";
        return art.exit_code;
    } catch (const hpath::UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
