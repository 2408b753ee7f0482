#include <filesystem>
#include <iostream>
#include <string>

#include <spdlog/spdlog.h>

#include "CLI11.hpp"

#include "rcd/commands.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
    CLI::App app{"Regime-conditioned scenario generation and CVaR allocation"};
    app.require_subcommand(1);
    std::string config_path, run_dir = "runs/default";
    bool quiet = false;
    app.add_flag("-q,--quiet", quiet, "Only log warnings and errors");

    auto with_config = [&](CLI::App* sub) {
        sub->add_option("-c,--config", config_path, "TOML run configuration")->required()->check(CLI::ExistingFile);
        sub->add_option("-r,--run-dir", run_dir, "Directory for artifacts");
    };
    auto* ingest = app.add_subcommand("ingest", "Validate prices and write returns");
    auto* fit = app.add_subcommand("fit-hmm", "BIC table, rolling regime refits and posteriors");
    auto* train = app.add_subcommand("train-gen", "Train the diffusion scenario generator");
    bool resume = false;
    train->add_flag("--resume", resume, "Continue from the last checkpoint in the run directory");
    auto* backtest = app.add_subcommand("backtest", "Walk-forward backtest of all configured strategies");
    auto* diagnose = app.add_subcommand("diagnose", "Scenario quality and tail-risk diagnostics");
    auto* report = app.add_subcommand("report", "Assemble report.md and report.json");
    for (auto* sub : {ingest, fit, train, backtest, diagnose, report}) with_config(sub);

    auto* synth = app.add_subcommand("synth", "Write a synthetic regime-switching price panel");
    std::string synth_out = "data/synthetic_prices.csv";
    std::uint64_t synth_seed = 7;
    synth->add_option("-o,--out", synth_out, "Output CSV");
    synth->add_option("--seed", synth_seed, "Generator seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }
    spdlog::set_level(quiet ? spdlog::level::warn : spdlog::level::info);

    try {
        if (synth->parsed()) {
            rcd::cmd_synth(synth_out, synth_seed);
            return 0;
        }
        const rcd::RunConfig cfg = rcd::load_config(config_path);
        const fs::path dir = run_dir;
        if (ingest->parsed()) rcd::cmd_ingest(cfg, dir);
        else if (fit->parsed()) rcd::cmd_fit_hmm(cfg, dir);
        else if (train->parsed()) rcd::cmd_train_gen(cfg, dir, resume);
        else if (backtest->parsed()) rcd::cmd_backtest(cfg, dir);
        else if (diagnose->parsed()) rcd::cmd_diagnose(cfg, dir);
        else if (report->parsed()) rcd::cmd_report(cfg, dir);
    } catch (const rcd::InputError& e) {
        spdlog::error("{}", e.what());
        return 2;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
    return 0;
}
