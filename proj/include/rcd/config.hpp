#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rcd/backtest.hpp"
#include "rcd/diagnostics.hpp"
#include "rcd/diffusion.hpp"

namespace rcd {

struct DiagnosticsConfig {
    Index stride = 5;       // evaluate every stride-th test day
    Index scenarios = 256;
    double variogram_p = 0.5;
    int ljung_box_lags = 10;
    BootstrapConfig bootstrap;
};

struct SweepEntry {
    std::string name;
    StrategySpec spec;
};

/// Everything a pipeline run needs, read from one TOML document.
struct RunConfig {
    std::filesystem::path base_dir;  // relative data paths resolve against this
    std::string prices;
    std::string train_start, train_end, val_start, val_end;
    std::vector<int> k_list{1, 2, 3, 4};
    int schedule_steps = 1000;
    TailConfig tail;
    DenoiserArchitecture arch;
    TrainConfig train;
    bool train_unconditional = false;
    BacktestConfig backtest;
    std::vector<std::string> base_strategies{"EW", "RP", "BL", "SBB", "MARCD"};
    bool ablation_no_cvar = false;
    bool ablation_unconditional = false;
    bool ablation_lambda_endpoints = false;
    std::vector<SweepEntry> sweep;
    DiagnosticsConfig diagnostics;
    std::uint64_t seed = 2020;

    std::filesystem::path prices_path() const;
    /// Fill backtest.strategies from the base list, ablations and sweep.
    void build_strategies();
    void validate() const;
};

/// Parses and validates; unknown tables or keys are errors.
RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path);

/// The resolved configuration (defaults filled) as TOML.
std::string resolved_config_toml(const RunConfig& cfg);

}  // namespace rcd
