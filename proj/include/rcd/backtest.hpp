#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "rcd/baselines.hpp"
#include "rcd/common.hpp"
#include "rcd/cvar_allocator.hpp"
#include "rcd/data_io.hpp"
#include "rcd/denoiser.hpp"
#include "rcd/regime_hmm.hpp"
#include "rcd/scenario_gen.hpp"

namespace rcd {

struct Metrics {
    double cagr = 0.0;
    double vol_annual = 0.0;
    double sharpe = 0.0;   // 0 when vol is 0
    double sortino = 0.0;  // +inf when there is no downside and the mean is positive
    double maxdd = 0.0;    // positive magnitude
    double calmar = 0.0;   // +inf when maxdd = 0 and cagr > 0
    double avg_turnover = 0.0;
};

/// Daily NAV in, annualized with 252 periods, rf = 0.
Metrics compute_metrics(const std::vector<double>& nav);
double max_drawdown(const std::vector<double>& nav);

/// nav (1 - cost_bps 1e-4 turnover)
double apply_trade_cost(double nav, double turnover, double cost_bps);

enum class StrategyKind { EW, RP, BL, SBB, MARCD };
std::string to_string(StrategyKind k);
StrategyKind parse_strategy_kind(const std::string& s);

/// One row of the report. Optional fields override the run-wide allocator settings.
struct StrategySpec {
    std::string name;
    StrategyKind kind = StrategyKind::EW;
    std::optional<double> lambda, gamma, lambda_mu, kappa, tau, alpha;
    std::optional<Index> scenarios;
    bool cvar_term = true;
    bool unconditional = false;  // generator trained and sampled with z = 0
};

struct BacktestConfig {
    std::string test_start, test_end;
    double cost_bps = 10.0;
    double tau = 0.20;
    Index scenarios = 1024;
    double lambda = 0.5;
    double alpha = 0.95;
    double lambda_mu = 1.0;
    double gamma = 1.0;
    double kappa = 0.0;
    double lower = 0.0, upper = 1.0;
    int hmm_k = 3;
    Index hmm_window = 756;
    Index hmm_stride = 21;
    LabelAlignment hmm_align = LabelAlignment::MeansAndVols;
    EmOptions em;
    ContextSpec context;
    Index moments_window = 756;
    std::optional<double> shrinkage;  // empty: Ledoit-Wolf intensity
    BaselineSpec bl;
    double sbb_block = 20.0;
    std::uint64_t seed = 2020;
    std::vector<StrategySpec> strategies;

    void validate(Index d) const;
};

struct GeneratorModels {
    const DenoiserParams* conditional = nullptr;
    const DenoiserParams* unconditional = nullptr;
    NoiseSchedule schedule;
};

struct RebalanceRow {
    std::string date;
    Index index = 0;
    VectorXd pre_weights;  // drifted holdings before the trade
    VectorXd weights;      // holdings after the trade
    double turnover = 0.0;
    double cost = 0.0;     // NAV units
    std::string status;    // solver status, "target" for baselines
    Index audit_line = -1;
    double predicted_var = 0.0;   // scenario VaR of the new holdings (CVaR strategies)
    double predicted_cvar = 0.0;
};

struct StrategyRun {
    StrategySpec spec;
    std::vector<double> nav;  // aligned with BacktestReport::dates
    std::vector<RebalanceRow> rebalances;
    Metrics metrics;
    double total_cost = 0.0;
};

struct BacktestReport {
    std::vector<std::string> dates;  // the day before the test split, then every test day
    std::vector<std::string> assets;
    Index first_index = 0;           // panel row of dates[0]
    std::vector<StrategyRun> runs;
    std::vector<nlohmann::json> audit;

    const StrategyRun* find(const std::string& name) const;
};

/// Month-end rows of [first, last) plus `first` itself.
std::vector<Index> rebalance_rows(const std::vector<std::string>& dates, Index first, Index last);

/// Walk-forward run. `refits` may be supplied (they must come from the same panel);
/// otherwise they are fitted here.
BacktestReport run_walk_forward(const BacktestConfig& config, const ReturnPanel& data, const GeneratorModels& models,
                                const std::vector<RegimeRefit>* refits = nullptr);

nlohmann::json to_json(const Metrics& m);
nlohmann::json to_json(const BacktestReport& r);

/// backtest_report.json, nav.csv, weights.csv, audit.jsonl
void write_backtest_outputs(const BacktestReport& r, const std::filesystem::path& dir);

}  // namespace rcd
