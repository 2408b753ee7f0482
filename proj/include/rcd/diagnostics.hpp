#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "rcd/common.hpp"
#include "rcd/scenario_gen.hpp"

namespace rcd {

/// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|.
double ks_statistic(std::vector<double> a, std::vector<double> b);

struct KsResult {
    double average = 0.0;
    std::vector<double> per_asset;
};

/// Pools the scenario marginals of every set and compares them with the realized rows, asset by asset.
KsResult ks_avg(const std::vector<ScenarioSet>& sets, const MatrixXd& realized);

/// Energy score with beta = 1: mean |x_i - y| - 1/(2N^2) sum |x_i - x_j|.
double energy_score(const MatrixXd& scenarios, const VectorXd& observed);
double energy_score(const ScenarioSet& set, const VectorXd& observed);

/// Variogram score of order p with unit weights.
double variogram_score(const MatrixXd& scenarios, const VectorXd& observed, double p = 0.5);
double variogram_score(const ScenarioSet& set, const VectorXd& observed, double p = 0.5);

struct LjungBox {
    double q = 0.0;
    double p_value = 1.0;
};

/// Q = T(T+2) sum_k rho_k^2 / (T-k); zero-variance series give p = 1.
LjungBox ljung_box(const VectorXd& series, int lags);

struct Kupiec {
    double lr = 0.0;
    double p_value = 1.0;
};

/// Unconditional coverage test of `violations` exceedances in `trials` at level alpha.
Kupiec kupiec_uc(Index violations, Index trials, double alpha);
/// p-value of a given likelihood ratio (chi-square, 1 dof).
double kupiec_p_from_lr(double lr);

/// |mean(predicted) - CVaR_alpha(realized)| in basis points.
double cvar_error_bps(const VectorXd& predicted_cvar, const VectorXd& realized_losses, double alpha);

struct BootstrapConfig {
    int B = 1000;
    double block = 20.0;
    std::uint64_t seed = 2020;
};

struct SharpeUplift {
    double delta = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    double p_two_sided = 1.0;
};

/// Annualized Sharpe (rf = 0); 0 for a zero-variance series.
double annualized_sharpe(const VectorXd& daily);

/// Paired stationary bootstrap of Sharpe(a) - Sharpe(b); percentile 95% interval on the
/// uncentered replicates, p = min(1, 2 min(P(D <= 0), P(D >= 0))).
SharpeUplift sharpe_uplift_ci(const VectorXd& a, const VectorXd& b, const BootstrapConfig& config = {});

struct DiagnosticsReport {
    std::string generator;
    Index dates = 0;
    double ks_avg = 0.0;
    std::vector<double> ks_per_asset;
    double energy_score = 0.0;
    double variogram_score = 0.0;
    double ljung_box_p_absr = 1.0;           // generated path
    double ljung_box_p_absr_realized = 1.0;  // realized path, side by side
    double kupiec_uc_p = 1.0;
    Index violations = 0;
    Index trials = 0;
    double cvar_error_bps = 0.0;
    double ess_value = 0.0;
};

nlohmann::json to_json(const DiagnosticsReport& r, const std::vector<std::string>& assets);
DiagnosticsReport diagnostics_from_json(const nlohmann::json& j);

/// Columns: generator,KS,ES,VS,LB_p,UC_p,CVaR_err_bps
void write_table1_csv(const std::vector<DiagnosticsReport>& rows, const std::filesystem::path& path);

}  // namespace rcd
