#pragma once

#include <filesystem>
#include <vector>

#include "json.hpp"

#include "rcd/config.hpp"
#include "rcd/regime_hmm.hpp"

namespace rcd {

struct BicRow {
    int K = 0;
    Index parameters = 0;
    Index refits = 0;
    double mean_bic = 0.0;
    double mean_loglik = 0.0;
};

/// Rolling model selection: each refit window is scored by BIC and the scores are averaged per K.
std::vector<BicRow> rolling_bic_table(const ReturnPanel& returns, const std::vector<int>& k_list, Index window,
                                      Index stride, const EmOptions& em);

nlohmann::json refits_to_json(const std::vector<RegimeRefit>& refits);
std::vector<RegimeRefit> refits_from_json(const nlohmann::json& j);

/// Each command reads the config, works inside `run_dir` and writes resolved_config.toml there.
/// Errors are reported by exception (InputError: exit 2, NumericalError: exit 1).
void cmd_ingest(const RunConfig& cfg, const std::filesystem::path& run_dir);
void cmd_fit_hmm(const RunConfig& cfg, const std::filesystem::path& run_dir);
void cmd_train_gen(const RunConfig& cfg, const std::filesystem::path& run_dir, bool resume);
void cmd_backtest(const RunConfig& cfg, const std::filesystem::path& run_dir);
void cmd_diagnose(const RunConfig& cfg, const std::filesystem::path& run_dir);
void cmd_report(const RunConfig& cfg, const std::filesystem::path& run_dir);
void cmd_synth(const std::filesystem::path& out, std::uint64_t seed);

}  // namespace rcd
