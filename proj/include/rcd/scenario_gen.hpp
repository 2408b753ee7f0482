#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rcd/common.hpp"
#include "rcd/data_io.hpp"
#include "rcd/regime_hmm.hpp"

namespace rcd {

/// Cumulative signal fractions alpha_bar[0..S] of a variance-preserving diffusion.
struct NoiseSchedule {
    int steps = 0;
    VectorXd alpha_bar;  // length steps+1, alpha_bar[0] == 1, strictly decreasing

    double beta(int s) const { return 1.0 - alpha_bar(s) / alpha_bar(s - 1); }
};

/// Cosine schedule with offset 0.008, floored at 1e-5 by an affine remap so that the
/// sequence stays strictly decreasing.
NoiseSchedule cosine_schedule(int steps);

/// sqrt(alpha_bar_s) x0 + sqrt(1 - alpha_bar_s) eps
VectorXd forward_noise(const VectorXd& x0, int s, const VectorXd& eps, const NoiseSchedule& schedule);

/// Which side of the worst-asset-loss distribution gets up-weighted.
enum class TailOrientation {
    Adverse,  // largest worst-asset losses (top q fraction)
    Literal,  // loss <= its q-quantile, as the indicator is literally written
};

struct TailConfig {
    double q = 0.10;
    double eta = 2.0;
    double quantile_ema = 0.99;
    TailOrientation orientation = TailOrientation::Adverse;

    void validate() const;
    /// Quantile level tracked by the running threshold.
    double threshold_level() const { return orientation == TailOrientation::Adverse ? 1.0 - q : q; }
};

/// Worst single-asset one-step loss: -min_j r_j.
double worst_asset_loss(const Eigen::Ref<const VectorXd>& r);

/// The only place the trigger direction is decided.
bool is_tail_event(double worst_loss, double threshold, TailOrientation orientation);

/// Per-row weights 1 + eta * 1{tail}; rows of `batch` are return vectors.
VectorXd tail_weights(const MatrixXd& batch, const TailConfig& config, double threshold);

/// Exponentially smoothed batch quantile.
class RunningQuantile {
public:
    RunningQuantile(double level, double smoothing) : level_(level), smoothing_(smoothing) {}

    /// Current estimate; requires initialized().
    double value() const { return value_; }
    bool initialized() const { return initialized_; }
    void update(std::vector<double> batch_values);

    double level() const { return level_; }
    double smoothing() const { return smoothing_; }
    void restore(double value, bool initialized) {
        value_ = value;
        initialized_ = initialized;
    }

private:
    double level_;
    double smoothing_;
    double value_ = 0.0;
    bool initialized_ = false;
};

/// Linear-interpolation empirical quantile (type 7).
double empirical_quantile(std::vector<double> values, double level);

/// Effective sample size of tail-reweighted batches: N (1+eta q)^2 / (1 + 2 eta q + eta^2 q).
double ess(double q, double eta, double N);
/// (sum w)^2 / sum w^2
double empirical_ess(const VectorXd& weights);

enum class GeneratorKind { Diffusion, Sbb };

struct ScenarioSet {
    MatrixXd scenarios;  // N x d next-period returns
    RegimeContext context;
    GeneratorKind generator = GeneratorKind::Diffusion;

    Index count() const { return scenarios.rows(); }
};

std::string to_string(GeneratorKind kind);

/// Stationary (Politis-Romano) bootstrap: each scenario is the first element of an independently
/// drawn block, i.e. a uniformly drawn historical row, so `block_len` only affects the stream
/// when longer paths are requested from stationary_bootstrap_indices. Scenario i uses its own
/// stream derive_seed(seed, i).
ScenarioSet sbb_sample(const ReturnPanel& returns, double block_len, Index N, std::uint64_t seed);
ScenarioSet sbb_sample(const MatrixXd& history, double block_len, Index N, std::uint64_t seed);

/// Stationary bootstrap resample of row indices into [0, T) of length `length`.
std::vector<Index> stationary_bootstrap_indices(Index T, Index length, double mean_block, std::uint64_t seed);

void write_scenarios_csv(const ScenarioSet& set, const std::vector<std::string>& assets,
                         const std::filesystem::path& path);

}  // namespace rcd
