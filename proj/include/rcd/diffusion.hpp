#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "rcd/denoiser.hpp"
#include "rcd/scenario_gen.hpp"

namespace rcd {

struct TrainConfig {
    int steps = 20000;
    Index batch = 256;
    double lr = 1e-4;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double grad_clip = 1.0;     // global-norm clip; <= 0 disables
    double ema_decay = 0.999;
    bool ema_warmup = true;     // decay_k = min(ema_decay, (1+k)/(10+k))
    std::uint64_t seed = 2020;
    int checkpoint_every = 0;   // 0 disables the callback
    int log_every = 0;

    void validate() const;
};

/// Everything needed to continue a run bit-identically.
struct TrainState {
    DenoiserParams params;  // raw (non-averaged) weights
    VectorXd adam_m, adam_v;
    VectorXd ema_theta;
    int step = 0;           // completed optimizer steps
    double quantile_value = 0.0;
    bool quantile_initialized = false;
};

struct TrainResult {
    DenoiserParams ema_params;
    TrainState state;
    std::vector<double> losses;  // per-step weighted loss (this invocation only)
};

/// Mean over the batch of per-sample squared errors, optionally weighted.
double batch_loss(const VectorXd& per_sample_sq_err);
double batch_loss(const VectorXd& per_sample_sq_err, const VectorXd& weights);

struct LossGrad {
    double loss = 0.0;
    VectorXd grad;
    VectorXd per_sample_sq_err;
};

/// Tail-weighted denoising loss on one batch and its gradient w.r.t. theta.
/// x0 and eps are d x B (x0 in standardized units), z is C x B raw context.
LossGrad loss_and_gradient(const DenoiserParams& params, const MatrixXd& x0, const std::vector<int>& steps,
                           const MatrixXd& eps, const MatrixXd& z, const VectorXd& weights,
                           const NoiseSchedule& schedule);

using CheckpointFn = std::function<void(const TrainState&)>;

/// targets: n x d next-period returns; contexts: n x C, row i conditions targets row i.
TrainResult train(const MatrixXd& targets, const MatrixXd& contexts, const NoiseSchedule& schedule,
                  const TailConfig& tail, const TrainConfig& config, const DenoiserArchitecture& arch,
                  const TrainState* resume = nullptr, const CheckpointFn& checkpoint = {});

/// Ancestral reverse sampling. Scenario i draws all its noise from its own stream
/// derive_seed(seed, i), and the network is always evaluated on fixed-width column chunks,
/// so scenario i does not depend on N.
ScenarioSet sample(const DenoiserParams& params, const NoiseSchedule& schedule, const RegimeContext& context,
                   Index N, std::uint64_t seed);

struct GateProbe {
    std::vector<double> grid;
    std::vector<double> gate;
    bool monotone_non_decreasing = true;
};

/// Gate output as the crisis-posterior coordinate of z sweeps [0, 1], other features fixed.
GateProbe gate_monotonicity_check(const DenoiserParams& params, const VectorXd& base_z, Index crisis_coordinate,
                                  int grid_points = 11);

void save_train_state(const TrainState& state, const std::filesystem::path& path);
TrainState load_train_state(const std::filesystem::path& path);

}  // namespace rcd
