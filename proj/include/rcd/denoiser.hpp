#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "rcd/common.hpp"

namespace rcd {

struct DenoiserArchitecture {
    Index data_dim = 0;        // d
    Index context_dim = 0;     // dim z
    Index time_embed_dim = 16; // sinusoidal embedding of the diffusion step (even)
    Index hidden_width = 128;
    Index hidden_layers = 4;   // input projection + (hidden_layers - 1) residual blocks
    Index gate_hidden = 32;

    Index input_dim() const { return data_dim + time_embed_dim + context_dim; }
    Index expert_size() const;
    Index gate_size() const;
    Index total_size() const { return 2 * expert_size() + gate_size(); }
    void validate() const;
};

bool operator==(const DenoiserArchitecture& a, const DenoiserArchitecture& b);

/// Two residual feed-forward experts (base, crisis) mixed by a sigmoid gate on the context.
/// All trainable weights live in one flat vector; the scalers standardize inputs and are fit
/// on the training data, not trained.
struct DenoiserParams {
    DenoiserArchitecture arch;
    VectorXd theta;
    VectorXd x_mean, x_std;  // return standardization
    VectorXd z_mean, z_std;  // context standardization

    /// Random initialization; scalers set to the identity.
    static DenoiserParams initialize(const DenoiserArchitecture& arch, std::uint64_t seed);
    /// All weights zero, identity scalers.
    static DenoiserParams zeros(const DenoiserArchitecture& arch);

    bool finite() const;
};

/// Sinusoidal embedding of integer steps, one column per step.
MatrixXd step_embedding(const std::vector<int>& steps, Index dim);

/// Cached activations of one batched forward pass (columns are samples).
struct DenoiserTape {
    MatrixXd input;                         // standardized [x; emb; z]
    MatrixXd z_norm;
    std::vector<MatrixXd> base_pre, crisis_pre;  // pre-activations h_0..h_{L-1}
    MatrixXd base_out, crisis_out;
    MatrixXd gate_pre;                       // gate hidden pre-activation
    Eigen::RowVectorXd gate;                 // g per sample
    MatrixXd output;
};

/// eps_hat = (1 - g) eps_base + g eps_crisis. `x` is already in standardized units.
/// When `gate_override` is set the gate network is bypassed.
MatrixXd moe_denoise(const DenoiserParams& params, const MatrixXd& x, const std::vector<int>& steps,
                     const MatrixXd& z, std::optional<double> gate_override = std::nullopt,
                     DenoiserTape* tape = nullptr);
VectorXd moe_denoise(const DenoiserParams& params, const VectorXd& x, int step, const VectorXd& z,
                     std::optional<double> gate_override = std::nullopt);

/// Base and crisis expert outputs separately (diagnostics and tests).
std::pair<MatrixXd, MatrixXd> expert_outputs(const DenoiserParams& params, const MatrixXd& x,
                                             const std::vector<int>& steps, const MatrixXd& z);

/// Gate value g(z) for each column of z (raw, unstandardized context).
Eigen::RowVectorXd gate_values(const DenoiserParams& params, const MatrixXd& z);

/// Gradient of theta given dLoss/dOutput and the forward tape.
VectorXd denoiser_backward(const DenoiserParams& params, const DenoiserTape& tape, const MatrixXd& d_output);

void save_denoiser(const DenoiserParams& params, const std::filesystem::path& path);
DenoiserParams load_denoiser(const std::filesystem::path& path);

}  // namespace rcd
