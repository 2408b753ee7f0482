#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "rcd/common.hpp"
#include "rcd/data_io.hpp"

namespace rcd {

/// K-state Gaussian HMM with full per-state covariances.
struct RegimeModel {
    std::vector<VectorXd> means;        // K vectors of length d
    std::vector<MatrixXd> covariances;  // K SPD d x d
    MatrixXd transition;                // K x K, row-stochastic
    VectorXd initial;                   // length K

    Index states() const { return static_cast<Index>(means.size()); }
    Index dim() const { return means.empty() ? 0 : means.front().size(); }

    /// Throws InputError when any invariant is violated.
    void validate() const;
    /// State with the largest average covariance trace (the high-volatility regime).
    Index crisis_state() const;
};

struct RegimePosteriors {
    MatrixXd gamma;      // T x K filtered probabilities P(S_t = k | R_1..t)
    double loglik = 0.0;
};

/// Forward recursion in log space. Row t only uses observations 0..t.
RegimePosteriors filter_posteriors(const RegimeModel& model, const MatrixXd& returns);
RegimePosteriors filter_posteriors(const RegimeModel& model, const ReturnPanel& returns);

struct EmOptions {
    std::uint64_t seed = 2020;
    int max_iter = 500;
    double tol = 1e-6;
};

struct EmTrace {
    std::vector<double> loglik;  // log-likelihood before each M-step
    int iterations = 0;
    bool converged = false;
};

/// Baum-Welch with k-means++ initialization. States of the result are ordered by
/// increasing average covariance trace.
RegimeModel fit_em(const MatrixXd& returns, int K, const EmOptions& opts = {}, EmTrace* trace = nullptr,
                   const std::vector<std::string>* asset_names = nullptr);
RegimeModel fit_em(const ReturnPanel& returns, int K, const EmOptions& opts = {}, EmTrace* trace = nullptr);

/// What a state is matched on across refits.
enum class LabelAlignment {
    Means,           // state means only
    MeansAndVols,    // [mean; per-asset volatility], both in return units
};
LabelAlignment parse_label_alignment(const std::string& s);
std::string to_string(LabelAlignment a);

/// Permute the states of `next` to best match `previous`: greedy pairing by smallest
/// Euclidean distance between the matched vectors.
RegimeModel align_labels(const RegimeModel& next, const RegimeModel& previous,
                         LabelAlignment on = LabelAlignment::MeansAndVols);

struct RegimeRefit {
    Index index;       // row of the refit date in the panel
    std::string date;
    RegimeModel model;
};

/// Walk-forward refits: first refit at row `first_index` (default window-1), then every
/// `stride` rows. The model at row t is fitted on rows (t-window, t] only.
std::vector<RegimeRefit> rolling_refit(const ReturnPanel& returns, int K, Index window_days, Index refit_stride,
                                       const EmOptions& opts = {}, Index first_index = -1,
                                       LabelAlignment align = LabelAlignment::MeansAndVols);

/// Most recent refit at or before row t, or nullptr.
const RegimeRefit* model_at(const std::vector<RegimeRefit>& refits, Index t);

/// Filtered posteriors for every row covered by the refits. Row t uses the model refitted at
/// or before t, filtered from that model's window start through t. Rows before the first
/// refit are NaN. Refits past the end of `returns` are ignored.
MatrixXd walk_forward_posteriors(const ReturnPanel& returns, const std::vector<RegimeRefit>& refits,
                                 Index window_days);

/// Which blocks make up the conditioning vector z_t.
struct ContextSpec {
    bool posteriors = true;
    bool one_hot = true;
    bool trailing_vol = true;
    bool trailing_mean = true;
    Index lookback = 21;

    Index dimension(Index K, Index d) const;
};

struct RegimeContext {
    VectorXd z;
};

/// z_t = [pi_t ; one-hot(argmax pi_t) ; annualized trailing vol ; trailing mean] over the
/// `lookback` returns ending at row `date_index`.
RegimeContext context_features(const VectorXd& posterior_row, const ReturnPanel& returns, Index date_index,
                               const ContextSpec& spec = {});
RegimeContext context_features(const RegimePosteriors& posteriors, const ReturnPanel& returns,
                               Index date_index, const ContextSpec& spec = {});

/// Number of free parameters: K d + K d(d+1)/2 + K(K-1) + (K-1).
Index free_parameters(Index K, Index d);
double bic_from(double loglik, Index params, double T);
double bic(const RegimeModel& model, const MatrixXd& returns);

nlohmann::json to_json(const RegimeModel& model);
RegimeModel regime_model_from_json(const nlohmann::json& j);

void write_posteriors_csv(const std::vector<std::string>& dates, const MatrixXd& gamma,
                          const std::filesystem::path& path);

}  // namespace rcd
