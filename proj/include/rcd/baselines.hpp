#pragma once

#include <string>

#include "rcd/common.hpp"

namespace rcd {

enum class BaselineKind { EW, RP, BL };

struct BaselineSpec {
    BaselineKind kind = BaselineKind::EW;
    double tau_bl = 0.05;
    double risk_aversion = 2.5;
    VectorXd market_weights;  // empty means equal weight
    double omega_scale = 1.0; // view uncertainty; inert without views

    void validate(Index d) const;
    VectorXd market(Index d) const;
};

VectorXd equal_weight(Index d);

struct RiskParityInfo {
    int iterations = 0;
    double spread = 0.0;  // (max - min) / mean of risk contributions
};

/// Equal risk contributions by cyclic coordinate descent on 1/2 y'Sy - (1/d) sum log y,
/// normalized to the simplex.
VectorXd risk_parity(const MatrixXd& sigma, double tol = 1e-8, int max_iter = 10000, RiskParityInfo* info = nullptr);

/// w_i (Sigma w)_i
VectorXd risk_contributions(const MatrixXd& sigma, const VectorXd& w);

struct BlackLitterman {
    VectorXd mu_bl;   // implied equilibrium returns delta Sigma w_mkt
    VectorXd target;  // w_mkt
};

BlackLitterman black_litterman_no_views(const BaselineSpec& spec, const MatrixXd& sigma);

BaselineKind parse_baseline_kind(const std::string& s);

}  // namespace rcd
