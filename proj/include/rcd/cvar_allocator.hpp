#pragma once

#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "rcd/common.hpp"
#include "rcd/qp_solver.hpp"

namespace rcd {

struct AllocationProblem {
    VectorXd mu_hat;
    MatrixXd sigma_hat;
    MatrixXd scenarios;  // N x d, row i is r^(i)
    double alpha = 0.95;
    double lambda_mu = 1.0;
    double gamma = 1.0;
    VectorXd lower, upper;
    VectorXd prev_weights;
    double tau = 0.20;   // +inf disables the turnover cap
    double kappa = 0.0;
    bool cvar_term = true;  // false drops zeta, u and the epigraph rows (mean-variance only)

    Index dim() const { return mu_hat.size(); }
    Index scenario_count() const { return cvar_term ? scenarios.rows() : 0; }
    /// Throws InputError on dimension or range violations.
    void validate() const;
};

/// Problem with box bounds [lo, hi] for every asset, w_prev = equal weight.
AllocationProblem make_problem(const VectorXd& mu, const MatrixXd& sigma, const MatrixXd& scenarios,
                               double lo = 0.0, double hi = 1.0);

struct CvarValue {
    double zeta = 0.0;
    double cvar = 0.0;
};

/// min over zeta of zeta + E(L - zeta)_+ / (1 - alpha); the smallest minimizing order statistic.
CvarValue cvar_empirical(const VectorXd& losses, double alpha);

/// Index bookkeeping for the epigraph program.
struct EpigraphLayout {
    Index d = 0, N = 0;
    bool cvar = true, split = true, tau_row = true;
    // variable offsets
    Index w = 0, zeta = 0, u = 0, sp = 0, sm = 0, n = 0;
    // inequality row offsets
    Index lo = 0, hi = 0, nn = 0, epi = 0, sp_row = 0, sm_row = 0, tau = 0, m = 0;
    // equalities: budget row 0, split rows 1..d
    Index p = 0;
};

/// The epigraph QP over (w, zeta, u_1..N, s+, s-) with a KKT solve that eliminates the u block
/// through its arrow structure.
class EpigraphQp : public QpProblem {
public:
    EpigraphQp(const AllocationProblem& problem, bool eliminate_split);

    const EpigraphLayout& layout() const { return lay_; }
    const AllocationProblem& problem() const { return prob_; }

    Index variables() const override { return lay_.n; }
    Index equalities() const override { return lay_.p; }
    Index inequalities() const override { return lay_.m; }
    const VectorXd& c() const override { return c_; }
    const VectorXd& b() const override { return b_; }
    const VectorXd& h() const override { return h_; }
    VectorXd mul_q(const VectorXd& x) const override;
    VectorXd mul_a(const VectorXd& x) const override;
    VectorXd mul_at(const VectorXd& y) const override;
    VectorXd mul_g(const VectorXd& x) const override;
    VectorXd mul_gt(const VectorXd& z) const override;
    void factor(const VectorXd& D) override;
    void solve(const VectorXd& r1, const VectorXd& r2, VectorXd& dx, VectorXd& v) const override;

    DenseQp to_dense() const;

private:
    AllocationProblem prob_;
    EpigraphLayout lay_;
    MatrixXd Qww_;
    VectorXd c_, b_, h_;
    // factorization state
    Index core_n_ = 0;
    VectorXd hu_, d_epi_;
    Eigen::FullPivLU<MatrixXd> lu_;

    Index core_index(Index var) const;
};

/// Full-form program (split variables always present, turnover row omitted when tau is infinite).
/// Throws InputError when the box cannot meet the budget.
EpigraphQp build_epigraph_qp(const AllocationProblem& problem);

struct AllocationDuals {
    double nu = 0.0;           // budget
    VectorXd box_lo, box_hi;   // alpha-, alpha+
    double turnover = 0.0;     // rho
    VectorXd tail;             // normalized tail weights, sum to 1, each in [0, 1/((1-alpha)N)]
    VectorXd slack_nonneg;     // beta_i
};

struct AllocationResult {
    VectorXd weights;
    double zeta = 0.0;
    VectorXd slacks;  // u_i
    VectorXd split_plus, split_minus;
    double objective = 0.0;
    AllocationDuals duals;
    QpStatus status = QpStatus::MaxIter;
    KktResiduals kkt;
    int iterations = 0;
    std::string certificate;  // set when infeasible
};

/// Interior-point solve. Infeasible problems return status Infeasible with a certificate.
AllocationResult solve(const AllocationProblem& problem, const IpmOptions& opts = {});

struct ObjectiveTerms {
    double mean = 0.0;      // -lambda_mu mu'w
    double variance = 0.0;  // gamma w'Sigma w
    double cvar = 0.0;      // zeta + sum u / ((1-alpha)N)
    double penalty = 0.0;   // kappa sum(s+ + s-)
    double total() const { return mean + variance + cvar + penalty; }
};

ObjectiveTerms objective_terms(const AllocationProblem& problem, const AllocationResult& result);
/// Objective of a weight vector with the CVaR term evaluated exactly by cvar_empirical.
double allocation_objective(const AllocationProblem& problem, const VectorXd& w);

struct AuditRecord {
    std::string label;
    std::vector<Index> active_lower, active_upper;
    bool turnover_binding = false;
    VectorXd tail_weights;  // gamma_i / ((1-alpha)N)
    VectorXd tail_gamma;    // gamma_i in [0, 1]
    double zeta_stationarity = 0.0;  // 1 - sum of normalized tail weights
    double nu = 0.0;
    double rho = 0.0;
    double max_box_dual = 0.0;
    int iterations = 0;
    ObjectiveTerms terms;
    KktResiduals kkt;
    Index tail_at_cap = 0, tail_interior = 0, tail_zero = 0;
    bool capped_simplex_ok = false;
};

/// Requires an optimal result.
AuditRecord kkt_audit(const AllocationProblem& problem, const AllocationResult& result,
                      const std::string& label = "");

/// prev + min(1, tau / |target - prev|_1) (target - prev).
VectorXd project_partial_rebalance(const VectorXd& target, const VectorXd& prev, double tau);

nlohmann::json to_json(const AllocationProblem& p);
nlohmann::json to_json(const AllocationResult& r);
nlohmann::json to_json(const AuditRecord& a);

/// Append one JSON document as a line.
void append_jsonl(const std::filesystem::path& path, const nlohmann::json& record);

}  // namespace rcd
