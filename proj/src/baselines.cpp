#include "rcd/baselines.hpp"

#include <cmath>

namespace rcd {

namespace {

void require_pd(const MatrixXd& sigma, const char* who) {
    if (sigma.rows() != sigma.cols() || sigma.rows() == 0) throw InputError(std::string(who) + ": covariance must be square");
    if (!sigma.allFinite() || sigma.llt().info() != Eigen::Success)
        throw InputError(std::string(who) + ": covariance is not positive definite");
}

}  // namespace

void BaselineSpec::validate(Index d) const {
    if (!(tau_bl > 0.0)) throw InputError("baseline: tau_bl must be > 0");
    if (!(risk_aversion > 0.0)) throw InputError("baseline: risk_aversion must be > 0");
    if (market_weights.size() == 0) return;
    if (market_weights.size() != d) throw InputError("baseline: market_weights has the wrong length");
    if (market_weights.minCoeff() < 0.0) throw InputError("baseline: market_weights must be >= 0");
    if (std::abs(market_weights.sum() - 1.0) > 1e-8) throw InputError("baseline: market_weights must sum to 1");
}

VectorXd BaselineSpec::market(Index d) const { return market_weights.size() ? market_weights : equal_weight(d); }

VectorXd equal_weight(Index d) {
    if (d < 1) throw InputError("equal_weight: d must be >= 1");
    return VectorXd::Constant(d, 1.0 / static_cast<double>(d));
}

VectorXd risk_contributions(const MatrixXd& sigma, const VectorXd& w) { return w.cwiseProduct(sigma * w); }

VectorXd risk_parity(const MatrixXd& sigma, double tol, int max_iter, RiskParityInfo* info) {
    require_pd(sigma, "risk_parity");
    const Index d = sigma.rows();
    const double b = 1.0 / static_cast<double>(d);
    VectorXd y = sigma.diagonal().cwiseSqrt().cwiseInverse();
    y *= std::sqrt(b / y.dot(sigma * y));
    VectorXd sy = sigma * y;
    int it = 0;
    double spread = 0.0;
    for (; it < max_iter; ++it) {
        for (Index i = 0; i < d; ++i) {
            const double s_ii = sigma(i, i);
            const double c = sy(i) - s_ii * y(i);
            const double yi = (-c + std::sqrt(c * c + 4.0 * s_ii * b)) / (2.0 * s_ii);
            sy += sigma.col(i) * (yi - y(i));
            y(i) = yi;
        }
        sy = sigma * y;
        const VectorXd rc = y.cwiseProduct(sy);
        spread = (rc.maxCoeff() - rc.minCoeff()) / rc.mean();
        if (spread <= tol) break;
    }
    if (info) {
        info->iterations = it;
        info->spread = spread;
    }
    return y / y.sum();
}

BlackLitterman black_litterman_no_views(const BaselineSpec& spec, const MatrixXd& sigma) {
    require_pd(sigma, "black_litterman");
    spec.validate(sigma.rows());
    BlackLitterman out;
    out.target = spec.market(sigma.rows());
    out.mu_bl = spec.risk_aversion * (sigma * out.target);
    return out;
}

BaselineKind parse_baseline_kind(const std::string& s) {
    if (s == "EW") return BaselineKind::EW;
    if (s == "RP") return BaselineKind::RP;
    if (s == "BL") return BaselineKind::BL;
    throw InputError("unknown baseline: " + s);
}

}  // namespace rcd
