#include "rcd/signal_moments.hpp"

#include <algorithm>

#include <spdlog/spdlog.h>

namespace rcd {

namespace {

void check_symmetric(const MatrixXd& s, const char* what) {
    if (s.rows() != s.cols()) throw InputError(std::string(what) + ": covariance is not square");
    if (!s.allFinite()) throw InputError(std::string(what) + ": covariance is not finite");
    if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, s.cwiseAbs().maxCoeff()))
        throw InputError(std::string(what) + ": covariance is not symmetric");
}

}  // namespace

Moments historical_moments(const MatrixXd& rows) {
    if (rows.rows() < 2) throw InputError("historical_moments: window must be >= 2");
    Moments m;
    m.mu = column_mean(rows);
    m.sigma = sample_covariance(rows);
    m.provenance.window = rows.rows();
    m.provenance.source = "historical";
    return m;
}

Moments historical_moments(const ReturnPanel& returns, Index window, Index end_row) {
    if (window < 2) throw InputError("historical_moments: window must be >= 2");
    if (end_row < 0) end_row = returns.rows() - 1;
    if (end_row >= returns.rows()) throw InputError("historical_moments: end row out of range");
    if (end_row + 1 < window) throw InputError("historical_moments: window exceeds available history");
    return historical_moments(MatrixXd(returns.returns.middleRows(end_row + 1 - window, window)));
}

Moments scenario_moments(const ScenarioSet& scenarios) {
    if (scenarios.count() < 2) throw InputError("scenario_moments: need N >= 2");
    Moments m = historical_moments(scenarios.scenarios);
    m.provenance.source = "scenario";
    return m;
}

Moments blend(const Moments& synth, const Moments& hist, double lambda) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw InputError("blend: lambda must lie in [0, 1]");
    if (synth.dim() != hist.dim() || synth.sigma.rows() != hist.sigma.rows())
        throw InputError("blend: dimension mismatch");
    Moments m;
    if (lambda == 0.0) {
        m.mu = hist.mu;
        m.sigma = hist.sigma;
    } else if (lambda == 1.0) {
        m.mu = synth.mu;
        m.sigma = synth.sigma;
    } else {
        m.mu = lambda * synth.mu + (1.0 - lambda) * hist.mu;
        m.sigma = lambda * synth.sigma + (1.0 - lambda) * hist.sigma;
        m.sigma = 0.5 * (m.sigma + m.sigma.transpose()).eval();
    }
    m.provenance.lambda = lambda;
    m.provenance.window = hist.provenance.window;
    m.provenance.source = "blend";
    return m;
}

ShrinkResult shrink(const MatrixXd& sigma, double delta) {
    check_symmetric(sigma, "shrink");
    if (!(delta >= 0.0 && delta <= 1.0)) throw InputError("shrink: delta must lie in [0, 1]");
    const Index d = sigma.rows();
    ShrinkResult out;
    out.delta = delta;
    const double tr = sigma.trace();
    if (delta > 0.0 && !(tr > 0.0)) {
        spdlog::warn("shrink: zero-trace covariance, returning 1e-8 I");
        out.sigma = 1e-8 * MatrixXd::Identity(d, d);
        out.degenerate = true;
        return out;
    }
    if (delta == 0.0) {
        out.sigma = sigma;
        return out;
    }
    const double eta = tr / static_cast<double>(d);
    out.sigma = (1.0 - delta) * sigma;
    out.sigma.diagonal().array() += delta * eta;
    return out;
}

double ledoit_wolf_intensity(const MatrixXd& rows) {
    const Index T = rows.rows();
    const Index d = rows.cols();
    if (T < 2) throw InputError("ledoit_wolf_intensity: need at least 2 rows");
    const MatrixXd X = rows.rowwise() - rows.colwise().mean();
    const MatrixXd S = (X.transpose() * X) / static_cast<double>(T - 1);
    const double eta = S.trace() / static_cast<double>(d);
    MatrixXd gap = S;
    gap.diagonal().array() -= eta;
    const double dist = gap.squaredNorm() / static_cast<double>(d);
    if (dist < 1e-30) return 0.0;
    double spread = 0.0;
    for (Index t = 0; t < T; ++t) {
        const VectorXd x = X.row(t).transpose();
        spread += (x * x.transpose() - S).squaredNorm();
    }
    spread /= static_cast<double>(T) * static_cast<double>(T) * static_cast<double>(d);
    return std::clamp(std::min(spread, dist) / dist, 0.0, 1.0);
}

ShrinkResult shrink_auto(const MatrixXd& sigma, const MatrixXd& rows) {
    return shrink(sigma, ledoit_wolf_intensity(rows));
}

nlohmann::json to_json(const Moments& m) {
    nlohmann::json j;
    j["mu"] = std::vector<double>(m.mu.data(), m.mu.data() + m.mu.size());
    nlohmann::json rows = nlohmann::json::array();
    for (Index i = 0; i < m.sigma.rows(); ++i) {
        std::vector<double> r(static_cast<std::size_t>(m.sigma.cols()));
        for (Index k = 0; k < m.sigma.cols(); ++k) r[static_cast<std::size_t>(k)] = m.sigma(i, k);
        rows.push_back(r);
    }
    j["sigma"] = rows;
    nlohmann::json p;
    p["lambda"] = m.provenance.lambda ? nlohmann::json(*m.provenance.lambda) : nlohmann::json(nullptr);
    p["delta"] = m.provenance.delta ? nlohmann::json(*m.provenance.delta) : nlohmann::json(nullptr);
    p["window"] = m.provenance.window;
    p["source"] = m.provenance.source;
    j["provenance"] = p;
    return j;
}

}  // namespace rcd
