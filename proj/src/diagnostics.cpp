#include "rcd/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "rcd/cvar_allocator.hpp"
#include "rcd/stats.hpp"

namespace rcd {

double ks_statistic(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw InputError("ks_statistic: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double best = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] == x) ++i;
        while (j < b.size() && b[j] == x) ++j;
        best = std::max(best, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return best;
}

KsResult ks_avg(const std::vector<ScenarioSet>& sets, const MatrixXd& realized) {
    if (sets.empty() || realized.rows() == 0) throw InputError("ks_avg: empty inputs");
    const Index d = realized.cols();
    KsResult out;
    for (Index j = 0; j < d; ++j) {
        std::vector<double> pooled;
        for (const auto& s : sets) {
            if (s.scenarios.cols() != d) throw InputError("ks_avg: dimension mismatch");
            for (Index i = 0; i < s.count(); ++i) pooled.push_back(s.scenarios(i, j));
        }
        std::vector<double> real(realized.col(j).data(), realized.col(j).data() + realized.rows());
        out.per_asset.push_back(ks_statistic(std::move(pooled), std::move(real)));
    }
    double sum = 0.0;
    for (double v : out.per_asset) sum += v;
    out.average = sum / static_cast<double>(d);
    return out;
}

double energy_score(const MatrixXd& X, const VectorXd& y) {
    const Index N = X.rows();
    if (N < 1) throw InputError("energy_score: no scenarios");
    if (X.cols() != y.size()) throw InputError("energy_score: dimension mismatch");
    double fit = 0.0;
    for (Index i = 0; i < N; ++i) fit += (X.row(i).transpose() - y).norm();
    double spread = 0.0;
    for (Index i = 0; i < N; ++i)
        for (Index k = i + 1; k < N; ++k) spread += (X.row(i) - X.row(k)).norm();
    const double n = static_cast<double>(N);
    // pairs counted once above, each appears twice in the double sum
    return fit / n - spread / (n * n);
}

double energy_score(const ScenarioSet& set, const VectorXd& observed) { return energy_score(set.scenarios, observed); }

double variogram_score(const MatrixXd& X, const VectorXd& y, double p) {
    const Index d = y.size();
    if (d < 2) throw InputError("variogram_score: need d >= 2");
    if (X.cols() != d || X.rows() < 1) throw InputError("variogram_score: dimension mismatch");
    if (!(p > 0.0)) throw InputError("variogram_score: p must be > 0");
    const double n = static_cast<double>(X.rows());
    double score = 0.0;
    for (Index j = 0; j < d; ++j) {
        for (Index k = j + 1; k < d; ++k) {
            // averaged as deviations from the observed term so a perfect forecast scores exactly 0
            const double obs = std::pow(std::abs(y(j) - y(k)), p);
            double diff = 0.0;
            for (Index i = 0; i < X.rows(); ++i) diff += obs - std::pow(std::abs(X(i, j) - X(i, k)), p);
            diff /= n;
            score += diff * diff;
        }
    }
    return score;
}

double variogram_score(const ScenarioSet& set, const VectorXd& observed, double p) {
    return variogram_score(set.scenarios, observed, p);
}

LjungBox ljung_box(const VectorXd& x, int lags) {
    const Index T = x.size();
    if (lags < 1) throw InputError("ljung_box: lags must be >= 1");
    if (T <= lags) throw InputError("ljung_box: series shorter than the lag count");
    const VectorXd c = x.array() - x.mean();
    const double c0 = c.squaredNorm();
    LjungBox out;
    if (!(x.maxCoeff() > x.minCoeff()) || !(c0 > 0.0)) return out;
    const double n = static_cast<double>(T);
    for (int k = 1; k <= lags; ++k) {
        const double rho = c.head(T - k).dot(c.tail(T - k)) / c0;
        out.q += rho * rho / (n - k);
    }
    out.q *= n * (n + 2.0);
    out.p_value = chi2_sf(out.q, lags);
    return out;
}

double kupiec_p_from_lr(double lr) { return chi2_sf(std::max(lr, 0.0), 1.0); }

Kupiec kupiec_uc(Index x, Index T, double alpha) {
    if (T <= 0) throw InputError("kupiec_uc: trials must be > 0");
    if (x < 0 || x > T) throw InputError("kupiec_uc: violations must lie in [0, trials]");
    if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("kupiec_uc: alpha must lie in (0, 1)");
    const double pi0 = 1.0 - alpha;
    const double n = static_cast<double>(T);
    const double v = static_cast<double>(x);
    // 2 T KL(observed rate || pi0); terms with zero count vanish.
    double lr = 0.0;
    if (x > 0) lr += v * std::log(v / (n * pi0));
    if (x < T) lr += (n - v) * std::log((n - v) / (n * (1.0 - pi0)));
    lr = std::max(0.0, 2.0 * lr);
    return {lr, kupiec_p_from_lr(lr)};
}

double cvar_error_bps(const VectorXd& predicted, const VectorXd& realized, double alpha) {
    if (predicted.size() == 0 || realized.size() == 0) throw InputError("cvar_error_bps: empty series");
    if (predicted.size() != realized.size()) throw InputError("cvar_error_bps: series are not aligned");
    return std::abs(predicted.mean() - cvar_empirical(realized, alpha).cvar) * 1e4;
}

double annualized_sharpe(const VectorXd& r) {
    if (r.size() < 2) return 0.0;
    const double m = r.mean();
    const double sd = std::sqrt((r.array() - m).square().sum() / static_cast<double>(r.size() - 1));
    if (!(sd > 0.0)) return 0.0;
    return m / sd * std::sqrt(252.0);
}

SharpeUplift sharpe_uplift_ci(const VectorXd& a, const VectorXd& b, const BootstrapConfig& cfg) {
    if (a.size() != b.size()) throw InputError("sharpe_uplift_ci: series lengths differ");
    if (a.size() < 2) throw InputError("sharpe_uplift_ci: need at least 2 observations");
    if (cfg.B < 1) throw InputError("sharpe_uplift_ci: B must be >= 1");
    const Index T = a.size();
    SharpeUplift out;
    out.delta = annualized_sharpe(a) - annualized_sharpe(b);
    std::vector<double> reps(static_cast<std::size_t>(cfg.B));
    VectorXd ra(T), rb(T);
    Index le = 0, ge = 0;
    for (int k = 0; k < cfg.B; ++k) {
        const auto idx = stationary_bootstrap_indices(T, T, cfg.block, derive_seed(cfg.seed, static_cast<std::uint64_t>(k)));
        for (Index t = 0; t < T; ++t) {
            ra(t) = a(idx[static_cast<std::size_t>(t)]);
            rb(t) = b(idx[static_cast<std::size_t>(t)]);
        }
        const double dk = annualized_sharpe(ra) - annualized_sharpe(rb);
        reps[static_cast<std::size_t>(k)] = dk;
        if (dk <= 0.0) ++le;
        if (dk >= 0.0) ++ge;
    }
    out.lo = empirical_quantile(reps, 0.025);
    out.hi = empirical_quantile(reps, 0.975);
    const double frac = static_cast<double>(std::min(le, ge)) / static_cast<double>(cfg.B);
    out.p_two_sided = std::min(1.0, 2.0 * frac);
    return out;
}

nlohmann::json to_json(const DiagnosticsReport& r, const std::vector<std::string>& assets) {
    nlohmann::json ks = nlohmann::json::object();
    for (std::size_t j = 0; j < r.ks_per_asset.size(); ++j)
        ks[j < assets.size() ? assets[j] : std::to_string(j)] = r.ks_per_asset[j];
    return {{"generator", r.generator},
            {"dates", r.dates},
            {"ks_avg", r.ks_avg},
            {"ks_per_asset", ks},
            {"energy_score", r.energy_score},
            {"variogram_score", r.variogram_score},
            {"ljung_box_p_absr", r.ljung_box_p_absr},
            {"ljung_box_p_absr_realized", r.ljung_box_p_absr_realized},
            {"kupiec_uc_p", r.kupiec_uc_p},
            {"violations", r.violations},
            {"trials", r.trials},
            {"cvar_error_bps", r.cvar_error_bps},
            {"ess_value", r.ess_value}};
}

DiagnosticsReport diagnostics_from_json(const nlohmann::json& j) {
    DiagnosticsReport r;
    try {
        r.generator = j.at("generator").get<std::string>();
        r.dates = j.at("dates").get<Index>();
        r.ks_avg = j.at("ks_avg").get<double>();
        for (const auto& [k, v] : j.at("ks_per_asset").items()) r.ks_per_asset.push_back(v.get<double>());
        r.energy_score = j.at("energy_score").get<double>();
        r.variogram_score = j.at("variogram_score").get<double>();
        r.ljung_box_p_absr = j.at("ljung_box_p_absr").get<double>();
        r.ljung_box_p_absr_realized = j.at("ljung_box_p_absr_realized").get<double>();
        r.kupiec_uc_p = j.at("kupiec_uc_p").get<double>();
        r.violations = j.at("violations").get<Index>();
        r.trials = j.at("trials").get<Index>();
        r.cvar_error_bps = j.at("cvar_error_bps").get<double>();
        r.ess_value = j.at("ess_value").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("diagnostics json: ") + e.what());
    }
    return r;
}

void write_table1_csv(const std::vector<DiagnosticsReport>& rows, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write file: " + path.string());
    out << "generator,KS,ES,VS,LB_p,UC_p,CVaR_err_bps\n";
    for (const auto& r : rows)
        out << r.generator << ',' << format_double(r.ks_avg) << ',' << format_double(r.energy_score) << ','
            << format_double(r.variogram_score) << ',' << format_double(r.ljung_box_p_absr) << ','
            << format_double(r.kupiec_uc_p) << ',' << format_double(r.cvar_error_bps) << '\n';
}

}  // namespace rcd
