#include "rcd/backtest.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>

#include <spdlog/spdlog.h>

#include "rcd/diffusion.hpp"
#include "rcd/signal_moments.hpp"

namespace rcd {

double max_drawdown(const std::vector<double>& nav) {
    double peak = -std::numeric_limits<double>::infinity();
    double dd = 0.0;
    for (double v : nav) {
        peak = std::max(peak, v);
        dd = std::max(dd, (peak - v) / peak);
    }
    return dd;
}

Metrics compute_metrics(const std::vector<double>& nav) {
    if (nav.size() < 2) throw InputError("compute_metrics: need at least 2 NAV points");
    for (double v : nav)
        if (!(v > 0.0) || !std::isfinite(v)) throw InputError("compute_metrics: NAV must be positive and finite");
    const std::size_t T = nav.size() - 1;
    VectorXd r(static_cast<Index>(T));
    for (std::size_t t = 0; t < T; ++t) r(static_cast<Index>(t)) = nav[t + 1] / nav[t] - 1.0;
    Metrics m;
    const double years_inv = 252.0 / static_cast<double>(T);
    m.cagr = std::pow(nav.back() / nav.front(), years_inv) - 1.0;
    const double mean = r.mean();
    const double var = T > 1 ? (r.array() - mean).square().sum() / static_cast<double>(T - 1) : 0.0;
    m.vol_annual = std::sqrt(var) * std::sqrt(252.0);
    m.sharpe = m.vol_annual > 0.0 ? mean * 252.0 / m.vol_annual : 0.0;
    const double downside = std::sqrt(r.cwiseMin(0.0).squaredNorm() / static_cast<double>(T)) * std::sqrt(252.0);
    if (downside > 0.0)
        m.sortino = mean * 252.0 / downside;
    else
        m.sortino = mean > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    m.maxdd = max_drawdown(nav);
    if (m.maxdd > 0.0)
        m.calmar = m.cagr / m.maxdd;
    else
        m.calmar = m.cagr > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    return m;
}

double apply_trade_cost(double nav, double turnover, double cost_bps) {
    return nav * (1.0 - (cost_bps / 1e4) * turnover);
}

std::string to_string(StrategyKind k) {
    switch (k) {
        case StrategyKind::EW: return "EW";
        case StrategyKind::RP: return "RP";
        case StrategyKind::BL: return "BL";
        case StrategyKind::SBB: return "SBB";
        case StrategyKind::MARCD: return "MARCD";
    }
    return "?";
}

StrategyKind parse_strategy_kind(const std::string& s) {
    for (auto k : {StrategyKind::EW, StrategyKind::RP, StrategyKind::BL, StrategyKind::SBB, StrategyKind::MARCD})
        if (to_string(k) == s) return k;
    throw InputError("unknown strategy: " + s);
}

void BacktestConfig::validate(Index d) const {
    if (test_start.empty() || test_end.empty()) throw InputError("backtest: test split dates are required");
    if (test_start > test_end) throw InputError("backtest: test_start is after test_end");
    if (!(cost_bps >= 0.0)) throw InputError("backtest: cost_bps must be >= 0");
    if (!(tau >= 0.0)) throw InputError("backtest: tau must be >= 0");
    if (scenarios < 2) throw InputError("backtest: scenarios must be >= 2");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw InputError("backtest: lambda must lie in [0, 1]");
    if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("backtest: alpha must lie in (0, 1)");
    if (lower > upper) throw InputError("backtest: lower bound exceeds upper bound");
    // the first rebalance starts from equal weight, which must be admissible
    const double ew = 1.0 / static_cast<double>(d);
    if (lower > ew || upper < ew) throw InputError("backtest: equal weight must lie inside the box");
    if (hmm_k < 1 || hmm_window < 2 || hmm_stride < 1) throw InputError("backtest: invalid HMM settings");
    if (moments_window < 2) throw InputError("backtest: moments window must be >= 2");
    if (shrinkage && !(*shrinkage >= 0.0 && *shrinkage <= 1.0)) throw InputError("backtest: shrinkage must lie in [0, 1]");
    if (!(sbb_block >= 1.0)) throw InputError("backtest: sbb block must be >= 1");
    if (strategies.empty()) throw InputError("backtest: no strategies selected");
    std::set<std::string> names;
    for (const auto& s : strategies)
        if (!names.insert(s.name).second) throw InputError("backtest: duplicate strategy name " + s.name);
    bl.validate(d);
}

const StrategyRun* BacktestReport::find(const std::string& name) const {
    for (const auto& r : runs)
        if (r.spec.name == name) return &r;
    return nullptr;
}

std::vector<Index> rebalance_rows(const std::vector<std::string>& dates, Index first, Index last) {
    std::vector<Index> rows{first};
    for (Index t = first + 1; t < last; ++t)
        if (dates[static_cast<std::size_t>(t)].substr(0, 7) != dates[static_cast<std::size_t>(t + 1)].substr(0, 7))
            rows.push_back(t);
    return rows;
}

namespace {

struct Shared {
    const BacktestConfig& cfg;
    const ReturnPanel& data;
    const GeneratorModels& models;
    MatrixXd posteriors;
    std::map<Index, Moments> hist;
    std::map<Index, MatrixXd> rp_sigma;
    std::map<std::tuple<int, Index, Index>, ScenarioSet> scenarios;
};

const Moments& hist_at(Shared& sh, Index t) {
    auto it = sh.hist.find(t);
    if (it == sh.hist.end()) it = sh.hist.emplace(t, historical_moments(sh.data, sh.cfg.moments_window, t)).first;
    return it->second;
}

MatrixXd window_rows(const Shared& sh, Index t) {
    return sh.data.returns.middleRows(t - sh.cfg.moments_window + 1, sh.cfg.moments_window);
}

MatrixXd shrunk(const Shared& sh, const MatrixXd& sigma, Index t, double* delta) {
    const ShrinkResult s = sh.cfg.shrinkage ? shrink(sigma, *sh.cfg.shrinkage) : shrink_auto(sigma, window_rows(sh, t));
    if (delta) *delta = s.delta;
    return s.sigma;
}

const ScenarioSet& scenarios_at(Shared& sh, const StrategySpec& spec, Index t, Index N) {
    const int kind = spec.kind == StrategyKind::SBB ? 0 : (spec.unconditional ? 2 : 1);
    const auto key = std::make_tuple(kind, N, t);
    auto it = sh.scenarios.find(key);
    if (it != sh.scenarios.end()) return it->second;
    const std::uint64_t seed = derive_seed(derive_seed(sh.cfg.seed, static_cast<std::uint64_t>(kind) + 1),
                                           static_cast<std::uint64_t>(t));
    ScenarioSet set;
    if (kind == 0) {
        set = sbb_sample(window_rows(sh, t), sh.cfg.sbb_block, N, seed);
    } else {
        const DenoiserParams* params = kind == 1 ? sh.models.conditional : sh.models.unconditional;
        if (!params) throw InputError(std::string("no ") + (kind == 1 ? "conditional" : "unconditional") + " generator supplied");
        RegimeContext ctx;
        if (kind == 1)
            ctx = context_features(VectorXd(sh.posteriors.row(t).transpose()), sh.data, t, sh.cfg.context);
        else
            ctx.z = VectorXd::Zero(sh.cfg.context.dimension(sh.cfg.hmm_k, sh.data.cols()));
        set = sample(*params, sh.models.schedule, ctx, N, seed);
    }
    return sh.scenarios.emplace(key, std::move(set)).first->second;
}

VectorXd cvar_target(Shared& sh, const StrategySpec& spec, Index t, const VectorXd& held, RebalanceRow& row,
                     std::vector<nlohmann::json>& audit) {
    const auto& cfg = sh.cfg;
    const Index d = sh.data.cols();
    const Index N = spec.scenarios.value_or(cfg.scenarios);
    const ScenarioSet& set = scenarios_at(sh, spec, t, N);
    const Moments m = blend(scenario_moments(set), hist_at(sh, t), spec.lambda.value_or(cfg.lambda));
    AllocationProblem p;
    p.mu_hat = m.mu;
    p.sigma_hat = shrunk(sh, m.sigma, t, nullptr);
    p.scenarios = set.scenarios;
    p.alpha = spec.alpha.value_or(cfg.alpha);
    p.lambda_mu = spec.lambda_mu.value_or(cfg.lambda_mu);
    p.gamma = spec.gamma.value_or(cfg.gamma);
    p.kappa = spec.kappa.value_or(cfg.kappa);
    p.tau = spec.tau.value_or(cfg.tau);
    p.lower = VectorXd::Constant(d, cfg.lower);
    p.upper = VectorXd::Constant(d, cfg.upper);
    p.prev_weights = held;
    p.cvar_term = spec.cvar_term;

    const AllocationResult res = solve(p);
    row.status = to_string(res.status);
    if (res.status == QpStatus::Infeasible) throw NumericalError("allocation infeasible: " + res.certificate);
    nlohmann::json rec;
    if (res.status == QpStatus::Optimal) {
        rec = to_json(kkt_audit(p, res, spec.name + " " + row.date));
    } else {
        spdlog::warn("{} {}: solver stopped at {} iterations (max KKT residual {:.3e})", spec.name, row.date,
                     res.iterations, res.kkt.max());
        rec["kkt_residuals"] = to_json(res)["kkt_residuals"];
        rec["iterations"] = res.iterations;
    }
    rec["strategy"] = spec.name;
    rec["date"] = row.date;
    rec["status"] = row.status;
    rec["weights"] = to_std_vector(res.weights);
    row.audit_line = static_cast<Index>(audit.size());
    audit.push_back(std::move(rec));

    const CvarValue cv = cvar_empirical(-(set.scenarios * res.weights), p.alpha);
    row.predicted_var = cv.zeta;
    row.predicted_cvar = cv.cvar;
    return res.weights;
}

VectorXd baseline_target(Shared& sh, const StrategySpec& spec, Index t) {
    const Index d = sh.data.cols();
    switch (spec.kind) {
        case StrategyKind::EW: return equal_weight(d);
        case StrategyKind::RP: {
            auto it = sh.rp_sigma.find(t);
            if (it == sh.rp_sigma.end()) it = sh.rp_sigma.emplace(t, shrunk(sh, hist_at(sh, t).sigma, t, nullptr)).first;
            return risk_parity(it->second);
        }
        case StrategyKind::BL: {
            const MatrixXd sigma = shrunk(sh, hist_at(sh, t).sigma, t, nullptr);
            return black_litterman_no_views(sh.cfg.bl, sigma).target;
        }
        default: break;
    }
    throw InputError("not a baseline: " + spec.name);
}

StrategyRun run_strategy(Shared& sh, const StrategySpec& spec, Index t0, Index last, const std::vector<Index>& rebal,
                         std::vector<nlohmann::json>& audit) {
    const auto& cfg = sh.cfg;
    const Index d = sh.data.cols();
    StrategyRun run;
    run.spec = spec;
    VectorXd w = equal_weight(d);
    double nav = 1.0;
    std::size_t next = 0;
    for (Index t = t0; t <= last; ++t) {
        if (t > t0) {
            const VectorXd r = sh.data.returns.row(t).transpose();
            const double gross = 1.0 + w.dot(r);
            if (!(gross > 0.0)) throw NumericalError(spec.name + ": portfolio wiped out on " + sh.data.dates[static_cast<std::size_t>(t)]);
            nav *= gross;
            w = w.cwiseProduct((r.array() + 1.0).matrix()) / gross;
        }
        if (next < rebal.size() && rebal[next] == t) {
            ++next;
            RebalanceRow row;
            row.date = sh.data.dates[static_cast<std::size_t>(t)];
            row.index = t;
            row.pre_weights = w;
            try {
                VectorXd target;
                if (spec.kind == StrategyKind::SBB || spec.kind == StrategyKind::MARCD) {
                    target = cvar_target(sh, spec, t, w, row, audit);
                } else {
                    target = project_partial_rebalance(baseline_target(sh, spec, t), w, spec.tau.value_or(cfg.tau));
                    row.status = "target";
                }
                row.weights = target;
            } catch (const InputError& e) {
                throw InputError("rebalance " + row.date + " (" + spec.name + "): " + e.what());
            } catch (const NumericalError& e) {
                throw NumericalError("rebalance " + row.date + " (" + spec.name + "): " + e.what());
            }
            row.turnover = (row.weights - w).cwiseAbs().sum();
            const double after = apply_trade_cost(nav, row.turnover, cfg.cost_bps);
            row.cost = nav - after;
            run.total_cost += row.cost;
            nav = after;
            w = row.weights;
            run.rebalances.push_back(std::move(row));
        }
        run.nav.push_back(nav);
    }
    run.metrics = compute_metrics(run.nav);
    double to = 0.0;
    for (const auto& r : run.rebalances) to += r.turnover;
    run.metrics.avg_turnover = run.rebalances.empty() ? 0.0 : to / static_cast<double>(run.rebalances.size());
    return run;
}

}  // namespace

BacktestReport run_walk_forward(const BacktestConfig& cfg, const ReturnPanel& data, const GeneratorModels& models,
                                const std::vector<RegimeRefit>* refits) {
    const Index d = data.cols();
    cfg.validate(d);
    Index first = -1;
    for (Index t = 0; t < data.rows(); ++t)
        if (data.dates[static_cast<std::size_t>(t)] >= cfg.test_start) {
            first = t;
            break;
        }
    const Index last = data.last_index_on_or_before(cfg.test_end);
    if (first < 1 || last <= first) throw InputError("backtest: the test split is not covered by the data");
    const Index t0 = first - 1;

    bool needs_regimes = false;
    for (const auto& s : cfg.strategies) needs_regimes |= s.kind == StrategyKind::MARCD && !s.unconditional;
    const Index history = std::max(cfg.moments_window, needs_regimes ? std::max(cfg.hmm_window, cfg.context.lookback) : 0);
    if (t0 + 1 < history) throw InputError("backtest: not enough history before the test split");

    Shared sh{cfg, data, models, {}, {}, {}, {}};
    if (needs_regimes) {
        const ReturnPanel upto = data.slice(0, last + 1);
        std::vector<RegimeRefit> own;
        if (!refits) {
            own = rolling_refit(upto, cfg.hmm_k, cfg.hmm_window, cfg.hmm_stride, cfg.em, -1, cfg.hmm_align);
            refits = &own;
        }
        if (!model_at(*refits, t0)) throw InputError("backtest: no regime model fitted before the test split");
        std::vector<RegimeRefit> usable;
        for (const auto& r : *refits)
            if (r.index <= last) usable.push_back(r);
        sh.posteriors = walk_forward_posteriors(upto, usable, cfg.hmm_window);
    }

    BacktestReport report;
    report.assets = data.assets;
    report.first_index = t0;
    report.dates.assign(data.dates.begin() + t0, data.dates.begin() + last + 1);
    const auto rebal = rebalance_rows(data.dates, t0, last);
    for (const auto& spec : cfg.strategies) {
        spdlog::info("backtest: {} over {} rebalances", spec.name, rebal.size());
        report.runs.push_back(run_strategy(sh, spec, t0, last, rebal, report.audit));
    }
    return report;
}

namespace {

nlohmann::json num(double x) {
    if (std::isfinite(x)) return x;
    return format_double(x);
}

}  // namespace

nlohmann::json to_json(const Metrics& m) {
    return {{"cagr", num(m.cagr)},     {"vol_annual", num(m.vol_annual)}, {"sharpe", num(m.sharpe)},
            {"sortino", num(m.sortino)}, {"maxdd", num(m.maxdd)},          {"calmar", num(m.calmar)},
            {"avg_turnover", num(m.avg_turnover)}};
}

nlohmann::json to_json(const BacktestReport& r) {
    nlohmann::json j;
    j["assets"] = r.assets;
    j["first_date"] = r.dates.front();
    j["last_date"] = r.dates.back();
    j["days"] = r.dates.size();
    j["strategies"] = nlohmann::json::array();
    for (const auto& run : r.runs) {
        nlohmann::json s;
        s["name"] = run.spec.name;
        s["kind"] = to_string(run.spec.kind);
        nlohmann::json ov = nlohmann::json::object();
        if (run.spec.lambda) ov["lambda"] = *run.spec.lambda;
        if (run.spec.gamma) ov["gamma"] = *run.spec.gamma;
        if (run.spec.lambda_mu) ov["lambda_mu"] = *run.spec.lambda_mu;
        if (run.spec.kappa) ov["kappa"] = *run.spec.kappa;
        if (run.spec.tau) ov["tau"] = *run.spec.tau;
        if (run.spec.alpha) ov["alpha"] = *run.spec.alpha;
        if (run.spec.scenarios) ov["scenarios"] = *run.spec.scenarios;
        if (!run.spec.cvar_term) ov["cvar_term"] = false;
        if (run.spec.unconditional) ov["unconditional"] = true;
        s["overrides"] = ov;
        s["metrics"] = to_json(run.metrics);
        s["total_cost"] = run.total_cost;
        s["final_nav"] = run.nav.back();
        s["rebalances"] = nlohmann::json::array();
        for (const auto& row : run.rebalances) {
            nlohmann::json rj{{"date", row.date},
                              {"turnover", row.turnover},
                              {"cost", row.cost},
                              {"status", row.status},
                              {"weights", to_std_vector(row.weights)}};
            if (row.audit_line >= 0) {
                rj["audit_line"] = row.audit_line;
                rj["predicted_var"] = row.predicted_var;
                rj["predicted_cvar"] = row.predicted_cvar;
            }
            s["rebalances"].push_back(rj);
        }
        j["strategies"].push_back(s);
    }
    return j;
}

void write_backtest_outputs(const BacktestReport& r, const std::filesystem::path& dir) {
    auto open = [&](const char* name) {
        std::ofstream out(dir / name);
        if (!out) throw InputError("cannot write file: " + (dir / name).string());
        return out;
    };
    {
        auto out = open("backtest_report.json");
        out << to_json(r).dump(2) << '\n';
    }
    {
        auto out = open("nav.csv");
        out << "date";
        for (const auto& run : r.runs) out << ',' << run.spec.name;
        out << '\n';
        for (std::size_t t = 0; t < r.dates.size(); ++t) {
            out << r.dates[t];
            for (const auto& run : r.runs) out << ',' << format_double(run.nav[t]);
            out << '\n';
        }
    }
    {
        auto out = open("weights.csv");
        out << "strategy,date,asset,pre_weight,weight\n";
        for (const auto& run : r.runs)
            for (const auto& row : run.rebalances)
                for (std::size_t j = 0; j < r.assets.size(); ++j)
                    out << run.spec.name << ',' << row.date << ',' << r.assets[j] << ','
                        << format_double(row.pre_weights(static_cast<Index>(j))) << ','
                        << format_double(row.weights(static_cast<Index>(j))) << '\n';
    }
    {
        auto out = open("audit.jsonl");
        for (const auto& rec : r.audit) out << rec.dump() << '\n';
    }
}

}  // namespace rcd
