#include "rcd/commands.hpp"

#include <chrono>
#include <functional>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include <spdlog/spdlog.h>

#include "rcd/synthetic.hpp"

namespace rcd {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write file: " + path.string());
    out << text;
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

nlohmann::json read_json(const fs::path& path, const char* producer) {
    std::ifstream in(path);
    if (!in) throw InputError("missing " + path.filename().string() + " in the run directory; run `rcd " + producer + "` first");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw InputError("cannot parse " + path.string() + ": " + e.what());
    }
}

void prepare(const RunConfig& cfg, const fs::path& run_dir) {
    fs::create_directories(run_dir);
    write_text(run_dir / "resolved_config.toml", resolved_config_toml(cfg));
}

ReturnPanel load_returns(const fs::path& run_dir) {
    const fs::path p = run_dir / "returns.csv";
    if (!fs::exists(p)) throw InputError("missing returns.csv in the run directory; run `rcd ingest` first");
    return load_return_csv(p);
}

std::vector<RegimeRefit> load_refits(const fs::path& run_dir) {
    return refits_from_json(read_json(run_dir / "hmm_refits.json", "fit-hmm"));
}

Index last_row_on_or_before(const ReturnPanel& r, const std::string& date, const char* what) {
    const Index t = r.last_index_on_or_before(normalize_iso_date(date));
    if (t < 0) throw InputError(std::string("no data on or before ") + what + " " + date);
    return t;
}

Index first_row_on_or_after(const ReturnPanel& r, const std::string& date) {
    const std::string d = normalize_iso_date(date);
    for (Index t = 0; t < r.rows(); ++t)
        if (r.dates[static_cast<std::size_t>(t)] >= d) return t;
    throw InputError("no data on or after " + date);
}

/// Crisis coordinate of z: the posterior block comes first when present.
Index crisis_coordinate(const RunConfig& cfg, const std::vector<RegimeRefit>& refits) {
    if (!cfg.backtest.context.posteriors) return -1;
    return refits.back().model.crisis_state();
}

struct TrainingPairs {
    MatrixXd targets, contexts;
    std::string first_date, last_date;
};

TrainingPairs training_pairs(const RunConfig& cfg, const ReturnPanel& returns, const std::vector<RegimeRefit>& refits) {
    const Index end = last_row_on_or_before(returns, cfg.train_end, "train_end");
    const Index begin = first_row_on_or_after(returns, cfg.train_start);
    const MatrixXd post = walk_forward_posteriors(returns.slice(0, end + 1), refits, cfg.backtest.hmm_window);
    std::vector<Index> rows;
    for (Index t = std::max(begin, cfg.backtest.context.lookback - 1); t + 1 <= end; ++t)
        if (post.row(t).allFinite()) rows.push_back(t);
    if (rows.size() < 2) throw InputError("train-gen: no training pairs inside the train split (window too long?)");
    const Index C = cfg.backtest.context.dimension(cfg.backtest.hmm_k, returns.cols());
    TrainingPairs tp;
    tp.targets.resize(static_cast<Index>(rows.size()), returns.cols());
    tp.contexts.resize(static_cast<Index>(rows.size()), C);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const Index t = rows[i];
        tp.contexts.row(static_cast<Index>(i)) =
            context_features(VectorXd(post.row(t).transpose()), returns, t, cfg.backtest.context).z.transpose();
        tp.targets.row(static_cast<Index>(i)) = returns.returns.row(t + 1);
    }
    tp.first_date = returns.dates[static_cast<std::size_t>(rows.front() + 1)];
    tp.last_date = returns.dates[static_cast<std::size_t>(rows.back() + 1)];
    return tp;
}

nlohmann::json train_sidecar(const RunConfig& cfg, const TrainResult& res, const TrainingPairs& tp, bool unconditional,
                             const GateProbe* probe) {
    nlohmann::json j;
    j["tag"] = cfg.tail.eta == 0.0 ? "unweighted" : "tail-weighted";
    j["conditioning"] = unconditional ? "unconditional" : "regime";
    j["tail"] = {{"q", cfg.tail.q},
                 {"eta", cfg.tail.eta},
                 {"quantile_ema", cfg.tail.quantile_ema},
                 {"orientation", cfg.tail.orientation == TailOrientation::Adverse ? "adverse" : "literal"},
                 {"final_threshold", res.state.quantile_value}};
    j["ess"] = ess(cfg.tail.q, cfg.tail.eta, static_cast<double>(cfg.train.batch));
    j["architecture"] = {{"data_dim", res.ema_params.arch.data_dim},
                         {"context_dim", res.ema_params.arch.context_dim},
                         {"time_embed_dim", res.ema_params.arch.time_embed_dim},
                         {"hidden_width", res.ema_params.arch.hidden_width},
                         {"hidden_layers", res.ema_params.arch.hidden_layers},
                         {"gate_hidden", res.ema_params.arch.gate_hidden},
                         {"parameters", res.ema_params.theta.size()}};
    j["train"] = {{"steps", cfg.train.steps},   {"batch", cfg.train.batch},         {"lr", cfg.train.lr},
                  {"weight_decay", cfg.train.weight_decay}, {"ema_decay", cfg.train.ema_decay},
                  {"seed", cfg.train.seed},     {"schedule_steps", cfg.schedule_steps}};
    j["pairs"] = {{"count", tp.targets.rows()}, {"first_target", tp.first_date}, {"last_target", tp.last_date}};
    double tail_loss = 0.0;
    const std::size_t n = std::min<std::size_t>(100, res.losses.size());
    for (std::size_t i = res.losses.size() - n; i < res.losses.size(); ++i) tail_loss += res.losses[i];
    j["final_loss"] = n ? tail_loss / static_cast<double>(n) : 0.0;
    if (probe) j["gate_probe"] = {{"grid", probe->grid}, {"gate", probe->gate}, {"monotone", probe->monotone_non_decreasing}};
    return j;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path, const char* producer) {
    std::ifstream in(path);
    if (!in) throw InputError("missing " + path.filename().string() + "; run `rcd " + producer + "` first");
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        rows.push_back(std::move(cells));
    }
    return rows;
}

}  // namespace

std::vector<BicRow> rolling_bic_table(const ReturnPanel& returns, const std::vector<int>& k_list, Index window,
                                      Index stride, const EmOptions& em) {
    if (k_list.empty()) throw InputError("fit-hmm: empty K list");
    std::vector<BicRow> table;
    for (int K : k_list) {
        const auto refits = rolling_refit(returns, K, window, stride, em);
        BicRow row;
        row.K = K;
        row.parameters = free_parameters(K, returns.cols());
        row.refits = static_cast<Index>(refits.size());
        for (const auto& r : refits) {
            const MatrixXd win = returns.returns.middleRows(r.index - window + 1, window);
            const double ll = filter_posteriors(r.model, win).loglik;
            row.mean_loglik += ll;
            row.mean_bic += bic_from(ll, row.parameters, static_cast<double>(window));
        }
        row.mean_bic /= static_cast<double>(refits.size());
        row.mean_loglik /= static_cast<double>(refits.size());
        spdlog::info("fit-hmm: K={} mean BIC {:.2f} over {} refits", K, row.mean_bic, row.refits);
        table.push_back(row);
    }
    return table;
}

nlohmann::json refits_to_json(const std::vector<RegimeRefit>& refits) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : refits) arr.push_back({{"index", r.index}, {"date", r.date}, {"model", to_json(r.model)}});
    return arr;
}

std::vector<RegimeRefit> refits_from_json(const nlohmann::json& j) {
    std::vector<RegimeRefit> out;
    try {
        for (const auto& e : j) out.push_back({e.at("index").get<Index>(), e.at("date").get<std::string>(), regime_model_from_json(e.at("model"))});
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("regime refits: ") + e.what());
    }
    if (out.empty()) throw InputError("regime refits: empty");
    return out;
}

void cmd_ingest(const RunConfig& cfg, const fs::path& run_dir) {
    prepare(cfg, run_dir);
    const PricePanel prices = load_price_csv(cfg.prices_path());
    const ReturnPanel returns = to_returns(prices);
    write_return_csv(returns, run_dir / "returns.csv");
    write_json(run_dir / "ingest_report.json", {{"source", cfg.prices_path().string()},
                                                {"price_rows", prices.dates.size()},
                                                {"return_rows", returns.rows()},
                                                {"dropped_rows", prices.dropped_rows},
                                                {"assets", prices.assets},
                                                {"first_date", returns.dates.front()},
                                                {"last_date", returns.dates.back()}});
    spdlog::info("ingest: {} return rows, {} assets, {} rows dropped", returns.rows(), returns.cols(), prices.dropped_rows);
}

void cmd_fit_hmm(const RunConfig& cfg, const fs::path& run_dir) {
    prepare(cfg, run_dir);
    const ReturnPanel returns = load_returns(run_dir);
    const auto& b = cfg.backtest;
    const Index train_end = last_row_on_or_before(returns, cfg.train_end, "train_end");
    const auto table = rolling_bic_table(returns.slice(0, train_end + 1), cfg.k_list, b.hmm_window, b.hmm_stride, b.em);
    std::size_t best = 0;
    for (std::size_t i = 1; i < table.size(); ++i)
        if (table[i].mean_bic < table[best].mean_bic) best = i;
    nlohmann::json bj;
    bj["window"] = b.hmm_window;
    bj["stride"] = b.hmm_stride;
    bj["fit_through"] = returns.dates[static_cast<std::size_t>(train_end)];
    bj["selected_k"] = table[best].K;
    bj["configured_k"] = b.hmm_k;
    bj["rows"] = nlohmann::json::array();
    std::ostringstream csv;
    csv << "K,parameters,refits,mean_bic,mean_loglik\n";
    for (const auto& r : table) {
        bj["rows"].push_back({{"K", r.K}, {"parameters", r.parameters}, {"refits", r.refits}, {"mean_bic", r.mean_bic}, {"mean_loglik", r.mean_loglik}});
        csv << r.K << ',' << r.parameters << ',' << r.refits << ',' << format_double(r.mean_bic) << ','
            << format_double(r.mean_loglik) << '\n';
    }
    write_json(run_dir / "hmm_bic.json", bj);
    write_text(run_dir / "hmm_bic.csv", csv.str());

    const auto refits = rolling_refit(returns, b.hmm_k, b.hmm_window, b.hmm_stride, b.em, -1, b.hmm_align);
    write_json(run_dir / "hmm_refits.json", refits_to_json(refits));
    write_posteriors_csv(returns.dates, walk_forward_posteriors(returns, refits, b.hmm_window), run_dir / "posteriors.csv");
    spdlog::info("fit-hmm: BIC selects K={}, {} walk-forward refits with K={}", table[best].K, refits.size(), b.hmm_k);
}

void cmd_train_gen(const RunConfig& cfg, const fs::path& run_dir, bool resume) {
    prepare(cfg, run_dir);
    const ReturnPanel returns = load_returns(run_dir);
    const auto refits = load_refits(run_dir);
    const TrainingPairs tp = training_pairs(cfg, returns, refits);
    const NoiseSchedule schedule = cosine_schedule(cfg.schedule_steps);
    spdlog::info("train-gen: {} pairs ({} .. {}), {} steps", tp.targets.rows(), tp.first_date, tp.last_date, cfg.train.steps);

    auto run_one = [&](const MatrixXd& contexts, const std::string& stem, bool unconditional) {
        const fs::path ckpt = run_dir / (stem + ".ckpt");
        TrainState resumed;
        const TrainState* from = nullptr;
        if (resume && fs::exists(ckpt)) {
            resumed = load_train_state(ckpt);
            from = &resumed;
            spdlog::info("train-gen: resuming {} from step {}", stem, resumed.step);
        }
        const auto started = std::chrono::steady_clock::now();
        const TrainResult res = train(tp.targets, contexts, schedule, cfg.tail, cfg.train, cfg.arch, from,
                                      [&](const TrainState& st) { save_train_state(st, ckpt); });
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        save_denoiser(res.ema_params, run_dir / (stem + ".bin"));
        std::optional<GateProbe> probe;
        const Index cc = crisis_coordinate(cfg, refits);
        if (!unconditional && cc >= 0)
            probe = gate_monotonicity_check(res.ema_params, contexts.colwise().mean().transpose(), cc);
        write_json(run_dir / (stem + ".json"), train_sidecar(cfg, res, tp, unconditional, probe ? &*probe : nullptr));
        spdlog::info("train-gen: {} done in {:.1f} s", stem, secs);
    };
    run_one(tp.contexts, "generator", false);
    if (cfg.train_unconditional)
        run_one(MatrixXd::Zero(tp.contexts.rows(), tp.contexts.cols()), "generator_uncond", true);
}

void cmd_backtest(const RunConfig& cfg, const fs::path& run_dir) {
    prepare(cfg, run_dir);
    const ReturnPanel returns = load_returns(run_dir);
    bool cond = false, uncond = false;
    for (const auto& s : cfg.backtest.strategies) {
        if (s.kind != StrategyKind::MARCD) continue;
        (s.unconditional ? uncond : cond) = true;
    }
    GeneratorModels models;
    models.schedule = cosine_schedule(cfg.schedule_steps);
    DenoiserParams gen, gen_u;
    std::vector<RegimeRefit> refits;
    if (cond) {
        if (!fs::exists(run_dir / "generator.bin")) throw InputError("missing generator.bin; run `rcd train-gen` first");
        gen = load_denoiser(run_dir / "generator.bin");
        models.conditional = &gen;
        refits = load_refits(run_dir);
    }
    if (uncond) {
        if (!fs::exists(run_dir / "generator_uncond.bin"))
            throw InputError("missing generator_uncond.bin; enable ablations.unconditional and run `rcd train-gen`");
        gen_u = load_denoiser(run_dir / "generator_uncond.bin");
        models.unconditional = &gen_u;
    }
    const BacktestReport report = run_walk_forward(cfg.backtest, returns, models, cond ? &refits : nullptr);
    write_backtest_outputs(report, run_dir);
    for (const auto& run : report.runs)
        spdlog::info("backtest: {:<16} CAGR {:7.4f} vol {:6.4f} Sharpe {:6.3f} MaxDD {:6.4f}", run.spec.name,
                     run.metrics.cagr, run.metrics.vol_annual, run.metrics.sharpe, run.metrics.maxdd);
}

void cmd_diagnose(const RunConfig& cfg, const fs::path& run_dir) {
    prepare(cfg, run_dir);
    const ReturnPanel returns = load_returns(run_dir);
    const auto refits = load_refits(run_dir);
    if (!fs::exists(run_dir / "generator.bin")) throw InputError("missing generator.bin; run `rcd train-gen` first");
    const DenoiserParams gen = load_denoiser(run_dir / "generator.bin");
    const nlohmann::json bt = read_json(run_dir / "backtest_report.json", "backtest");
    const auto& b = cfg.backtest;
    const auto& dc = cfg.diagnostics;

    // held MARCD weights by rebalance date
    std::map<std::string, VectorXd> held;
    for (const auto& s : bt.at("strategies"))
        if (s.at("name") == "MARCD")
            for (const auto& r : s.at("rebalances")) held[r.at("date")] = from_std_vector(r.at("weights").get<std::vector<double>>());
    if (held.empty()) throw InputError("diagnose: the backtest report has no MARCD strategy");

    const Index first = first_row_on_or_after(returns, b.test_start);
    const Index last = last_row_on_or_before(returns, b.test_end, "test_end");
    const Index t0 = first - 1;
    const ReturnPanel upto = returns.slice(0, last + 1);
    std::vector<RegimeRefit> usable;
    for (const auto& r : refits)
        if (r.index <= last) usable.push_back(r);
    const MatrixXd post = walk_forward_posteriors(upto, usable, b.hmm_window);
    const NoiseSchedule schedule = cosine_schedule(cfg.schedule_steps);

    std::vector<Index> eval;
    for (Index t = t0; t < last; t += dc.stride) eval.push_back(t);
    const Index n = static_cast<Index>(eval.size());
    const Index d = returns.cols();

    struct Acc {
        std::string name;
        std::vector<ScenarioSet> sets;
        double es = 0.0, vs = 0.0;
        VectorXd path, pred_cvar;
        Index violations = 0;
    };
    std::vector<Acc> accs(2);
    accs[0].name = "MARCD";
    accs[1].name = "SBB";
    for (auto& a : accs) {
        a.path.resize(n);
        a.pred_cvar.resize(n);
    }
    MatrixXd realized(n, d);
    VectorXd realized_port(n);

    for (Index k = 0; k < n; ++k) {
        const Index t = eval[static_cast<std::size_t>(k)];
        const std::string& date = returns.dates[static_cast<std::size_t>(t)];
        auto it = held.upper_bound(date);
        if (it == held.begin()) throw InputError("diagnose: no MARCD holdings on " + date);
        const VectorXd w = std::prev(it)->second;
        const VectorXd y = returns.returns.row(t + 1).transpose();
        realized.row(k) = y.transpose();
        realized_port(k) = w.dot(y);
        const RegimeContext ctx = context_features(VectorXd(post.row(t).transpose()), returns, t, b.context);
        const std::uint64_t seed = derive_seed(derive_seed(b.seed, 101), static_cast<std::uint64_t>(t));
        ScenarioSet sets[2] = {
            sample(gen, schedule, ctx, dc.scenarios, seed),
            sbb_sample(MatrixXd(returns.returns.middleRows(t - b.moments_window + 1, b.moments_window)), b.sbb_block,
                       dc.scenarios, derive_seed(derive_seed(b.seed, 102), static_cast<std::uint64_t>(t)))};
        for (int g = 0; g < 2; ++g) {
            Acc& a = accs[static_cast<std::size_t>(g)];
            const ScenarioSet& s = sets[g];
            a.es += energy_score(s, y);
            a.vs += variogram_score(s, y, dc.variogram_p);
            const VectorXd port = s.scenarios * w;
            a.path(k) = std::abs(port(0));
            const CvarValue cv = cvar_empirical(-port, b.alpha);
            a.pred_cvar(k) = cv.cvar;
            if (-realized_port(k) > cv.zeta) ++a.violations;
            a.sets.push_back(s);
        }
    }

    const VectorXd realized_losses = -realized_port;
    const int lags = static_cast<int>(std::min<Index>(dc.ljung_box_lags, n - 1));
    const double lb_real = ljung_box(realized_port.cwiseAbs(), lags).p_value;
    std::vector<DiagnosticsReport> reports;
    for (auto& a : accs) {
        DiagnosticsReport r;
        r.generator = a.name;
        r.dates = n;
        const KsResult ks = ks_avg(a.sets, realized);
        r.ks_avg = ks.average;
        r.ks_per_asset = ks.per_asset;
        r.energy_score = a.es / static_cast<double>(n);
        r.variogram_score = a.vs / static_cast<double>(n);
        r.ljung_box_p_absr = ljung_box(a.path, lags).p_value;
        r.ljung_box_p_absr_realized = lb_real;
        const Kupiec kp = kupiec_uc(a.violations, n, b.alpha);
        r.kupiec_uc_p = kp.p_value;
        r.violations = a.violations;
        r.trials = n;
        r.cvar_error_bps = cvar_error_bps(a.pred_cvar, realized_losses, b.alpha);
        r.ess_value = a.name == "MARCD" ? ess(cfg.tail.q, cfg.tail.eta, static_cast<double>(cfg.train.batch))
                                        : static_cast<double>(cfg.train.batch);
        reports.push_back(r);
    }

    // NAV-based outputs
    const auto nav = read_csv(run_dir / "nav.csv", "backtest");
    if (nav.size() < 3) throw InputError("nav.csv is too short");
    const auto& header = nav.front();
    const Index days = static_cast<Index>(nav.size()) - 1;
    std::map<std::string, VectorXd> daily;
    std::ostringstream plot;
    plot << "date,series,value\n";
    for (std::size_t c = 1; c < header.size(); ++c) {
        std::vector<double> v;
        for (Index t = 1; t <= days; ++t) v.push_back(std::stod(nav[static_cast<std::size_t>(t)][c]));
        VectorXd r(days - 1);
        for (Index t = 1; t < days; ++t) r(t - 1) = v[static_cast<std::size_t>(t)] / v[static_cast<std::size_t>(t - 1)] - 1.0;
        daily[header[c]] = r;
        double peak = v.front();
        for (Index t = 0; t < days; ++t) {
            const std::string& date = nav[static_cast<std::size_t>(t + 1)][0];
            peak = std::max(peak, v[static_cast<std::size_t>(t)]);
            plot << date << ",nav:" << header[c] << ',' << format_double(v[static_cast<std::size_t>(t)]) << '\n';
            plot << date << ",drawdown:" << header[c] << ',' << format_double(1.0 - v[static_cast<std::size_t>(t)] / peak) << '\n';
        }
    }
    for (Index t = t0; t <= last; ++t)
        for (Index k = 0; k < post.cols(); ++k)
            plot << returns.dates[static_cast<std::size_t>(t)] << ",posterior:pi_" << (k + 1) << ','
                 << format_double(post(t, k)) << '\n';
    write_text(run_dir / "plot_data.csv", plot.str());

    nlohmann::json uplift = nlohmann::json::array();
    if (daily.count("MARCD")) {
        for (const auto& [name, r] : daily) {
            if (name == "MARCD" || name.rfind("MARCD", 0) == 0) continue;
            const SharpeUplift u = sharpe_uplift_ci(daily["MARCD"], r, dc.bootstrap);
            uplift.push_back({{"baseline", name}, {"delta", u.delta}, {"lo", u.lo}, {"hi", u.hi}, {"p_two_sided", u.p_two_sided}});
        }
    }

    nlohmann::json out;
    out["evaluation"] = {{"first_date", returns.dates[static_cast<std::size_t>(eval.front())]},
                         {"last_date", returns.dates[static_cast<std::size_t>(eval.back())]},
                         {"dates", n},
                         {"stride", dc.stride},
                         {"scenarios", dc.scenarios}};
    out["reports"] = nlohmann::json::array();
    for (const auto& r : reports) out["reports"].push_back(to_json(r, returns.assets));
    out["sharpe_uplift"] = uplift;
    write_json(run_dir / "diagnostics.json", out);
    write_table1_csv(reports, run_dir / "table1.csv");
    spdlog::info("diagnose: {} evaluation dates; MARCD KS {:.4f} ES {:.5f}; SBB KS {:.4f} ES {:.5f}", n,
                 reports[0].ks_avg, reports[0].energy_score, reports[1].ks_avg, reports[1].energy_score);
}

void cmd_report(const RunConfig& cfg, const fs::path& run_dir) {
    prepare(cfg, run_dir);
    const nlohmann::json bt = read_json(run_dir / "backtest_report.json", "backtest");
    const nlohmann::json dg = read_json(run_dir / "diagnostics.json", "diagnose");
    auto cell = [](const nlohmann::json& v, int prec) {
        if (v.is_string()) return v.get<std::string>();
        std::ostringstream os;
        os.setf(std::ios::fixed);
        os.precision(prec);
        os << v.get<double>();
        return os.str();
    };

    nlohmann::json out;
    out["table2"] = nlohmann::json::array();
    out["ablations"] = nlohmann::json::array();
    out["sweep"] = nlohmann::json::array();
    std::ostringstream md;
    auto metric_table = [&](const char* title, const std::function<bool(const std::string&)>& keep, const char* key) {
        md << "## " << title << "\n\n| Strategy | Return (CAGR) | Vol | Sharpe | Sortino | MaxDD | Calmar | Avg turnover |\n"
           << "|---|---|---|---|---|---|---|---|\n";
        for (const auto& s : bt.at("strategies")) {
            const std::string name = s.at("name");
            if (!keep(name)) continue;
            const auto& m = s.at("metrics");
            md << "| " << name << " | " << cell(m.at("cagr"), 4) << " | " << cell(m.at("vol_annual"), 4) << " | "
               << cell(m.at("sharpe"), 3) << " | " << cell(m.at("sortino"), 3) << " | " << cell(m.at("maxdd"), 4) << " | "
               << cell(m.at("calmar"), 3) << " | " << cell(m.at("avg_turnover"), 4) << " |\n";
            out[key].push_back({{"strategy", name}, {"metrics", m}, {"overrides", s.at("overrides")}});
        }
        md << "\n";
    };
    md << "# Walk-forward report\n\nTest window " << bt.at("first_date").get<std::string>() << " to "
       << bt.at("last_date").get<std::string>() << ", " << cfg.backtest.cost_bps << " bps costs, l1 turnover cap "
       << (std::isfinite(cfg.backtest.tau) ? cell(cfg.backtest.tau, 2) : std::string("none")) << ".\n\n";
    const bool market_proxy = cfg.backtest.bl.market_weights.size() == 0;
    metric_table("Performance", [](const std::string& n) { return n.find('-') == std::string::npos && n.find('[') == std::string::npos; }, "table2");
    if (market_proxy) md << "BL uses an equal-weight market proxy (no capitalization data supplied).\n\n";
    metric_table("Ablations", [](const std::string& n) { return n.rfind("MARCD-", 0) == 0; }, "ablations");
    metric_table("Sensitivity sweep", [](const std::string& n) { return n.rfind("MARCD[", 0) == 0; }, "sweep");

    md << "## Scenario diagnostics\n\n| Generator | KS | ES | VS | LB p(abs r) | UC p | CVaR err (bps) | ESS |\n"
       << "|---|---|---|---|---|---|---|---|\n";
    for (const auto& r : dg.at("reports"))
        md << "| " << r.at("generator").get<std::string>() << " | " << cell(r.at("ks_avg"), 4) << " | "
           << cell(r.at("energy_score"), 5) << " | " << cell(r.at("variogram_score"), 6) << " | "
           << cell(r.at("ljung_box_p_absr"), 3) << " | " << cell(r.at("kupiec_uc_p"), 3) << " | "
           << cell(r.at("cvar_error_bps"), 1) << " | " << cell(r.at("ess_value"), 1) << " |\n";
    md << "\n";
    if (!dg.at("sharpe_uplift").empty()) {
        md << "## Sharpe uplift of MARCD (stationary bootstrap, 95% CI)\n\n| Baseline | Delta | CI low | CI high | p |\n"
           << "|---|---|---|---|---|\n";
        for (const auto& u : dg.at("sharpe_uplift"))
            md << "| " << u.at("baseline").get<std::string>() << " | " << cell(u.at("delta"), 3) << " | "
               << cell(u.at("lo"), 3) << " | " << cell(u.at("hi"), 3) << " | " << cell(u.at("p_two_sided"), 3) << " |\n";
        md << "\n";
    }
    out["table1"] = dg.at("reports");
    out["sharpe_uplift"] = dg.at("sharpe_uplift");
    out["test_window"] = {{"first_date", bt.at("first_date")}, {"last_date", bt.at("last_date")}};
    out["market_proxy"] = market_proxy ? "equal-weight" : "configured";
    write_json(run_dir / "report.json", out);
    write_text(run_dir / "report.md", md.str());
    spdlog::info("report: wrote report.md and report.json");
}

void cmd_synth(const fs::path& out, std::uint64_t seed) {
    SyntheticSpec spec;
    spec.seed = seed;
    const SyntheticData data = make_synthetic(spec);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    write_price_csv(data.prices, out);
    spdlog::info("synth: {} rows x {} assets -> {}", data.prices.dates.size(), data.prices.assets.size(), out.string());
}

}  // namespace rcd
