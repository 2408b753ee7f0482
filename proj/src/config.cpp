#include "rcd/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "toml.hpp"

namespace rcd {

namespace {

using Allowed = std::map<std::string, std::set<std::string>>;

const Allowed& allowed_keys() {
    static const Allowed keys = {
        {"run", {"seed"}},
        {"data", {"prices"}},
        {"splits", {"train_start", "train_end", "val_start", "val_end", "test_start", "test_end"}},
        {"hmm", {"k", "k_list", "window", "stride", "max_iter", "tol", "align"}},
        {"context", {"posteriors", "one_hot", "trailing_vol", "trailing_mean", "lookback"}},
        {"schedule", {"steps"}},
        {"tail", {"q", "eta", "quantile_ema", "orientation"}},
        {"denoiser", {"time_embed_dim", "hidden_width", "hidden_layers", "gate_hidden"}},
        {"train", {"steps", "batch", "lr", "weight_decay", "beta1", "beta2", "grad_clip", "ema_decay", "ema_warmup",
                   "checkpoint_every", "log_every"}},
        {"allocator", {"alpha", "lambda_mu", "gamma", "tau", "kappa", "lower", "upper"}},
        {"moments", {"window", "lambda", "shrinkage"}},
        {"baselines", {"bl_tau", "bl_risk_aversion", "market_weights", "omega_scale"}},
        {"backtest", {"cost_bps", "scenarios", "strategies", "sbb_block"}},
        {"ablations", {"no_cvar", "unconditional", "lambda_endpoints"}},
        {"diagnostics", {"stride", "scenarios", "variogram_p", "ljung_box_lags", "bootstrap_B", "bootstrap_block"}},
    };
    return keys;
}

const std::set<std::string> kSweepKeys = {"name", "lambda", "gamma", "lambda_mu", "kappa", "tau", "alpha", "scenarios"};

class Section {
public:
    Section(const toml::table* t, std::string name) : t_(t), name_(std::move(name)) {}

    template <typename T>
    void get(const char* key, T& out) const {
        if (!t_) return;
        const toml::node* n = t_->get(key);
        if (!n) return;
        if constexpr (std::is_same_v<T, bool>) {
            auto v = n->value<bool>();
            if (!v) fail(key, "a boolean");
            out = *v;
        } else if constexpr (std::is_integral_v<T>) {
            auto v = n->value_exact<std::int64_t>();
            if (!v) fail(key, "an integer");
            if constexpr (std::is_unsigned_v<T>)
                if (*v < 0) fail(key, "a non-negative integer");
            out = static_cast<T>(*v);
        } else if constexpr (std::is_floating_point_v<T>) {
            auto v = n->value<double>();
            if (!v) fail(key, "a number");
            out = *v;
        } else {
            out = string_of(key, *n);
        }
    }

    /// Number, or one of the strings "inf"/"auto" mapped by the caller.
    bool special(const char* key, const char* word) const {
        if (!t_) return false;
        const toml::node* n = t_->get(key);
        return n && n->is_string() && *n->value<std::string>() == word;
    }

    bool has(const char* key) const { return t_ && t_->get(key); }

    std::vector<double> doubles(const char* key) const {
        std::vector<double> out;
        const toml::array* a = t_ ? t_->get_as<toml::array>(key) : nullptr;
        if (!a) {
            if (has(key)) fail(key, "an array");
            return out;
        }
        for (const auto& el : *a) {
            auto v = el.value<double>();
            if (!v) fail(key, "an array of numbers");
            out.push_back(*v);
        }
        return out;
    }

    std::vector<std::string> strings(const char* key) const {
        std::vector<std::string> out;
        const toml::array* a = t_ ? t_->get_as<toml::array>(key) : nullptr;
        if (!a) {
            if (has(key)) fail(key, "an array");
            return out;
        }
        for (const auto& el : *a) {
            auto v = el.value<std::string>();
            if (!v) fail(key, "an array of strings");
            out.push_back(*v);
        }
        return out;
    }

    [[noreturn]] void fail(const char* key, const char* what) const {
        throw InputError("config: " + name_ + "." + key + " must be " + what);
    }

private:
    const toml::table* t_;
    std::string name_;

    std::string string_of(const char* key, const toml::node& n) const {
        if (auto s = n.value<std::string>()) return *s;
        if (auto d = n.value<toml::date>()) {
            std::ostringstream os;
            os << *d;
            return os.str();
        }
        fail(key, "a string");
    }
};

void check_keys(const toml::table& root) {
    const auto& keys = allowed_keys();
    for (const auto& [k, node] : root) {
        const std::string name(k.str());
        if (name == "sweep") {
            const toml::array* arr = node.as_array();
            if (!arr) throw InputError("config: sweep must be an array of tables");
            for (const auto& el : *arr) {
                const toml::table* t = el.as_table();
                if (!t) throw InputError("config: sweep must be an array of tables");
                for (const auto& [sk, sv] : *t)
                    if (!kSweepKeys.count(std::string(sk.str())))
                        throw InputError("config: unknown key sweep." + std::string(sk.str()));
            }
            continue;
        }
        auto it = keys.find(name);
        if (it == keys.end()) throw InputError("config: unknown table [" + name + "]");
        const toml::table* t = node.as_table();
        if (!t) throw InputError("config: [" + name + "] must be a table");
        for (const auto& [sk, sv] : *t)
            if (!it->second.count(std::string(sk.str())))
                throw InputError("config: unknown key " + name + "." + std::string(sk.str()));
    }
}

Section section(const toml::table& root, const char* name) { return Section(root[name].as_table(), name); }

}  // namespace

std::filesystem::path RunConfig::prices_path() const {
    const std::filesystem::path p(prices);
    return p.is_absolute() ? p : base_dir / p;
}

void RunConfig::build_strategies() {
    auto& out = backtest.strategies;
    out.clear();
    for (const auto& name : base_strategies) {
        StrategySpec s;
        s.kind = parse_strategy_kind(name);
        s.name = name;
        out.push_back(s);
    }
    auto variant = [&](const std::string& name) {
        StrategySpec s;
        s.kind = StrategyKind::MARCD;
        s.name = name;
        return s;
    };
    if (ablation_no_cvar) {
        auto s = variant("MARCD-noCVaR");
        s.cvar_term = false;
        out.push_back(s);
    }
    if (ablation_unconditional) {
        auto s = variant("MARCD-uncond");
        s.unconditional = true;
        out.push_back(s);
    }
    if (ablation_lambda_endpoints) {
        auto s0 = variant("MARCD-lambda0");
        s0.lambda = 0.0;
        out.push_back(s0);
        auto s1 = variant("MARCD-lambda1");
        s1.lambda = 1.0;
        out.push_back(s1);
    }
    for (const auto& e : sweep) out.push_back(e.spec);
}

void RunConfig::validate() const {
    if (prices.empty()) throw InputError("config: data.prices is required");
    for (const auto* d : {&train_start, &train_end, &val_start, &val_end, &backtest.test_start, &backtest.test_end})
        if (d->empty()) throw InputError("config: every split date is required");
    std::vector<std::string> seq = {train_start, train_end, val_start, val_end, backtest.test_start, backtest.test_end};
    for (auto& s : seq) s = normalize_iso_date(s);
    if (!(seq[0] <= seq[1] && seq[1] < seq[2] && seq[2] <= seq[3] && seq[3] < seq[4] && seq[4] <= seq[5]))
        throw InputError("config: splits must be ordered and non-overlapping (train < val < test)");
    if (k_list.empty()) throw InputError("config: hmm.k_list must not be empty");
    for (int k : k_list)
        if (k < 1) throw InputError("config: hmm.k_list entries must be >= 1");
    if (schedule_steps < 2) throw InputError("config: schedule.steps must be >= 2");
    tail.validate();
    train.validate();
    DenoiserArchitecture a = arch;
    a.data_dim = 1;
    a.context_dim = 1;
    a.validate();
    if (backtest.strategies.empty()) throw InputError("config: no strategies selected");
    if (diagnostics.stride < 1 || diagnostics.scenarios < 2) throw InputError("config: invalid diagnostics settings");
    if (diagnostics.ljung_box_lags < 1) throw InputError("config: diagnostics.ljung_box_lags must be >= 1");
    if (!(diagnostics.variogram_p > 0.0)) throw InputError("config: diagnostics.variogram_p must be > 0");
    if (diagnostics.bootstrap.B < 1 || !(diagnostics.bootstrap.block >= 1.0))
        throw InputError("config: invalid bootstrap settings");
    for (const auto& s : backtest.strategies) {
        if (s.lambda && !(*s.lambda >= 0.0 && *s.lambda <= 1.0)) throw InputError("config: " + s.name + ": lambda outside [0, 1]");
        if (s.alpha && !(*s.alpha > 0.0 && *s.alpha < 1.0)) throw InputError("config: " + s.name + ": alpha outside (0, 1)");
        if (s.gamma && *s.gamma < 0.0) throw InputError("config: " + s.name + ": gamma < 0");
        if (s.tau && *s.tau < 0.0) throw InputError("config: " + s.name + ": tau < 0");
        if (s.kappa && *s.kappa < 0.0) throw InputError("config: " + s.name + ": kappa < 0");
        if (s.scenarios && *s.scenarios < 2) throw InputError("config: " + s.name + ": scenarios < 2");
    }
}

RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
    toml::table root;
    try {
        root = toml::parse(text);
    } catch (const toml::parse_error& e) {
        std::ostringstream os;
        os << "config: " << e.description() << " at line " << e.source().begin.line;
        throw InputError(os.str());
    }
    check_keys(root);

    RunConfig c;
    c.base_dir = base_dir;
    section(root, "run").get("seed", c.seed);
    c.train.seed = c.seed;
    c.backtest.seed = c.seed;
    c.backtest.em.seed = c.seed;
    c.diagnostics.bootstrap.seed = c.seed;

    section(root, "data").get("prices", c.prices);

    const Section sp = section(root, "splits");
    sp.get("train_start", c.train_start);
    sp.get("train_end", c.train_end);
    sp.get("val_start", c.val_start);
    sp.get("val_end", c.val_end);
    sp.get("test_start", c.backtest.test_start);
    sp.get("test_end", c.backtest.test_end);

    const Section hmm = section(root, "hmm");
    hmm.get("k", c.backtest.hmm_k);
    if (hmm.has("k_list")) {
        c.k_list.clear();
        for (double k : hmm.doubles("k_list")) {
            if (k != std::floor(k)) hmm.fail("k_list", "an array of integers");
            c.k_list.push_back(static_cast<int>(k));
        }
    }
    hmm.get("window", c.backtest.hmm_window);
    hmm.get("stride", c.backtest.hmm_stride);
    hmm.get("max_iter", c.backtest.em.max_iter);
    hmm.get("tol", c.backtest.em.tol);
    if (hmm.has("align")) {
        std::string a;
        hmm.get("align", a);
        c.backtest.hmm_align = parse_label_alignment(a);
    }

    const Section ctx = section(root, "context");
    ctx.get("posteriors", c.backtest.context.posteriors);
    ctx.get("one_hot", c.backtest.context.one_hot);
    ctx.get("trailing_vol", c.backtest.context.trailing_vol);
    ctx.get("trailing_mean", c.backtest.context.trailing_mean);
    ctx.get("lookback", c.backtest.context.lookback);

    section(root, "schedule").get("steps", c.schedule_steps);

    const Section tail = section(root, "tail");
    tail.get("q", c.tail.q);
    tail.get("eta", c.tail.eta);
    tail.get("quantile_ema", c.tail.quantile_ema);
    if (tail.has("orientation")) {
        std::string o;
        tail.get("orientation", o);
        if (o == "adverse")
            c.tail.orientation = TailOrientation::Adverse;
        else if (o == "literal")
            c.tail.orientation = TailOrientation::Literal;
        else
            tail.fail("orientation", "\"adverse\" or \"literal\"");
    }

    const Section den = section(root, "denoiser");
    den.get("time_embed_dim", c.arch.time_embed_dim);
    den.get("hidden_width", c.arch.hidden_width);
    den.get("hidden_layers", c.arch.hidden_layers);
    den.get("gate_hidden", c.arch.gate_hidden);

    const Section tr = section(root, "train");
    tr.get("steps", c.train.steps);
    tr.get("batch", c.train.batch);
    tr.get("lr", c.train.lr);
    tr.get("weight_decay", c.train.weight_decay);
    tr.get("beta1", c.train.beta1);
    tr.get("beta2", c.train.beta2);
    tr.get("grad_clip", c.train.grad_clip);
    tr.get("ema_decay", c.train.ema_decay);
    tr.get("ema_warmup", c.train.ema_warmup);
    tr.get("checkpoint_every", c.train.checkpoint_every);
    tr.get("log_every", c.train.log_every);

    const Section al = section(root, "allocator");
    al.get("alpha", c.backtest.alpha);
    al.get("lambda_mu", c.backtest.lambda_mu);
    al.get("gamma", c.backtest.gamma);
    if (al.special("tau", "inf"))
        c.backtest.tau = std::numeric_limits<double>::infinity();
    else
        al.get("tau", c.backtest.tau);
    al.get("kappa", c.backtest.kappa);
    al.get("lower", c.backtest.lower);
    al.get("upper", c.backtest.upper);

    const Section mo = section(root, "moments");
    mo.get("window", c.backtest.moments_window);
    mo.get("lambda", c.backtest.lambda);
    if (mo.has("shrinkage") && !mo.special("shrinkage", "auto")) {
        double delta = 0.0;
        mo.get("shrinkage", delta);
        c.backtest.shrinkage = delta;
    }

    const Section bl = section(root, "baselines");
    bl.get("bl_tau", c.backtest.bl.tau_bl);
    bl.get("bl_risk_aversion", c.backtest.bl.risk_aversion);
    bl.get("omega_scale", c.backtest.bl.omega_scale);
    const auto mw = bl.doubles("market_weights");
    if (!mw.empty()) c.backtest.bl.market_weights = from_std_vector(mw);
    c.backtest.bl.kind = BaselineKind::BL;

    const Section bt = section(root, "backtest");
    bt.get("cost_bps", c.backtest.cost_bps);
    bt.get("scenarios", c.backtest.scenarios);
    bt.get("sbb_block", c.backtest.sbb_block);
    if (bt.has("strategies")) c.base_strategies = bt.strings("strategies");

    const Section ab = section(root, "ablations");
    ab.get("no_cvar", c.ablation_no_cvar);
    ab.get("unconditional", c.ablation_unconditional);
    ab.get("lambda_endpoints", c.ablation_lambda_endpoints);
    c.train_unconditional = c.ablation_unconditional;

    if (const toml::array* arr = root["sweep"].as_array()) {
        for (const auto& el : *arr) {
            const Section s(el.as_table(), "sweep");
            SweepEntry e;
            s.get("name", e.name);
            if (e.name.empty()) s.fail("name", "a non-empty string");
            e.spec.kind = StrategyKind::MARCD;
            e.spec.name = "MARCD[" + e.name + "]";
            auto opt = [&](const char* key, std::optional<double>& out) {
                if (!s.has(key)) return;
                double v = 0.0;
                if (std::string(key) == "tau" && s.special(key, "inf"))
                    v = std::numeric_limits<double>::infinity();
                else
                    s.get(key, v);
                out = v;
            };
            opt("lambda", e.spec.lambda);
            opt("gamma", e.spec.gamma);
            opt("lambda_mu", e.spec.lambda_mu);
            opt("kappa", e.spec.kappa);
            opt("tau", e.spec.tau);
            opt("alpha", e.spec.alpha);
            if (s.has("scenarios")) {
                Index n = 0;
                s.get("scenarios", n);
                e.spec.scenarios = n;
            }
            c.sweep.push_back(e);
        }
    }

    const Section dg = section(root, "diagnostics");
    dg.get("stride", c.diagnostics.stride);
    dg.get("scenarios", c.diagnostics.scenarios);
    dg.get("variogram_p", c.diagnostics.variogram_p);
    dg.get("ljung_box_lags", c.diagnostics.ljung_box_lags);
    dg.get("bootstrap_B", c.diagnostics.bootstrap.B);
    dg.get("bootstrap_block", c.diagnostics.bootstrap.block);

    c.build_strategies();
    c.validate();
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), std::filesystem::absolute(path).parent_path());
}

std::string resolved_config_toml(const RunConfig& c) {
    const auto& b = c.backtest;
    auto ints = [](const std::vector<int>& v) {
        toml::array a;
        for (int x : v) a.push_back(static_cast<std::int64_t>(x));
        return a;
    };
    auto strs = [](const std::vector<std::string>& v) {
        toml::array a;
        for (const auto& x : v) a.push_back(x);
        return a;
    };
    auto tau_node = [](double tau) -> toml::table {
        toml::table t;
        if (std::isfinite(tau))
            t.insert("tau", tau);
        else
            t.insert("tau", "inf");
        return t;
    };
    auto i64 = [](auto v) { return static_cast<std::int64_t>(v); };

    toml::table root;
    root.insert("run", toml::table{{"seed", i64(c.seed)}});
    root.insert("data", toml::table{{"prices", c.prices}});
    root.insert("splits", toml::table{{"train_start", c.train_start},
                                      {"train_end", c.train_end},
                                      {"val_start", c.val_start},
                                      {"val_end", c.val_end},
                                      {"test_start", b.test_start},
                                      {"test_end", b.test_end}});
    root.insert("hmm", toml::table{{"k", i64(b.hmm_k)},
                                   {"k_list", ints(c.k_list)},
                                   {"window", i64(b.hmm_window)},
                                   {"stride", i64(b.hmm_stride)},
                                   {"max_iter", i64(b.em.max_iter)},
                                   {"tol", b.em.tol},
                                   {"align", to_string(b.hmm_align)}});
    root.insert("context", toml::table{{"posteriors", b.context.posteriors},
                                       {"one_hot", b.context.one_hot},
                                       {"trailing_vol", b.context.trailing_vol},
                                       {"trailing_mean", b.context.trailing_mean},
                                       {"lookback", i64(b.context.lookback)}});
    root.insert("schedule", toml::table{{"steps", i64(c.schedule_steps)}});
    root.insert("tail", toml::table{{"q", c.tail.q},
                                    {"eta", c.tail.eta},
                                    {"quantile_ema", c.tail.quantile_ema},
                                    {"orientation", c.tail.orientation == TailOrientation::Adverse ? "adverse" : "literal"}});
    root.insert("denoiser", toml::table{{"time_embed_dim", i64(c.arch.time_embed_dim)},
                                        {"hidden_width", i64(c.arch.hidden_width)},
                                        {"hidden_layers", i64(c.arch.hidden_layers)},
                                        {"gate_hidden", i64(c.arch.gate_hidden)}});
    root.insert("train", toml::table{{"steps", i64(c.train.steps)},
                                     {"batch", i64(c.train.batch)},
                                     {"lr", c.train.lr},
                                     {"weight_decay", c.train.weight_decay},
                                     {"beta1", c.train.beta1},
                                     {"beta2", c.train.beta2},
                                     {"grad_clip", c.train.grad_clip},
                                     {"ema_decay", c.train.ema_decay},
                                     {"ema_warmup", c.train.ema_warmup},
                                     {"checkpoint_every", i64(c.train.checkpoint_every)},
                                     {"log_every", i64(c.train.log_every)}});
    toml::table alloc = tau_node(b.tau);
    alloc.insert("alpha", b.alpha);
    alloc.insert("lambda_mu", b.lambda_mu);
    alloc.insert("gamma", b.gamma);
    alloc.insert("kappa", b.kappa);
    alloc.insert("lower", b.lower);
    alloc.insert("upper", b.upper);
    root.insert("allocator", alloc);
    toml::table mom{{"window", i64(b.moments_window)}, {"lambda", b.lambda}};
    if (b.shrinkage)
        mom.insert("shrinkage", *b.shrinkage);
    else
        mom.insert("shrinkage", "auto");
    root.insert("moments", mom);
    toml::array mw;
    for (Index j = 0; j < b.bl.market_weights.size(); ++j) mw.push_back(b.bl.market_weights(j));
    root.insert("baselines", toml::table{{"bl_tau", b.bl.tau_bl},
                                         {"bl_risk_aversion", b.bl.risk_aversion},
                                         {"market_weights", mw},
                                         {"omega_scale", b.bl.omega_scale}});
    root.insert("backtest", toml::table{{"cost_bps", b.cost_bps},
                                        {"scenarios", i64(b.scenarios)},
                                        {"strategies", strs(c.base_strategies)},
                                        {"sbb_block", b.sbb_block}});
    root.insert("ablations", toml::table{{"no_cvar", c.ablation_no_cvar},
                                         {"unconditional", c.ablation_unconditional},
                                         {"lambda_endpoints", c.ablation_lambda_endpoints}});
    if (!c.sweep.empty()) {
        toml::array sw;
        for (const auto& e : c.sweep) {
            toml::table t{{"name", e.name}};
            if (e.spec.lambda) t.insert("lambda", *e.spec.lambda);
            if (e.spec.gamma) t.insert("gamma", *e.spec.gamma);
            if (e.spec.lambda_mu) t.insert("lambda_mu", *e.spec.lambda_mu);
            if (e.spec.kappa) t.insert("kappa", *e.spec.kappa);
            if (e.spec.tau) {
                if (std::isfinite(*e.spec.tau))
                    t.insert("tau", *e.spec.tau);
                else
                    t.insert("tau", "inf");
            }
            if (e.spec.alpha) t.insert("alpha", *e.spec.alpha);
            if (e.spec.scenarios) t.insert("scenarios", i64(*e.spec.scenarios));
            sw.push_back(t);
        }
        root.insert("sweep", sw);
    }
    root.insert("diagnostics", toml::table{{"stride", i64(c.diagnostics.stride)},
                                           {"scenarios", i64(c.diagnostics.scenarios)},
                                           {"variogram_p", c.diagnostics.variogram_p},
                                           {"ljung_box_lags", i64(c.diagnostics.ljung_box_lags)},
                                           {"bootstrap_B", i64(c.diagnostics.bootstrap.B)},
                                           {"bootstrap_block", c.diagnostics.bootstrap.block}});
    std::ostringstream os;
    os << root << '\n';
    return os.str();
}

}  // namespace rcd
