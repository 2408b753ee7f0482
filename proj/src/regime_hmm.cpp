#include "rcd/regime_hmm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include <spdlog/spdlog.h>

namespace rcd {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double log_sum_exp(const double* v, Index n, Index stride = 1) {
    double m = kNegInf;
    for (Index i = 0; i < n; ++i) m = std::max(m, v[i * stride]);
    if (m == kNegInf) return kNegInf;
    double s = 0.0;
    for (Index i = 0; i < n; ++i) s += std::exp(v[i * stride] - m);
    return m + std::log(s);
}

double log_sum_exp(const VectorXd& v) { return log_sum_exp(v.data(), v.size()); }

/// T x K matrix of log N(x_t; mu_k, Sigma_k).
MatrixXd log_emissions(const RegimeModel& model, const MatrixXd& x) {
    const Index T = x.rows();
    const Index K = model.states();
    const Index d = model.dim();
    MatrixXd out(T, K);
    for (Index k = 0; k < K; ++k) {
        Eigen::LLT<MatrixXd> llt(model.covariances[static_cast<std::size_t>(k)]);
        if (llt.info() != Eigen::Success) throw NumericalError("non-PD covariance in state " + std::to_string(k));
        const MatrixXd& L = llt.matrixL();
        const double log_det = 2.0 * L.diagonal().array().log().sum();
        MatrixXd centered = (x.rowwise() - model.means[static_cast<std::size_t>(k)].transpose()).transpose();
        llt.matrixL().solveInPlace(centered);
        const VectorXd maha = centered.colwise().squaredNorm().transpose();
        out.col(k) = (-0.5 * (static_cast<double>(d) * kLog2Pi + log_det + maha.array())).matrix();
    }
    return out;
}

MatrixXd log_matrix(const MatrixXd& m) {
    MatrixXd out(m.rows(), m.cols());
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j) out(i, j) = m(i, j) > 0.0 ? std::log(m(i, j)) : kNegInf;
    return out;
}

/// log alpha_t(k) = log p(x_0..t, S_t = k).
MatrixXd forward_log(const RegimeModel& model, const MatrixXd& logB) {
    const Index T = logB.rows();
    const Index K = logB.cols();
    const MatrixXd logA = log_matrix(model.transition);
    MatrixXd la(T, K);
    for (Index k = 0; k < K; ++k)
        la(0, k) = (model.initial(k) > 0.0 ? std::log(model.initial(k)) : kNegInf) + logB(0, k);
    VectorXd tmp(K);
    for (Index t = 1; t < T; ++t) {
        for (Index k = 0; k < K; ++k) {
            for (Index j = 0; j < K; ++j) tmp(j) = la(t - 1, j) + logA(j, k);
            la(t, k) = logB(t, k) + log_sum_exp(tmp);
        }
    }
    return la;
}

MatrixXd backward_log(const RegimeModel& model, const MatrixXd& logB) {
    const Index T = logB.rows();
    const Index K = logB.cols();
    const MatrixXd logA = log_matrix(model.transition);
    MatrixXd lb = MatrixXd::Zero(T, K);
    VectorXd tmp(K);
    for (Index t = T - 2; t >= 0; --t) {
        for (Index j = 0; j < K; ++j) {
            for (Index k = 0; k < K; ++k) tmp(k) = logA(j, k) + logB(t + 1, k) + lb(t + 1, k);
            lb(t, j) = log_sum_exp(tmp);
        }
    }
    return lb;
}

void check_dims(const RegimeModel& model, const MatrixXd& returns) {
    if (returns.rows() == 0) throw InputError("filter_posteriors: empty returns");
    if (returns.cols() != model.dim())
        throw InputError("dimension mismatch: model d=" + std::to_string(model.dim()) +
                         ", returns d=" + std::to_string(returns.cols()));
}

MatrixXd regularized(MatrixXd cov, double fallback_scale) {
    const Index d = cov.rows();
    cov = 0.5 * (cov + cov.transpose());
    const double tr = cov.trace();
    cov.diagonal().array() += 1e-8 * tr / static_cast<double>(d);
    Eigen::LLT<MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success || !(tr > 0.0)) cov.diagonal().array() += 1e-6 * fallback_scale;
    return cov;
}

std::vector<Index> kmeanspp_labels(const MatrixXd& x, int K, std::mt19937_64& rng) {
    const Index T = x.rows();
    std::vector<VectorXd> centers;
    std::uniform_int_distribution<Index> pick(0, T - 1);
    centers.push_back(x.row(pick(rng)).transpose());
    VectorXd d2(T);
    while (static_cast<int>(centers.size()) < K) {
        for (Index t = 0; t < T; ++t) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& c : centers) best = std::min(best, (x.row(t).transpose() - c).squaredNorm());
            d2(t) = best;
        }
        const double total = d2.sum();
        Index chosen = pick(rng);
        if (total > 0.0) {
            std::uniform_real_distribution<double> u(0.0, total);
            double target = u(rng);
            chosen = T - 1;
            for (Index t = 0; t < T; ++t) {
                target -= d2(t);
                if (target <= 0.0) {
                    chosen = t;
                    break;
                }
            }
        }
        centers.push_back(x.row(chosen).transpose());
    }
    std::vector<Index> labels(static_cast<std::size_t>(T), 0);
    for (int iter = 0; iter < 100; ++iter) {
        bool changed = false;
        for (Index t = 0; t < T; ++t) {
            Index best_k = 0;
            double best = std::numeric_limits<double>::infinity();
            for (int k = 0; k < K; ++k) {
                const double dist = (x.row(t).transpose() - centers[static_cast<std::size_t>(k)]).squaredNorm();
                if (dist < best) {
                    best = dist;
                    best_k = k;
                }
            }
            if (labels[static_cast<std::size_t>(t)] != best_k) changed = true;
            labels[static_cast<std::size_t>(t)] = best_k;
        }
        for (int k = 0; k < K; ++k) {
            VectorXd sum = VectorXd::Zero(x.cols());
            Index n = 0;
            for (Index t = 0; t < T; ++t)
                if (labels[static_cast<std::size_t>(t)] == k) {
                    sum += x.row(t).transpose();
                    ++n;
                }
            if (n > 0) centers[static_cast<std::size_t>(k)] = sum / static_cast<double>(n);
        }
        if (!changed && iter > 0) break;
    }
    return labels;
}

RegimeModel permuted(const RegimeModel& m, const std::vector<Index>& order) {
    // new state i is old state order[i]
    const Index K = m.states();
    RegimeModel out;
    out.transition.resize(K, K);
    out.initial.resize(K);
    for (Index i = 0; i < K; ++i) {
        const auto oi = static_cast<std::size_t>(order[static_cast<std::size_t>(i)]);
        out.means.push_back(m.means[oi]);
        out.covariances.push_back(m.covariances[oi]);
        out.initial(i) = m.initial(static_cast<Index>(oi));
        for (Index j = 0; j < K; ++j)
            out.transition(i, j) = m.transition(static_cast<Index>(oi), order[static_cast<std::size_t>(j)]);
    }
    return out;
}

RegimeModel sorted_by_volatility(const RegimeModel& m) {
    std::vector<Index> order(static_cast<std::size_t>(m.states()));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
        return m.covariances[static_cast<std::size_t>(a)].trace() < m.covariances[static_cast<std::size_t>(b)].trace();
    });
    return permuted(m, order);
}

}  // namespace

void RegimeModel::validate() const {
    const Index K = states();
    if (K < 1) throw InputError("RegimeModel: no states");
    const Index d = dim();
    if (static_cast<Index>(covariances.size()) != K) throw InputError("RegimeModel: covariance count != K");
    if (transition.rows() != K || transition.cols() != K) throw InputError("RegimeModel: transition must be KxK");
    if (initial.size() != K) throw InputError("RegimeModel: initial must have K entries");
    for (Index k = 0; k < K; ++k) {
        const auto& mu = means[static_cast<std::size_t>(k)];
        const auto& S = covariances[static_cast<std::size_t>(k)];
        if (mu.size() != d || S.rows() != d || S.cols() != d) throw InputError("RegimeModel: inconsistent dimensions");
        if (!mu.allFinite() || !S.allFinite()) throw InputError("RegimeModel: non-finite parameters");
        Eigen::LLT<MatrixXd> llt(S);
        if (llt.info() != Eigen::Success) throw InputError("RegimeModel: non-PD covariance in state " + std::to_string(k));
        if ((transition.row(k).array() < 0.0).any() || std::abs(transition.row(k).sum() - 1.0) > 1e-12)
            throw InputError("RegimeModel: transition row " + std::to_string(k) + " is not stochastic");
    }
    if ((initial.array() < 0.0).any() || std::abs(initial.sum() - 1.0) > 1e-12)
        throw InputError("RegimeModel: initial distribution does not sum to 1");
}

Index RegimeModel::crisis_state() const {
    Index best = 0;
    for (Index k = 1; k < states(); ++k)
        if (covariances[static_cast<std::size_t>(k)].trace() > covariances[static_cast<std::size_t>(best)].trace())
            best = k;
    return best;
}

RegimePosteriors filter_posteriors(const RegimeModel& model, const MatrixXd& returns) {
    check_dims(model, returns);
    const MatrixXd logB = log_emissions(model, returns);
    const MatrixXd la = forward_log(model, logB);
    RegimePosteriors out;
    out.gamma.resize(la.rows(), la.cols());
    for (Index t = 0; t < la.rows(); ++t) {
        const VectorXd row = la.row(t).transpose();
        const double norm = log_sum_exp(row);
        out.gamma.row(t) = (row.array() - norm).exp().matrix().transpose();
        out.gamma.row(t) /= out.gamma.row(t).sum();
    }
    out.loglik = log_sum_exp(VectorXd(la.row(la.rows() - 1).transpose()));
    return out;
}

RegimePosteriors filter_posteriors(const RegimeModel& model, const ReturnPanel& returns) {
    return filter_posteriors(model, returns.returns);
}

RegimeModel fit_em(const MatrixXd& x, int K, const EmOptions& opts, EmTrace* trace,
                   const std::vector<std::string>* asset_names) {
    const Index T = x.rows();
    const Index d = x.cols();
    if (K < 1) throw InputError("fit_em: K must be >= 1");
    if (T < 10 * static_cast<Index>(K))
        throw InputError("fit_em: need T >= 10*K observations (T=" + std::to_string(T) + ")");
    const VectorXd col_var = (x.rowwise() - x.colwise().mean()).colwise().squaredNorm().transpose();
    for (Index j = 0; j < d; ++j) {
        if (!(x.col(j).maxCoeff() > x.col(j).minCoeff())) {
            const std::string name = (asset_names && static_cast<std::size_t>(j) < asset_names->size())
                                         ? (*asset_names)[static_cast<std::size_t>(j)]
                                         : "column " + std::to_string(j);
            throw InputError("fit_em: degenerate data, zero variance in " + name);
        }
    }
    const double global_scale = col_var.sum() / static_cast<double>(T * d);

    std::mt19937_64 rng(opts.seed);
    const auto labels = kmeanspp_labels(x, K, rng);
    const MatrixXd global_cov = (x.rowwise() - x.colwise().mean()).transpose() * (x.rowwise() - x.colwise().mean()) /
                                static_cast<double>(T);

    RegimeModel m;
    m.transition = MatrixXd::Constant(K, K, 1.0 / K);
    m.initial = VectorXd::Constant(K, 1.0 / K);
    for (int k = 0; k < K; ++k) {
        std::vector<Index> members;
        for (Index t = 0; t < T; ++t)
            if (labels[static_cast<std::size_t>(t)] == k) members.push_back(t);
        VectorXd mu = x.colwise().mean().transpose();
        MatrixXd cov = global_cov;
        if (static_cast<Index>(members.size()) > d) {
            MatrixXd sub(static_cast<Index>(members.size()), d);
            for (std::size_t i = 0; i < members.size(); ++i) sub.row(static_cast<Index>(i)) = x.row(members[i]);
            mu = sub.colwise().mean().transpose();
            const MatrixXd c = sub.rowwise() - mu.transpose();
            cov = c.transpose() * c / static_cast<double>(members.size());
        } else if (!members.empty()) {
            mu = x.row(members.front()).transpose();
        }
        m.means.push_back(mu);
        m.covariances.push_back(regularized(cov, global_scale));
    }

    EmTrace local;
    EmTrace& tr = trace ? *trace : local;
    tr = EmTrace{};
    double prev = kNegInf;
    for (int iter = 0; iter < opts.max_iter; ++iter) {
        // E-step
        const MatrixXd logB = log_emissions(m, x);
        const MatrixXd la = forward_log(m, logB);
        const MatrixXd lb = backward_log(m, logB);
        const double ll = log_sum_exp(VectorXd(la.row(T - 1).transpose()));
        if (!std::isfinite(ll)) throw NumericalError("fit_em: non-finite log-likelihood");
        tr.loglik.push_back(ll);
        tr.iterations = iter + 1;
        if (iter > 0 && ll - prev < opts.tol) {
            tr.converged = true;
            break;
        }
        prev = ll;

        MatrixXd post(T, K);
        for (Index t = 0; t < T; ++t) {
            for (Index k = 0; k < K; ++k) post(t, k) = std::exp(la(t, k) + lb(t, k) - ll);
            post.row(t) /= post.row(t).sum();
        }
        const MatrixXd logA = log_matrix(m.transition);
        MatrixXd xi_sum = MatrixXd::Zero(K, K);
        for (Index t = 0; t + 1 < T; ++t)
            for (Index j = 0; j < K; ++j)
                for (Index k = 0; k < K; ++k)
                    xi_sum(j, k) += std::exp(la(t, j) + logA(j, k) + logB(t + 1, k) + lb(t + 1, k) - ll);

        // M-step
        m.initial = post.row(0).transpose();
        m.initial /= m.initial.sum();
        for (Index j = 0; j < K; ++j) {
            const double row = xi_sum.row(j).sum();
            if (row > 0.0) m.transition.row(j) = xi_sum.row(j) / row;
            m.transition.row(j) /= m.transition.row(j).sum();
        }
        for (Index k = 0; k < K; ++k) {
            const double nk = post.col(k).sum();
            if (nk < 1e-10) continue;  // empty state keeps its previous emission
            const VectorXd mu = (x.transpose() * post.col(k)) / nk;
            const MatrixXd c = x.rowwise() - mu.transpose();
            const MatrixXd cov = c.transpose() * post.col(k).asDiagonal() * c / nk;
            m.means[static_cast<std::size_t>(k)] = mu;
            m.covariances[static_cast<std::size_t>(k)] = regularized(cov, global_scale);
        }
    }
    return sorted_by_volatility(m);
}

RegimeModel fit_em(const ReturnPanel& returns, int K, const EmOptions& opts, EmTrace* trace) {
    return fit_em(returns.returns, K, opts, trace, &returns.assets);
}

LabelAlignment parse_label_alignment(const std::string& s) {
    if (s == "means") return LabelAlignment::Means;
    if (s == "means_vols") return LabelAlignment::MeansAndVols;
    throw InputError("unknown label alignment '" + s + "' (expected means or means_vols)");
}

std::string to_string(LabelAlignment a) { return a == LabelAlignment::Means ? "means" : "means_vols"; }

RegimeModel align_labels(const RegimeModel& next, const RegimeModel& previous, LabelAlignment on) {
    const Index K = next.states();
    if (previous.states() != K) return next;
    auto signature = [&](const RegimeModel& m, Index k) {
        const auto ks = static_cast<std::size_t>(k);
        if (on == LabelAlignment::Means) return VectorXd(m.means[ks]);
        VectorXd v(2 * m.dim());
        v << m.means[ks], m.covariances[ks].diagonal().cwiseSqrt();
        return v;
    };
    std::vector<Index> order(static_cast<std::size_t>(K), -1);  // order[prev slot] = next state
    std::vector<bool> used_next(static_cast<std::size_t>(K), false), used_prev(static_cast<std::size_t>(K), false);
    for (Index step = 0; step < K; ++step) {
        double best = std::numeric_limits<double>::infinity();
        Index bi = -1, bj = -1;
        for (Index i = 0; i < K; ++i) {
            if (used_prev[static_cast<std::size_t>(i)]) continue;
            for (Index j = 0; j < K; ++j) {
                if (used_next[static_cast<std::size_t>(j)]) continue;
                const double dist = (signature(previous, i) - signature(next, j)).norm();
                if (dist < best) {
                    best = dist;
                    bi = i;
                    bj = j;
                }
            }
        }
        used_prev[static_cast<std::size_t>(bi)] = true;
        used_next[static_cast<std::size_t>(bj)] = true;
        order[static_cast<std::size_t>(bi)] = bj;
    }
    return permuted(next, order);
}

std::vector<RegimeRefit> rolling_refit(const ReturnPanel& returns, int K, Index window_days, Index refit_stride,
                                       const EmOptions& opts, Index first_index, LabelAlignment align) {
    const Index T = returns.rows();
    if (refit_stride < 1) throw InputError("rolling_refit: stride must be >= 1");
    if (window_days < 1 || window_days > T) throw InputError("rolling_refit: window longer than the data");
    if (first_index < 0) first_index = window_days - 1;
    if (first_index - window_days + 1 < 0)
        throw InputError("rolling_refit: window longer than available history at first refit date " +
                         returns.dates[static_cast<std::size_t>(std::min(first_index, T - 1))]);
    std::vector<RegimeRefit> out;
    for (Index t = first_index; t < T; t += refit_stride) {
        EmOptions o = opts;
        o.seed = derive_seed(opts.seed, static_cast<std::uint64_t>(t));
        const MatrixXd window = returns.returns.middleRows(t - window_days + 1, window_days);
        RegimeModel m = fit_em(window, K, o, nullptr, &returns.assets);
        if (!out.empty()) m = align_labels(m, out.back().model, align);
        out.push_back({t, returns.dates[static_cast<std::size_t>(t)], std::move(m)});
    }
    return out;
}

const RegimeRefit* model_at(const std::vector<RegimeRefit>& refits, Index t) {
    const RegimeRefit* best = nullptr;
    for (const auto& r : refits) {
        if (r.index > t) break;
        best = &r;
    }
    return best;
}

MatrixXd walk_forward_posteriors(const ReturnPanel& returns, const std::vector<RegimeRefit>& refits,
                                 Index window_days) {
    const Index T = returns.rows();
    const Index K = refits.empty() ? 0 : refits.front().model.states();
    MatrixXd out = MatrixXd::Constant(T, K, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t r = 0; r < refits.size() && refits[r].index < T; ++r) {
        const Index start = std::max<Index>(0, refits[r].index - window_days + 1);
        const Index stop = (r + 1 < refits.size()) ? std::min(refits[r + 1].index, T) : T;
        const auto post = filter_posteriors(refits[r].model, MatrixXd(returns.returns.middleRows(start, stop - start)));
        out.middleRows(refits[r].index, stop - refits[r].index) =
            post.gamma.bottomRows(stop - refits[r].index);
    }
    return out;
}

Index ContextSpec::dimension(Index K, Index d) const {
    return (posteriors ? K : 0) + (one_hot ? K : 0) + (trailing_vol ? d : 0) + (trailing_mean ? d : 0);
}

RegimeContext context_features(const VectorXd& pi, const ReturnPanel& returns, Index date_index,
                               const ContextSpec& spec) {
    const Index d = returns.cols();
    const Index K = pi.size();
    const Index L = spec.lookback;
    if (L < 2) throw InputError("context_features: lookback must be >= 2");
    if (date_index + 1 < L || date_index >= returns.rows())
        throw InputError("context_features: insufficient history at row " + std::to_string(date_index));
    if (!pi.allFinite()) throw InputError("context_features: posterior row not available");
    const MatrixXd win = returns.returns.middleRows(date_index - L + 1, L);
    const VectorXd mean = win.colwise().mean().transpose();
    VectorXd z(spec.dimension(K, d));
    Index pos = 0;
    if (spec.posteriors) {
        z.segment(pos, K) = pi;
        pos += K;
    }
    if (spec.one_hot) {
        Index arg = 0;
        pi.maxCoeff(&arg);
        z.segment(pos, K).setZero();
        z(pos + arg) = 1.0;
        pos += K;
    }
    if (spec.trailing_vol) {
        const VectorXd var =
            (win.rowwise() - mean.transpose()).colwise().squaredNorm().transpose() / static_cast<double>(L - 1);
        z.segment(pos, d) = (var.array().sqrt() * std::sqrt(252.0)).matrix();
        pos += d;
    }
    if (spec.trailing_mean) {
        z.segment(pos, d) = mean;
        pos += d;
    }
    return {z};
}

RegimeContext context_features(const RegimePosteriors& posteriors, const ReturnPanel& returns, Index date_index,
                               const ContextSpec& spec) {
    if (date_index >= posteriors.gamma.rows()) throw InputError("context_features: posterior row out of range");
    return context_features(VectorXd(posteriors.gamma.row(date_index).transpose()), returns, date_index, spec);
}

Index free_parameters(Index K, Index d) { return K * d + K * d * (d + 1) / 2 + K * (K - 1) + (K - 1); }

double bic_from(double loglik, Index params, double T) { return -2.0 * loglik + static_cast<double>(params) * std::log(T); }

double bic(const RegimeModel& model, const MatrixXd& returns) {
    const auto post = filter_posteriors(model, returns);
    return bic_from(post.loglik, free_parameters(model.states(), model.dim()), static_cast<double>(returns.rows()));
}

nlohmann::json to_json(const RegimeModel& model) {
    auto mat = [](const MatrixXd& m) {
        nlohmann::json rows = nlohmann::json::array();
        for (Index i = 0; i < m.rows(); ++i) {
            nlohmann::json r = nlohmann::json::array();
            for (Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
            rows.push_back(r);
        }
        return rows;
    };
    nlohmann::json j;
    j["K"] = model.states();
    j["d"] = model.dim();
    j["crisis_state"] = model.crisis_state();
    j["means"] = nlohmann::json::array();
    j["covariances"] = nlohmann::json::array();
    for (Index k = 0; k < model.states(); ++k) {
        j["means"].push_back(std::vector<double>(model.means[static_cast<std::size_t>(k)].data(),
                                                 model.means[static_cast<std::size_t>(k)].data() + model.dim()));
        j["covariances"].push_back(mat(model.covariances[static_cast<std::size_t>(k)]));
    }
    j["transition"] = mat(model.transition);
    j["initial"] = std::vector<double>(model.initial.data(), model.initial.data() + model.initial.size());
    return j;
}

RegimeModel regime_model_from_json(const nlohmann::json& j) {
    try {
        RegimeModel m;
        const Index K = j.at("K").get<Index>();
        const Index d = j.at("d").get<Index>();
        auto mat = [](const nlohmann::json& rows, Index r, Index c) {
            MatrixXd out(r, c);
            if (static_cast<Index>(rows.size()) != r) throw InputError("matrix row count mismatch");
            for (Index i = 0; i < r; ++i) {
                if (static_cast<Index>(rows[static_cast<std::size_t>(i)].size()) != c)
                    throw InputError("matrix column count mismatch");
                for (Index k = 0; k < c; ++k) out(i, k) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)].get<double>();
            }
            return out;
        };
        for (Index k = 0; k < K; ++k) {
            const auto mu = j.at("means").at(static_cast<std::size_t>(k)).get<std::vector<double>>();
            if (static_cast<Index>(mu.size()) != d) throw InputError("mean length mismatch");
            m.means.push_back(Eigen::Map<const VectorXd>(mu.data(), d));
            m.covariances.push_back(mat(j.at("covariances").at(static_cast<std::size_t>(k)), d, d));
        }
        m.transition = mat(j.at("transition"), K, K);
        const auto init = j.at("initial").get<std::vector<double>>();
        if (static_cast<Index>(init.size()) != K) throw InputError("initial length mismatch");
        m.initial = Eigen::Map<const VectorXd>(init.data(), K);
        m.validate();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("invalid RegimeModel JSON: ") + e.what());
    }
}

void write_posteriors_csv(const std::vector<std::string>& dates, const MatrixXd& gamma,
                          const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write file: " + path.string());
    out << "date";
    for (Index k = 0; k < gamma.cols(); ++k) out << ",pi_" << (k + 1);
    out << '\n';
    for (Index t = 0; t < gamma.rows(); ++t) {
        if (!gamma.row(t).allFinite()) continue;
        out << dates[static_cast<std::size_t>(t)];
        for (Index k = 0; k < gamma.cols(); ++k) out << ',' << format_double(gamma(t, k));
        out << '\n';
    }
}

}  // namespace rcd
