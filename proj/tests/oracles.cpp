#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace oracle {

double gaussian_density(const VectorXd& x, const VectorXd& mean, const MatrixXd& cov) {
    const Index d = x.size();
    const VectorXd diff = x - mean;
    const double quad = diff.dot(cov.inverse() * diff);
    return std::exp(-0.5 * quad) / std::sqrt(std::pow(2.0 * std::numbers::pi, static_cast<double>(d)) * cov.determinant());
}

MatrixXd enumerate_filter(const rcd::RegimeModel& model, const MatrixXd& returns) {
    const Index K = model.states();
    const Index T = returns.rows();
    MatrixXd out(T, K);
    for (Index t = 0; t < T; ++t) {
        const Index len = t + 1;
        Index paths = 1;
        for (Index i = 0; i < len; ++i) paths *= K;
        VectorXd mass = VectorXd::Zero(K);
        for (Index code = 0; code < paths; ++code) {
            Index c = code;
            std::vector<Index> s(static_cast<std::size_t>(len));
            for (Index i = 0; i < len; ++i) {
                s[static_cast<std::size_t>(i)] = c % K;
                c /= K;
            }
            double p = model.initial(s[0]);
            for (Index i = 0; i < len; ++i) {
                const Index k = s[static_cast<std::size_t>(i)];
                if (i > 0) p *= model.transition(s[static_cast<std::size_t>(i - 1)], k);
                p *= gaussian_density(returns.row(i).transpose(), model.means[static_cast<std::size_t>(k)],
                                      model.covariances[static_cast<std::size_t>(k)]);
            }
            mass(s.back()) += p;
        }
        out.row(t) = (mass / mass.sum()).transpose();
    }
    return out;
}

MatrixXd simulate_hmm(const rcd::RegimeModel& model, Index T, std::uint64_t seed, std::vector<int>* states) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unif;
    const Index K = model.states();
    const Index d = model.dim();
    std::vector<MatrixXd> chol;
    for (const auto& c : model.covariances) chol.push_back(c.llt().matrixL());
    auto draw = [&](const VectorXd& p) {
        double u = unif(rng), acc = 0.0;
        for (Index k = 0; k < K; ++k) {
            acc += p(k);
            if (u < acc) return k;
        }
        return K - 1;
    };
    MatrixXd out(T, d);
    Index s = draw(model.initial);
    for (Index t = 0; t < T; ++t) {
        if (t > 0) s = draw(model.transition.row(s).transpose());
        VectorXd e(d);
        for (Index j = 0; j < d; ++j) e(j) = normal(rng);
        out.row(t) = (model.means[static_cast<std::size_t>(s)] + chol[static_cast<std::size_t>(s)] * e).transpose();
        if (states) states->push_back(static_cast<int>(s));
    }
    return out;
}

double brute_cvar(const VectorXd& losses, double alpha) {
    const double scale = 1.0 / ((1.0 - alpha) * static_cast<double>(losses.size()));
    double best = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < losses.size(); ++i) {
        const double zeta = losses(i);
        double excess = 0.0;
        for (Index j = 0; j < losses.size(); ++j) excess += std::max(0.0, losses(j) - zeta);
        best = std::min(best, zeta + scale * excess);
    }
    return best;
}

GridResult simplex_grid_search(const rcd::AllocationProblem& p, int steps, bool use_library_cvar) {
    const Index d = p.dim();
    if (d < 1 || d > 3) throw std::invalid_argument("grid search supports d <= 3");
    GridResult best{VectorXd(), std::numeric_limits<double>::infinity(), 0};
    auto consider = [&](const VectorXd& w) {
        for (Index j = 0; j < d; ++j)
            if (w(j) < p.lower(j) - 1e-12 || w(j) > p.upper(j) + 1e-12) return;
        const double turnover = (w - p.prev_weights).cwiseAbs().sum();
        if (std::isfinite(p.tau) && turnover > p.tau + 1e-12) return;
        double obj = -p.lambda_mu * p.mu_hat.dot(w) + p.gamma * w.dot(p.sigma_hat * w) + p.kappa * turnover;
        if (p.cvar_term) {
            const VectorXd losses = -(p.scenarios * w);
            obj += use_library_cvar ? rcd::cvar_empirical(losses, p.alpha).cvar : brute_cvar(losses, p.alpha);
        }
        ++best.points;
        if (obj < best.objective) {
            best.objective = obj;
            best.w = w;
        }
    };
    const double h = 1.0 / steps;
    if (d == 1) {
        consider(VectorXd::Ones(1));
    } else if (d == 2) {
        for (int i = 0; i <= steps; ++i) {
            VectorXd w(2);
            w << i * h, static_cast<double>(steps - i) * h;
            consider(w);
        }
    } else {
        for (int i = 0; i <= steps; ++i)
            for (int j = 0; i + j <= steps; ++j) {
                VectorXd w(3);
                w << i * h, j * h, static_cast<double>(steps - i - j) * h;
                consider(w);
            }
    }
    return best;
}

double ecdf_sup(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> pts(a);
    pts.insert(pts.end(), b.begin(), b.end());
    double best = 0.0;
    for (double x : pts) {
        const double fa = static_cast<double>(std::count_if(a.begin(), a.end(), [&](double v) { return v <= x; })) /
                          static_cast<double>(a.size());
        const double fb = static_cast<double>(std::count_if(b.begin(), b.end(), [&](double v) { return v <= x; })) /
                          static_cast<double>(b.size());
        best = std::max(best, std::abs(fa - fb));
    }
    return best;
}

MatrixXd random_spd(Index d, std::uint64_t seed, double scale) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    MatrixXd a(d, d);
    for (Index i = 0; i < d; ++i)
        for (Index j = 0; j < d; ++j) a(i, j) = normal(rng);
    return scale * (a * a.transpose() / static_cast<double>(d) + 0.5 * MatrixXd::Identity(d, d));
}

rcd::AllocationProblem random_allocation_problem(std::uint64_t seed, Index d, Index N, bool with_turnover) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unif;
    const MatrixXd cov = random_spd(d, seed + 1000, 1e-4);
    const MatrixXd L = cov.llt().matrixL();
    VectorXd drift(d);
    for (Index j = 0; j < d; ++j) drift(j) = 5e-4 * normal(rng);
    MatrixXd scen(N, d);
    for (Index i = 0; i < N; ++i) {
        VectorXd e(d);
        for (Index j = 0; j < d; ++j) e(j) = normal(rng);
        scen.row(i) = (drift + L * e).transpose();
    }
    rcd::AllocationProblem p;
    p.scenarios = scen;
    p.mu_hat = scen.colwise().mean().transpose();
    const MatrixXd centered = scen.rowwise() - p.mu_hat.transpose();
    p.sigma_hat = centered.transpose() * centered / static_cast<double>(N - 1) + 1e-8 * MatrixXd::Identity(d, d);
    p.alpha = unif(rng) < 0.5 ? 0.9 : 0.95;
    p.lambda_mu = 1.0;
    p.gamma = 1.0 + 4.0 * unif(rng);
    const bool tight_box = unif(rng) < 0.5;
    p.lower = VectorXd::Constant(d, tight_box ? 0.05 : 0.0);
    p.upper = VectorXd::Constant(d, tight_box ? 0.7 : 1.0);
    if (d == 1) {
        p.lower(0) = 0.0;
        p.upper(0) = 1.0;
    }
    // previous portfolio: a random point of the box-simplex on the 0.01 lattice
    VectorXd prev = VectorXd::Constant(d, 1.0 / static_cast<double>(d));
    if (d > 1) {
        for (int tries = 0; tries < 1000; ++tries) {
            VectorXd raw(d);
            for (Index j = 0; j < d; ++j) raw(j) = -std::log(unif(rng));
            raw /= raw.sum();
            for (Index j = 0; j + 1 < d; ++j) raw(j) = std::round(raw(j) * 100.0) / 100.0;
            raw(d - 1) = 1.0 - raw.head(d - 1).sum();
            if ((raw - p.lower).minCoeff() >= 0.0 && (p.upper - raw).minCoeff() >= 0.0) {
                prev = raw;
                break;
            }
        }
    }
    p.prev_weights = prev;
    if (with_turnover) {
        // multiples of 0.02 put the corners of the turnover ball on the 0.01 grid
        p.tau = 0.02 * std::floor(10.0 + 30.0 * unif(rng));
        p.kappa = unif(rng) < 0.5 ? 0.0 : 1e-3;
    } else {
        p.tau = std::numeric_limits<double>::infinity();
        p.kappa = 0.0;
    }
    return p;
}

}  // namespace oracle
