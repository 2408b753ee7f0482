#include "rcd/synthetic.hpp"

#include <chrono>
#include <cstdio>
#include <random>

namespace rcd {

namespace {

std::chrono::sys_days parse_day(const std::string& iso) {
    const std::string s = normalize_iso_date(iso);
    const int y = std::stoi(s.substr(0, 4));
    const unsigned m = static_cast<unsigned>(std::stoi(s.substr(5, 2)));
    const unsigned d = static_cast<unsigned>(std::stoi(s.substr(8, 2)));
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (!ymd.ok()) throw InputError("invalid date: " + iso);
    return std::chrono::sys_days{ymd};
}

std::string format_day(std::chrono::sys_days day) {
    const std::chrono::year_month_day ymd{day};
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()));
    return buf;
}

MatrixXd covariance(const VectorXd& vol, double eq_eq, double eq_bond, double eq_gold, double bond_gold) {
    const Index d = vol.size();
    MatrixXd corr = MatrixXd::Identity(d, d);
    for (Index i = 0; i < 4; ++i) {
        for (Index j = 0; j < 4; ++j)
            if (i != j) corr(i, j) = eq_eq;
        corr(i, 4) = corr(4, i) = eq_bond;
        corr(i, 5) = corr(5, i) = eq_gold;
    }
    corr(4, 5) = corr(5, 4) = bond_gold;
    return vol.asDiagonal() * corr * vol.asDiagonal();
}

VectorXd vec(std::initializer_list<double> v) {
    VectorXd out(static_cast<Index>(v.size()));
    Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

}  // namespace

std::vector<std::string> business_days(const std::string& start, const std::string& end) {
    std::vector<std::string> out;
    const auto last = parse_day(end);
    for (auto day = parse_day(start); day <= last; day += std::chrono::days{1}) {
        const unsigned wd = std::chrono::weekday{day}.c_encoding();
        if (wd != 0 && wd != 6) out.push_back(format_day(day));
    }
    return out;
}

MatrixXd gaussian_rows(Index T, const VectorXd& mu, const MatrixXd& cov, std::uint64_t seed) {
    Eigen::LLT<MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) throw InputError("gaussian_rows: covariance is not positive definite");
    const MatrixXd L = llt.matrixL();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01(0.0, 1.0);
    MatrixXd out(T, mu.size());
    VectorXd e(mu.size());
    for (Index t = 0; t < T; ++t) {
        for (Index j = 0; j < e.size(); ++j) e(j) = n01(rng);
        out.row(t) = (mu + L * e).transpose();
    }
    return out;
}

MatrixXd regime_rows(Index T, const std::vector<VectorXd>& means, const std::vector<MatrixXd>& covs,
                     const MatrixXd& transition, std::uint64_t seed, std::vector<int>* states) {
    const Index K = static_cast<Index>(means.size());
    const Index d = means.front().size();
    std::vector<MatrixXd> chol;
    for (const auto& c : covs) {
        Eigen::LLT<MatrixXd> llt(c);
        if (llt.info() != Eigen::Success) throw InputError("regime_rows: covariance is not positive definite");
        chol.push_back(llt.matrixL());
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01(0.0, 1.0);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    MatrixXd out(T, d);
    VectorXd e(d);
    int s = 0;
    if (states) states->assign(static_cast<std::size_t>(T), 0);
    for (Index t = 0; t < T; ++t) {
        if (t > 0) {
            double u = u01(rng);
            int next = static_cast<int>(K) - 1;
            for (Index k = 0; k < K; ++k) {
                u -= transition(s, k);
                if (u < 0.0) {
                    next = static_cast<int>(k);
                    break;
                }
            }
            s = next;
        }
        for (Index j = 0; j < d; ++j) e(j) = n01(rng);
        out.row(t) = (means[static_cast<std::size_t>(s)] + chol[static_cast<std::size_t>(s)] * e).transpose();
        if (states) (*states)[static_cast<std::size_t>(t)] = s;
    }
    return out;
}

SyntheticData make_synthetic(const SyntheticSpec& spec) {
    const auto dates = business_days(spec.start, spec.end);
    if (dates.size() < 3) throw InputError("synthetic: date range too short");
    const Index T = static_cast<Index>(dates.size()) - 1;

    const std::vector<VectorXd> means = {
        vec({6e-4, 5e-4, 4e-4, 6e-4, 1.5e-4, 2e-4}),
        vec({3e-4, 2e-4, 2e-4, 3e-4, 1e-4, 2e-4}),
        vec({-45e-4, -48e-4, -42e-4, -55e-4, 5e-4, 6e-4}),
    };
    const std::vector<MatrixXd> covs = {
        covariance(vec({0.008, 0.009, 0.009, 0.011, 0.003, 0.008}), 0.60, -0.20, 0.05, 0.20),
        covariance(vec({0.013, 0.014, 0.014, 0.017, 0.004, 0.010}), 0.70, -0.30, 0.00, 0.20),
        covariance(vec({0.032, 0.034, 0.030, 0.040, 0.007, 0.016}), 0.88, -0.40, -0.10, 0.30),
    };
    MatrixXd P(3, 3);
    P << 0.985, 0.013, 0.002,
         0.012, 0.982, 0.006,
         0.010, 0.040, 0.950;

    // Chain noise and the forced windows come from separate streams so that planting does not
    // shift the rest of the path.
    std::vector<int> states;
    MatrixXd chain = regime_rows(T, means, covs, P, derive_seed(spec.seed, 0), &states);
    if (spec.plant_crises) {
        const std::vector<std::pair<std::string, std::string>> windows = {
            {"2011-08-04", "2011-09-30"}, {"2015-08-20", "2015-09-29"}, {"2018-10-08", "2018-12-24"},
            {"2020-02-21", "2020-04-09"}};
        const MatrixXd L = covs[2].llt().matrixL();
        std::mt19937_64 rng(derive_seed(spec.seed, 1));
        std::normal_distribution<double> n01(0.0, 1.0);
        VectorXd e(6);
        for (Index t = 0; t < T; ++t) {
            const std::string& day = dates[static_cast<std::size_t>(t + 1)];
            for (const auto& [a, b] : windows) {
                if (day >= a && day <= b) {
                    for (Index j = 0; j < 6; ++j) e(j) = n01(rng);
                    chain.row(t) = (means[2] + L * e).transpose();
                    states[static_cast<std::size_t>(t)] = 2;
                }
            }
        }
    }
    chain = chain.cwiseMax(-0.5);

    ReturnPanel rp;
    rp.dates.assign(dates.begin() + 1, dates.end());
    rp.assets = {"EQ_US", "EQ_EU", "EQ_JP", "EQ_EM", "BOND", "GOLD"};
    rp.returns = chain;
    SyntheticData out;
    out.prices = prices_from_returns(rp, VectorXd::Constant(6, spec.first_price), dates.front());
    out.states = std::move(states);
    return out;
}

}  // namespace rcd
