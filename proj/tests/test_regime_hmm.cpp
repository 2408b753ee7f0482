#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "rcd/regime_hmm.hpp"
#include "rcd/synthetic.hpp"

using namespace rcd;

namespace {

RegimeModel two_state_model() {
    RegimeModel m;
    m.means = {VectorXd::Constant(2, 0.01), VectorXd::Constant(2, -0.02)};
    MatrixXd c0(2, 2), c1(2, 2);
    c0 << 1e-4, 2e-5, 2e-5, 2e-4;
    c1 << 9e-4, 4e-4, 4e-4, 1e-3;
    m.covariances = {c0, c1};
    m.transition.resize(2, 2);
    m.transition << 0.95, 0.05, 0.10, 0.90;
    m.initial = VectorXd::Constant(2, 0.5);
    return m;
}

ReturnPanel panel_from(const MatrixXd& rows) {
    ReturnPanel p;
    p.returns = rows;
    for (Index j = 0; j < rows.cols(); ++j) p.assets.push_back("A" + std::to_string(j));
    const auto days = business_days("2000-01-03", "2030-12-31");
    p.dates.assign(days.begin(), days.begin() + rows.rows());
    return p;
}

}  // namespace

TEST_CASE("filter: single state gives posterior one") {
    RegimeModel m;
    m.means = {VectorXd::Zero(2)};
    m.covariances = {MatrixXd::Identity(2, 2) * 1e-4};
    m.transition = MatrixXd::Ones(1, 1);
    m.initial = VectorXd::Ones(1);
    const MatrixXd r = oracle::simulate_hmm(two_state_model(), 30, 3);
    const auto post = filter_posteriors(m, r);
    CHECK((post.gamma.array() - 1.0).abs().maxCoeff() == 0.0);
}

TEST_CASE("filter: identical emissions and symmetric transition give one half") {
    RegimeModel m = two_state_model();
    m.means[1] = m.means[0];
    m.covariances[1] = m.covariances[0];
    m.transition << 0.8, 0.2, 0.2, 0.8;
    const auto post = filter_posteriors(m, oracle::simulate_hmm(two_state_model(), 25, 4));
    CHECK((post.gamma.array() - 0.5).abs().maxCoeff() < 1e-15);
}

TEST_CASE("filter: matches enumeration over all 2^5 paths") {
    const RegimeModel m = two_state_model();
    const MatrixXd r = oracle::simulate_hmm(m, 5, 11);
    const auto post = filter_posteriors(m, r);
    const MatrixXd ref = oracle::enumerate_filter(m, r);
    CHECK((post.gamma - ref).cwiseAbs().maxCoeff() <= 1e-10);
    // loglik equals the log of the total path mass
    double total = 0.0;
    RegimeModel copy = m;
    for (Index code = 0; code < 32; ++code) {
        double p = m.initial(code & 1);
        for (Index i = 0; i < 5; ++i) {
            const Index k = (code >> i) & 1;
            if (i > 0) p *= m.transition((code >> (i - 1)) & 1, k);
            p *= oracle::gaussian_density(r.row(i).transpose(), m.means[static_cast<std::size_t>(k)],
                                          m.covariances[static_cast<std::size_t>(k)]);
        }
        total += p;
    }
    CHECK(post.loglik == doctest::Approx(std::log(total)).epsilon(1e-12));
}

TEST_CASE("filter: row t does not depend on later observations") {
    const RegimeModel m = two_state_model();
    MatrixXd r = oracle::simulate_hmm(m, 40, 5);
    const auto a = filter_posteriors(m, r);
    r.bottomRows(15).array() += 0.3;
    const auto b = filter_posteriors(m, r);
    CHECK(a.gamma.topRows(25) == b.gamma.topRows(25));
}

TEST_CASE("filter: errors") {
    RegimeModel m = two_state_model();
    CHECK_THROWS_AS(filter_posteriors(m, MatrixXd::Zero(5, 3)), InputError);
    m.covariances[0](0, 0) = -1.0;
    CHECK_THROWS(filter_posteriors(m, MatrixXd::Zero(5, 2)));
}

TEST_CASE("EM: log-likelihood never decreases") {
    const MatrixXd r = oracle::simulate_hmm(two_state_model(), 800, 21);
    for (int K : {1, 2, 3}) {
        EmTrace trace;
        EmOptions opts;
        opts.seed = 5;
        fit_em(r, K, opts, &trace);
        REQUIRE(trace.loglik.size() >= 2);
        for (std::size_t i = 1; i < trace.loglik.size(); ++i) CHECK(trace.loglik[i] >= trace.loglik[i - 1] - 1e-9);
    }
}

TEST_CASE("EM: K=1 is the sample mean and ML covariance") {
    const MatrixXd r = oracle::simulate_hmm(two_state_model(), 500, 8);
    const RegimeModel m = fit_em(r, 1);
    const VectorXd mean = r.colwise().mean().transpose();
    const MatrixXd centered = r.rowwise() - mean.transpose();
    const MatrixXd cov = centered.transpose() * centered / static_cast<double>(r.rows());
    CHECK((m.means[0] - mean).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK((m.covariances[0] - cov).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("EM: recovers a well separated two-state chain") {
    RegimeModel truth = two_state_model();
    truth.means = {VectorXd::Constant(2, 0.02), VectorXd::Constant(2, -0.03)};
    const MatrixXd r = oracle::simulate_hmm(truth, 2000, 2024);
    const RegimeModel fit = fit_em(r, 2);
    double best = 1e9;
    for (int perm = 0; perm < 2; ++perm) {
        double err = 0.0;
        for (Index i = 0; i < 2; ++i)
            for (Index j = 0; j < 2; ++j)
                err = std::max(err, std::abs(fit.transition(perm ? 1 - i : i, perm ? 1 - j : j) - truth.transition(i, j)));
        best = std::min(best, err);
    }
    CHECK(best <= 0.05);
    // states are ordered by covariance trace: the high-volatility state is last
    CHECK(fit.crisis_state() == 1);
    CHECK(fit.covariances[0].trace() < fit.covariances[1].trace());
}

TEST_CASE("EM: zero-variance column names the column") {
    MatrixXd r = oracle::simulate_hmm(two_state_model(), 100, 3);
    r.col(1).setConstant(0.01);
    CHECK_THROWS_WITH_AS(fit_em(panel_from(r), 2), doctest::Contains("A1"), InputError);
}

TEST_CASE("rolling refit: cadence, single refit and purity") {
    const ReturnPanel p = panel_from(oracle::simulate_hmm(two_state_model(), 400, 9));
    const auto refits = rolling_refit(p, 2, 200, 21);
    REQUIRE(refits.size() >= 2);
    CHECK(refits.front().index == 199);
    for (std::size_t i = 1; i < refits.size(); ++i) CHECK(refits[i].index - refits[i - 1].index == 21);

    const auto single = rolling_refit(p, 2, 200, p.rows());
    CHECK(single.size() == 1);
    const RegimeModel direct = fit_em(p.returns.topRows(200), 2);
    CHECK(single.front().model.transition == direct.transition);

    const Index t = refits[3].index;
    ReturnPanel tampered = p;
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n;
    for (Index i = t + 1; i < p.rows(); ++i)
        for (Index j = 0; j < p.cols(); ++j) tampered.returns(i, j) += 0.05 * n(rng);
    const auto again = rolling_refit(tampered, 2, 200, 21);
    for (std::size_t i = 0; i <= 3; ++i) {
        CHECK(again[i].model.transition == refits[i].model.transition);
        for (Index k = 0; k < 2; ++k) {
            CHECK(again[i].model.means[static_cast<std::size_t>(k)] == refits[i].model.means[static_cast<std::size_t>(k)]);
            CHECK(again[i].model.covariances[static_cast<std::size_t>(k)] ==
                  refits[i].model.covariances[static_cast<std::size_t>(k)]);
        }
    }
    const MatrixXd wa = walk_forward_posteriors(p, refits, 200);
    const MatrixXd wb = walk_forward_posteriors(tampered, again, 200);
    CHECK(wa.topRows(t + 1).bottomRows(t + 1 - 199) == wb.topRows(t + 1).bottomRows(t + 1 - 199));
    CHECK(std::isnan(wa(0, 0)));

    CHECK_THROWS_AS(rolling_refit(p, 2, 500, 21), InputError);
}

TEST_CASE("label alignment undoes a permutation") {
    RegimeModel a = two_state_model();
    RegimeModel b = a;
    std::swap(b.means[0], b.means[1]);
    std::swap(b.covariances[0], b.covariances[1]);
    b.transition << a.transition(1, 1), a.transition(1, 0), a.transition(0, 1), a.transition(0, 0);
    for (auto on : {LabelAlignment::Means, LabelAlignment::MeansAndVols}) {
        const RegimeModel c = align_labels(b, a, on);
        CHECK(c.means[0] == a.means[0]);
        CHECK(c.transition == a.transition);
    }
}

TEST_CASE("label alignment on volatility when means are close") {
    // next: calm state has a mean slightly nearer the previous crisis mean
    RegimeModel prev = two_state_model(), next = two_state_model();
    prev.means = {VectorXd::Constant(2, 0.0), VectorXd::Constant(2, 0.001)};
    next.means = {VectorXd::Constant(2, 0.0012), VectorXd::Constant(2, 0.0)};
    const RegimeModel by_vol = align_labels(next, prev, LabelAlignment::MeansAndVols);
    CHECK(by_vol.covariances[1] == prev.covariances[1]);
    const RegimeModel by_mean = align_labels(next, prev, LabelAlignment::Means);
    CHECK(by_mean.covariances[1] == prev.covariances[0]);
    CHECK(parse_label_alignment("means") == LabelAlignment::Means);
    CHECK_THROWS_AS(parse_label_alignment("trace"), InputError);
}

TEST_CASE("context features") {
    ReturnPanel p = panel_from(MatrixXd::Constant(30, 2, 0.004));
    VectorXd pi(3);
    pi << 0.0, 1.0, 0.0;
    ContextSpec spec;
    const VectorXd z = context_features(pi, p, 25, spec).z;
    REQUIRE(z.size() == spec.dimension(3, 2));
    CHECK(z.segment(3, 3) == pi);
    CHECK(z.segment(6, 2).cwiseAbs().maxCoeff() == 0.0);

    ReturnPanel toy = panel_from((MatrixXd(3, 1) << 0.01, 0.02, 0.03).finished());
    ContextSpec s3;
    s3.lookback = 3;
    VectorXd pi2(2);
    pi2 << 0.3, 0.7;
    const VectorXd z2 = context_features(pi2, toy, 2, s3).z;
    // [pi; one-hot; sample stdev 0.01 * sqrt(252); mean 0.02]
    CHECK(z2(0) == 0.3);
    CHECK(z2(3) == 1.0);
    CHECK(z2(2) == 0.0);
    CHECK(z2(4) == doctest::Approx(0.01 * std::sqrt(252.0)).epsilon(1e-12));
    CHECK(z2(5) == doctest::Approx(0.02).epsilon(1e-14));
    CHECK_THROWS_AS(context_features(pi2, toy, 1, s3), InputError);
}

TEST_CASE("BIC") {
    CHECK(bic_from(0.0, 5, std::exp(2.0)) == doctest::Approx(10.0).epsilon(1e-15));
    CHECK(free_parameters(2, 3) == 2 * 3 + 2 * 6 + 2 + 1);
    int wins = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        RegimeModel one;
        one.means = {VectorXd::Zero(2)};
        one.covariances = {MatrixXd::Identity(2, 2) * 1e-4};
        one.transition = MatrixXd::Ones(1, 1);
        one.initial = VectorXd::Ones(1);
        const MatrixXd r = oracle::simulate_hmm(one, 500, 100 + seed);
        EmOptions o;
        o.seed = seed;
        const RegimeModel m1 = fit_em(r, 1, o), m2 = fit_em(r, 2, o);
        if (bic(m1, r) < bic(m2, r)) ++wins;
        CHECK(filter_posteriors(m2, r).loglik >= filter_posteriors(m1, r).loglik - 1e-6);
    }
    CHECK(wins >= 6);
}

TEST_CASE("model json round trip") {
    const RegimeModel m = two_state_model();
    const RegimeModel back = regime_model_from_json(to_json(m));
    CHECK(back.transition == m.transition);
    CHECK(back.covariances[1] == m.covariances[1]);
}
