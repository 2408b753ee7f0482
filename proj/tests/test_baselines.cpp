#include "doctest.h"

#include "oracles.hpp"
#include "rcd/baselines.hpp"

using namespace rcd;

TEST_CASE("equal weight") {
    CHECK(equal_weight(1)(0) == 1.0);
    CHECK(equal_weight(4) == VectorXd::Constant(4, 0.25));
    CHECK(equal_weight(7).sum() == doctest::Approx(1.0).epsilon(1e-15));
    CHECK_THROWS_AS(equal_weight(0), InputError);
}

TEST_CASE("risk parity") {
    CHECK((risk_parity(MatrixXd::Identity(3, 3)) - VectorXd::Constant(3, 1.0 / 3.0)).cwiseAbs().maxCoeff() <= 1e-12);

    VectorXd sig(3);
    sig << 0.1, 0.2, 0.4;
    const MatrixXd diag = sig.cwiseAbs2().asDiagonal();
    const VectorXd w = risk_parity(diag);
    const VectorXd inv = sig.cwiseInverse() / sig.cwiseInverse().sum();
    CHECK((w - inv).cwiseAbs().maxCoeff() <= 1e-8);

    const MatrixXd S = oracle::random_spd(4, 42, 1e-4);
    RiskParityInfo info;
    const VectorXd r = risk_parity(S, 1e-8, 10000, &info);
    CHECK(r.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.minCoeff() > 0.0);
    const VectorXd rc = risk_contributions(S, r);
    const double total = r.dot(S * r);
    CHECK(rc.sum() == doctest::Approx(total).epsilon(1e-12));
    CHECK((rc.array() - total / 4.0).abs().maxCoeff() / (total / 4.0) <= 1e-8);
    CHECK(info.spread <= 1e-8);

    MatrixXd bad = MatrixXd::Identity(2, 2);
    bad(1, 1) = -1.0;
    CHECK_THROWS_AS(risk_parity(bad), InputError);
}

TEST_CASE("Black-Litterman without views") {
    BaselineSpec spec;
    spec.risk_aversion = 1.0;
    spec.market_weights = VectorXd::Constant(2, 0.5);
    const auto bl = black_litterman_no_views(spec, MatrixXd::Identity(2, 2));
    CHECK(bl.mu_bl == VectorXd::Constant(2, 0.5));
    CHECK(bl.target == VectorXd::Constant(2, 0.5));

    spec.market_weights = (VectorXd(3) << 0.0, 1.0, 0.0).finished();
    CHECK(black_litterman_no_views(spec, MatrixXd::Identity(3, 3)).target == spec.market_weights);

    MatrixXd S(3, 3);
    S << 0.04, 0.01, 0.00,
         0.01, 0.09, 0.02,
         0.00, 0.02, 0.16;
    spec.risk_aversion = 2.5;
    spec.market_weights = (VectorXd(3) << 0.5, 0.3, 0.2).finished();
    const auto r = black_litterman_no_views(spec, S);
    // 2.5 * [0.020+0.003, 0.005+0.027+0.004, 0.006+0.032]
    CHECK(r.mu_bl(0) == doctest::Approx(0.0575).epsilon(1e-14));
    CHECK(r.mu_bl(1) == doctest::Approx(0.09).epsilon(1e-14));
    CHECK(r.mu_bl(2) == doctest::Approx(0.095).epsilon(1e-14));

    BaselineSpec proxy;
    CHECK(proxy.market(4) == equal_weight(4));
    spec.market_weights = (VectorXd(3) << 0.5, 0.6, -0.1).finished();
    CHECK_THROWS_AS(black_litterman_no_views(spec, S), InputError);
}

TEST_CASE("baseline kind parsing") {
    CHECK(parse_baseline_kind("RP") == BaselineKind::RP);
    CHECK_THROWS_AS(parse_baseline_kind("XYZ"), InputError);
}
