#include "doctest.h"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "oracles.hpp"
#include "rcd/diagnostics.hpp"
#include "rcd/stats.hpp"

using namespace rcd;

namespace {

VectorXd white_noise(Index T, std::uint64_t seed, double mean = 0.0, double sd = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(mean, sd);
    VectorXd v(T);
    for (auto& x : v) x = n(rng);
    return v;
}

ScenarioSet set_of(const MatrixXd& m) {
    ScenarioSet s;
    s.scenarios = m;
    return s;
}

}  // namespace

TEST_CASE("incomplete gamma against Boost") {
    for (double a : {0.5, 1.0, 2.5, 5.0, 10.0, 50.0})
        for (double x : {0.0, 0.01, 0.5, 1.0, 3.0, 7.5, 20.0, 80.0}) {
            CHECK(gamma_p(a, x) == doctest::Approx(boost::math::gamma_p(a, x)).epsilon(1e-12));
            const double q = boost::math::gamma_q(a, x);
            CHECK(std::abs(gamma_q(a, x) - q) <= 1e-12 * std::max(q, 1e-300) + 1e-300);
        }
    boost::math::chi_squared_distribution<double> chi1(1.0), chi10(10.0);
    CHECK(chi2_sf(3.841, 1.0) == doctest::Approx(boost::math::cdf(boost::math::complement(chi1, 3.841))).epsilon(1e-12));
    CHECK(chi2_cdf(12.0, 10.0) == doctest::Approx(boost::math::cdf(chi10, 12.0)).epsilon(1e-12));
    CHECK(chi2_sf(0.0, 3.0) == 1.0);
}

TEST_CASE("KS statistic") {
    const std::vector<double> a{0.1, -0.2, 0.3, 0.0};
    CHECK(ks_statistic(a, a) == 0.0);
    CHECK(ks_statistic({1.0, 2.0, 3.0}, {-1.0, 0.0, -0.5}) == 1.0);
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<int> pick(-5, 5);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<double> x(3 + trial % 7), y(2 + trial % 5);
        for (auto& v : x) v = pick(rng) * 0.01;  // ties on purpose
        for (auto& v : y) v = pick(rng) * 0.01;
        CHECK(ks_statistic(x, y) == doctest::Approx(oracle::ecdf_sup(x, y)).epsilon(1e-15));
    }
    MatrixXd realized(4, 2);
    realized << 0.1, 1, -0.2, 2, 0.3, 3, 0.0, 4;
    const auto r = ks_avg({set_of(realized.topRows(2)), set_of(realized.bottomRows(2))}, realized);
    CHECK(r.average == 0.0);
    CHECK(r.per_asset.size() == 2);
    CHECK_THROWS_AS(ks_statistic({}, {1.0}), InputError);
}

TEST_CASE("energy score") {
    const VectorXd y = (VectorXd(2) << 0.01, -0.02).finished();
    CHECK(energy_score(y.transpose().replicate(5, 1), y) == 0.0);
    CHECK(energy_score((MatrixXd(2, 1) << 0.0, 2.0).finished(), VectorXd::Constant(1, 1.0)) == doctest::Approx(0.5).epsilon(1e-15));
    // N=2, d=2: x1=(0,0), x2=(3,4), y=(0,4): (4 + 3)/2 - (5+5)/8
    MatrixXd two(2, 2);
    two << 0, 0, 3, 4;
    CHECK(std::abs(energy_score(two, (VectorXd(2) << 0, 4).finished()) - (3.5 - 1.25)) <= 1e-12);
    const MatrixXd X = Eigen::Map<const MatrixXd>(white_noise(30, 1).data(), 10, 3);
    const VectorXd obs = white_noise(3, 2), shift = white_noise(3, 3);
    CHECK(energy_score(X.rowwise() + shift.transpose(), obs + shift) == doctest::Approx(energy_score(X, obs)).epsilon(1e-12));
    CHECK_THROWS_AS(energy_score(X, VectorXd::Zero(2)), InputError);
}

TEST_CASE("variogram score") {
    const VectorXd y = (VectorXd(3) << 0.01, -0.02, 0.005).finished();
    CHECK(variogram_score(y.transpose().replicate(4, 1), y) == 0.0);
    CHECK(variogram_score((MatrixXd(1, 2) << 0.0, 1.0).finished(), (VectorXd(2) << 0.0, 3.0).finished(), 1.0) == 4.0);
    // N=2, d=2, p=0.5: pair diff |1-0|=1 and |0-4|=4 -> mean sqrt = 1.5; observed sqrt(9)=3 -> (3-1.5)^2
    MatrixXd two(2, 2);
    two << 0, 1, 4, 0;
    CHECK(std::abs(variogram_score(two, (VectorXd(2) << 0, 9).finished(), 0.5) - 2.25) <= 1e-12);
    const MatrixXd X = Eigen::Map<const MatrixXd>(white_noise(40, 4).data(), 10, 4);
    const VectorXd obs = white_noise(4, 5);
    CHECK(variogram_score((X.array() + 0.7).matrix(), (obs.array() + 0.7).matrix()) ==
          doctest::Approx(variogram_score(X, obs)).epsilon(1e-12));
    CHECK_THROWS_AS(variogram_score(MatrixXd::Zero(3, 1), VectorXd::Zero(1)), InputError);
}

TEST_CASE("Ljung-Box") {
    const VectorXd wn = white_noise(5000, 2020);
    const auto lb = ljung_box(wn, 10);
    CHECK(lb.p_value > 0.01);
    // oracle: direct formula and Boost chi-square
    const double m = wn.mean();
    const double denom = (wn.array() - m).square().sum();
    double q = 0.0;
    for (int k = 1; k <= 10; ++k) {
        double num = 0.0;
        for (Index t = k; t < 5000; ++t) num += (wn(t) - m) * (wn(t - k) - m);
        q += std::pow(num / denom, 2) / (5000.0 - k);
    }
    q *= 5000.0 * 5002.0;
    CHECK(lb.q == doctest::Approx(q).epsilon(1e-10));
    boost::math::chi_squared_distribution<double> chi(10.0);
    CHECK(lb.p_value == doctest::Approx(boost::math::cdf(boost::math::complement(chi, q))).epsilon(1e-10));

    VectorXd alt(200);
    for (Index t = 0; t < 200; ++t) alt(t) = t % 2 ? 1.0 : -1.0;
    CHECK(ljung_box(alt, 1).p_value < 1e-6);
    CHECK(ljung_box(VectorXd::Constant(50, 0.3), 5).p_value == 1.0);
    CHECK_THROWS_AS(ljung_box(VectorXd::Zero(5), 10), InputError);
}

TEST_CASE("Kupiec unconditional coverage") {
    CHECK(std::abs(kupiec_p_from_lr(3.841) - 0.05) <= 1e-3);
    const auto perfect = kupiec_uc(5, 100, 0.95);
    CHECK(perfect.lr == 0.0);
    CHECK(perfect.p_value == 1.0);
    CHECK(kupiec_uc(50, 1000, 0.95).p_value == 1.0);
    const auto none = kupiec_uc(0, 100, 0.95);
    CHECK(none.lr == doctest::Approx(-200.0 * std::log(0.95)).epsilon(1e-12));
    CHECK(none.lr == doctest::Approx(10.26).epsilon(1e-3));
    boost::math::chi_squared_distribution<double> chi(1.0);
    CHECK(none.p_value == doctest::Approx(boost::math::cdf(boost::math::complement(chi, none.lr))).epsilon(1e-10));
    CHECK(none.p_value == doctest::Approx(0.00136).epsilon(1e-2));
    const auto all = kupiec_uc(100, 100, 0.95);
    CHECK(all.lr == doctest::Approx(-200.0 * std::log(0.05)).epsilon(1e-12));
    // generic case against the textbook expression
    const double x = 9, T = 120, p0 = 0.05, ph = x / T;
    const double lr = -2.0 * ((T - x) * std::log(1 - p0) + x * std::log(p0) - (T - x) * std::log(1 - ph) - x * std::log(ph));
    CHECK(kupiec_uc(9, 120, 0.95).lr == doctest::Approx(lr).epsilon(1e-10));
    CHECK_THROWS_AS(kupiec_uc(0, 0, 0.95), InputError);
}

TEST_CASE("CVaR error in basis points") {
    const VectorXd losses = white_noise(200, 8, 0.0, 0.01);
    const double emp = cvar_empirical(losses, 0.95).cvar;
    CHECK(cvar_error_bps(VectorXd::Constant(200, emp), losses, 0.95) <= 1e-12);
    VectorXd ten(20);
    for (int i = 0; i < 20; ++i) ten(i) = i < 19 ? 0.0 : 0.01;  // CVaR_0.95 of 20 values = 0.01
    CHECK(cvar_error_bps(VectorXd::Constant(20, 0.0115), ten, 0.95) == doctest::Approx(15.0).epsilon(1e-10));
    CHECK(cvar_error_bps(VectorXd::Constant(20, 0.0085), ten, 0.95) == doctest::Approx(15.0).epsilon(1e-10));
    CHECK_THROWS_AS(cvar_error_bps(VectorXd(0), ten, 0.95), InputError);
    CHECK_THROWS_AS(cvar_error_bps(VectorXd::Zero(3), ten, 0.95), InputError);
}

TEST_CASE("Sharpe uplift bootstrap") {
    const VectorXd a = white_noise(500, 1, 0.0005, 0.01);
    const auto same = sharpe_uplift_ci(a, a);
    CHECK(same.delta == 0.0);
    CHECK(same.lo <= 0.0);
    CHECK(same.hi >= 0.0);
    CHECK(same.p_two_sided == 1.0);

    const VectorXd b = white_noise(500, 2, 0.0, 0.01);
    const auto drift = sharpe_uplift_ci((b.array() + 0.004).matrix(), b);
    CHECK(drift.delta > 0.0);
    CHECK(drift.p_two_sided < 0.05);
    CHECK(drift.lo > 0.0);
    CHECK_THROWS_AS(sharpe_uplift_ci(a, b.head(10)), InputError);
    CHECK(annualized_sharpe(VectorXd::Constant(20, 0.001)) == 0.0);
}

TEST_CASE("report schema and CSV") {
    DiagnosticsReport r;
    r.generator = "MARCD";
    r.dates = 10;
    r.ks_avg = 0.1;
    r.ks_per_asset = {0.1, 0.1};
    r.kupiec_uc_p = 0.5;
    r.violations = 1;
    r.trials = 10;
    const auto j = to_json(r, {"A", "B"});
    for (const char* key : {"generator", "ks_avg", "energy_score", "variogram_score", "ljung_box_p_absr", "kupiec_uc_p",
                            "cvar_error_bps", "ess_value"})
        CHECK(j.contains(key));
    const auto back = diagnostics_from_json(j);
    CHECK(back.generator == "MARCD");
    CHECK(back.ks_per_asset == r.ks_per_asset);
    CHECK(back.violations == 1);
    const auto path = std::filesystem::temp_directory_path() / "rcd_table1.csv";
    write_table1_csv({r, r}, path);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "generator,KS,ES,VS,LB_p,UC_p,CVaR_err_bps");
    std::filesystem::remove(path);
}
