#include "doctest.h"

#include <cmath>

#include "rcd/config.hpp"

using namespace rcd;

namespace {

const std::string kBase = R"(
[data]
prices = "prices.csv"

[splits]
train_start = "2010-01-01"
train_end = "2015-12-31"
val_start = "2016-01-01"
val_end = "2017-12-31"
test_start = "2018-01-01"
test_end = "2019-12-31"
)";

}  // namespace

TEST_CASE("defaults and path resolution") {
    const RunConfig c = parse_config(kBase, "/base");
    CHECK(c.prices_path() == std::filesystem::path("/base/prices.csv"));
    CHECK(c.backtest.strategies.size() == 5);
    CHECK(c.backtest.alpha == 0.95);
    CHECK(c.backtest.tau == 0.2);
    CHECK(c.backtest.hmm_window == 756);
    CHECK(c.train.ema_decay == 0.999);
    CHECK(c.k_list == std::vector<int>{1, 2, 3, 4});
}

TEST_CASE("unknown keys and tables are rejected") {
    CHECK_THROWS_AS(parse_config(kBase + "[typo]\nx = 1\n", "."), InputError);
    CHECK_THROWS_AS(parse_config(kBase + "[allocator]\nalpah = 0.9\n", "."), InputError);
    CHECK_THROWS_AS(parse_config(kBase + "[allocator]\nalpha = \"high\"\n", "."), InputError);
    CHECK_THROWS_AS(parse_config("[data]\nprices = \"p.csv\"\n", "."), InputError);
    CHECK_THROWS_AS(parse_config(kBase + "[hmm]\nk_list = []\n", "."), InputError);
    CHECK_THROWS_AS(parse_config(kBase + "this is not toml", "."), InputError);
    CHECK_THROWS_AS(parse_config(kBase + "[backtest]\nstrategies = [\"EW\", \"XYZ\"]\n", "."), InputError);
    CHECK_THROWS_AS(load_config("/nonexistent/config.toml"), InputError);
}

TEST_CASE("seed, infinite cap, ablations and sweep") {
    const RunConfig c = parse_config(kBase + R"(
[run]
seed = 99
[allocator]
tau = "inf"
[ablations]
no_cvar = true
unconditional = true
lambda_endpoints = true
[[sweep]]
name = "g5"
gamma = 5.0
[[sweep]]
name = "N256"
scenarios = 256
)",
                                     ".");
    CHECK(c.train.seed == 99);
    CHECK(c.backtest.seed == 99);
    CHECK(c.backtest.em.seed == 99);
    CHECK(c.diagnostics.bootstrap.seed == 99);
    CHECK(std::isinf(c.backtest.tau));
    CHECK(c.train_unconditional);
    std::vector<std::string> names;
    for (const auto& s : c.backtest.strategies) names.push_back(s.name);
    CHECK(names == std::vector<std::string>{"EW", "RP", "BL", "SBB", "MARCD", "MARCD-noCVaR", "MARCD-uncond",
                                            "MARCD-lambda0", "MARCD-lambda1", "MARCD[g5]", "MARCD[N256]"});
    CHECK_FALSE(c.backtest.strategies[5].cvar_term);
    CHECK(c.backtest.strategies[6].unconditional);
    CHECK(*c.backtest.strategies[8].lambda == 1.0);
    CHECK(*c.backtest.strategies[9].gamma == 5.0);
    CHECK(*c.backtest.strategies[10].scenarios == 256);
}

TEST_CASE("resolved config is a fixed point") {
    const RunConfig c = parse_config(kBase + "[train]\nsteps = 123\n[tail]\neta = 0.0\n", "/base");
    const std::string once = resolved_config_toml(c);
    const RunConfig again = parse_config(once, "/base");
    CHECK(resolved_config_toml(again) == once);
    CHECK(again.train.steps == 123);
    CHECK(again.tail.eta == 0.0);
    CHECK(once.find("[allocator]") != std::string::npos);
}
