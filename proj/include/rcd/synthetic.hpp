#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rcd/common.hpp"
#include "rcd/data_io.hpp"

namespace rcd {

/// Weekdays from `start` to `end` inclusive, ISO formatted.
std::vector<std::string> business_days(const std::string& start, const std::string& end);

struct SyntheticSpec {
    std::string start = "2010-01-04";
    std::string end = "2021-12-31";
    std::uint64_t seed = 7;
    double first_price = 100.0;
    bool plant_crises = true;  // force the high-volatility state on fixed stress windows
};

struct SyntheticData {
    PricePanel prices;
    std::vector<int> states;  // regime of each return row (0 calm, 1 normal, 2 crisis)
};

/// Six assets (four equity-like, a bond, gold) driven by a three-state Gaussian regime chain.
SyntheticData make_synthetic(const SyntheticSpec& spec = {});

/// i.i.d. Gaussian rows.
MatrixXd gaussian_rows(Index T, const VectorXd& mu, const MatrixXd& cov, std::uint64_t seed);

/// Sample a K-state Gaussian regime chain: returns rows and fills `states`.
MatrixXd regime_rows(Index T, const std::vector<VectorXd>& means, const std::vector<MatrixXd>& covs,
                     const MatrixXd& transition, std::uint64_t seed, std::vector<int>* states = nullptr);

}  // namespace rcd
