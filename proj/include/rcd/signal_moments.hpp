#pragma once

#include <optional>

#include "json.hpp"

#include "rcd/common.hpp"
#include "rcd/data_io.hpp"
#include "rcd/scenario_gen.hpp"

namespace rcd {

struct MomentsProvenance {
    std::optional<double> lambda;  // blend weight on the synthetic moments
    std::optional<double> delta;   // shrinkage intensity
    Index window = 0;              // rows the estimate was formed from
    std::string source;            // "historical", "scenario", "blend", ...
};

struct Moments {
    VectorXd mu;
    MatrixXd sigma;
    MomentsProvenance provenance;

    Index dim() const { return mu.size(); }
};

/// Sample mean and covariance (denominator window-1) of the trailing `window` rows ending at
/// `end_row` (inclusive; -1 means the last row).
Moments historical_moments(const ReturnPanel& returns, Index window, Index end_row = -1);
Moments historical_moments(const MatrixXd& rows);

Moments scenario_moments(const ScenarioSet& scenarios);

/// lambda * synth + (1 - lambda) * hist, for both moments.
Moments blend(const Moments& synth, const Moments& hist, double lambda);

struct ShrinkResult {
    MatrixXd sigma;
    double delta = 0.0;
    bool degenerate = false;  // trace 0 with delta > 0; sigma is 1e-8 I
};

/// (1 - delta) sigma + delta (trace/d) I.
ShrinkResult shrink(const MatrixXd& sigma, double delta);

/// Ledoit-Wolf intensity toward the scaled identity, estimated from the sample rows.
double ledoit_wolf_intensity(const MatrixXd& rows);
/// Shrink with the Ledoit-Wolf intensity estimated from `rows`.
ShrinkResult shrink_auto(const MatrixXd& sigma, const MatrixXd& rows);

nlohmann::json to_json(const Moments& m);

}  // namespace rcd
