#include <algorithm>
#include <cmath>
#include <numbers>

#include "rcd/scenario_gen.hpp"

namespace rcd {

NoiseSchedule cosine_schedule(int steps) {
    if (steps < 2) throw InputError("cosine_schedule: need at least 2 steps");
    constexpr double kOffset = 0.008;
    constexpr double kFloor = 1e-5;
    auto f = [&](double s) {
        const double c = std::cos((s / steps + kOffset) / (1.0 + kOffset) * std::numbers::pi / 2.0);
        return c * c;
    };
    const double f0 = f(0.0);
    NoiseSchedule out;
    out.steps = steps;
    out.alpha_bar.resize(steps + 1);
    out.alpha_bar(0) = 1.0;
    for (int s = 1; s <= steps; ++s) {
        const double ratio = std::clamp(f(static_cast<double>(s)) / f0, 0.0, 1.0);
        out.alpha_bar(s) = kFloor + (1.0 - kFloor) * ratio;
    }
    return out;
}

VectorXd forward_noise(const VectorXd& x0, int s, const VectorXd& eps, const NoiseSchedule& schedule) {
    if (s < 0 || s > schedule.steps) throw InputError("forward_noise: step out of range");
    if (x0.size() != eps.size()) throw InputError("forward_noise: dimension mismatch");
    const double ab = schedule.alpha_bar(s);
    return std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * eps;
}

void TailConfig::validate() const {
    if (!(q > 0.0 && q < 0.5)) throw InputError("tail config: q must lie in (0, 0.5)");
    if (!(eta >= 0.0)) throw InputError("tail config: eta must be >= 0");
    if (!(quantile_ema >= 0.0 && quantile_ema < 1.0)) throw InputError("tail config: quantile_ema must lie in [0, 1)");
}

double worst_asset_loss(const Eigen::Ref<const VectorXd>& r) { return -r.minCoeff(); }

bool is_tail_event(double worst_loss, double threshold, TailOrientation orientation) {
    switch (orientation) {
        case TailOrientation::Adverse:
            return worst_loss > threshold;
        case TailOrientation::Literal:
            return worst_loss <= threshold;
    }
    return false;
}

VectorXd tail_weights(const MatrixXd& batch, const TailConfig& config, double threshold) {
    VectorXd w(batch.rows());
    for (Index i = 0; i < batch.rows(); ++i) {
        const bool tail = is_tail_event(worst_asset_loss(batch.row(i).transpose()), threshold, config.orientation);
        w(i) = tail ? 1.0 + config.eta : 1.0;
    }
    return w;
}

double empirical_quantile(std::vector<double> values, double level) {
    if (values.empty()) throw InputError("empirical_quantile: empty input");
    std::sort(values.begin(), values.end());
    const double pos = level * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

void RunningQuantile::update(std::vector<double> batch_values) {
    const double q = empirical_quantile(std::move(batch_values), level_);
    if (!initialized_) {
        value_ = q;
        initialized_ = true;
    } else {
        value_ = smoothing_ * value_ + (1.0 - smoothing_) * q;
    }
}

double ess(double q, double eta, double N) {
    if (q < 0.0 || q > 1.0 || eta < 0.0) throw InputError("ess: need 0 <= q <= 1 and eta >= 0");
    // in counts (m = qN tail rows) so that integer batches evaluate exactly
    const double m = q * N;
    const double a = N + eta * m;
    return a * a / (N + 2.0 * eta * m + eta * eta * m);
}

double empirical_ess(const VectorXd& weights) {
    const double s = weights.sum();
    return s * s / weights.squaredNorm();
}

std::string to_string(GeneratorKind kind) { return kind == GeneratorKind::Diffusion ? "diffusion" : "sbb"; }

}  // namespace rcd
