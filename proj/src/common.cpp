#include "rcd/common.hpp"

#include <cmath>
#include <cstdio>

namespace rcd {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

VectorXd column_mean(const MatrixXd& rows) {
    if (rows.rows() == 0) throw InputError("column_mean: empty input");
    return rows.colwise().mean().transpose();
}

MatrixXd sample_covariance(const MatrixXd& rows) {
    if (rows.rows() < 2) throw InputError("sample_covariance: need at least 2 rows");
    const VectorXd mu = column_mean(rows);
    const MatrixXd centered = rows.rowwise() - mu.transpose();
    MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(rows.rows() - 1);
    // exact symmetry
    return 0.5 * (cov + cov.transpose());
}

double sum_abs_diff(const VectorXd& a, const VectorXd& b) { return (a - b).cwiseAbs().sum(); }

std::vector<double> to_std_vector(const VectorXd& v) { return {v.data(), v.data() + v.size()}; }

VectorXd from_std_vector(const std::vector<double>& v) {
    return Eigen::Map<const VectorXd>(v.data(), static_cast<Index>(v.size()));
}

std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

}  // namespace rcd
