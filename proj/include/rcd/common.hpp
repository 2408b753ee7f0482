#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace rcd {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Bad input, bad configuration or a violated precondition. CLI exit code 2.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A numerical routine failed (non-finite loss, non-PD matrix mid-run, ...). CLI exit code 1.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Derive an independent 64-bit seed from a base seed and a stream index (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Sample mean (columns) and covariance with denominator rows-1.
VectorXd column_mean(const MatrixXd& rows);
MatrixXd sample_covariance(const MatrixXd& rows);

double sum_abs_diff(const VectorXd& a, const VectorXd& b);

std::vector<double> to_std_vector(const VectorXd& v);
VectorXd from_std_vector(const std::vector<double>& v);

/// Format a double with 17 significant digits (round-trip safe).
std::string format_double(double x);

}  // namespace rcd
