#pragma once

namespace rcd {

/// Regularized lower incomplete gamma P(a, x).
double gamma_p(double a, double x);
/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x), computed directly in its accurate range.
double gamma_q(double a, double x);

double chi2_cdf(double x, double dof);
/// Survival function; exactly 1 at x <= 0.
double chi2_sf(double x, double dof);

}  // namespace rcd
