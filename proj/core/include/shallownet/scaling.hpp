#pragma once

#include <utility>
#include <vector>

#include "shallownet/complexity.hpp"
#include "shallownet/errors.hpp"

namespace snet {

struct ScalingPoint {
    double d = 0.0;        // filter count (may be fractional for composites)
    double epsilon = 0.0;  // test error, in (0,1)
    double std = 0.0;      // optional spread; 0 means not given
};

/// epsilon = A / d^rho. residual is the sum of squared residuals of the
/// underlying log-log regression.
struct PowerLawFit {
    double A = 0.0;
    double rho = 0.0;
    double residual = 0.0;
};

/// Least squares on (ln d, ln epsilon); slope = -rho, intercept = ln A.
/// Unweighted by default. Weighted mode uses inverse-variance weights
/// (epsilon/std)^2, the delta-method variance of ln epsilon, and requires
/// every point to carry a positive std.
PowerLawFit fit_power_law(const std::vector<ScalingPoint>& points, bool weighted = false);

/// epsilon at d under the fitted law.
double extrapolate_error(const PowerLawFit& fit, double d);

/// d achieving epsilon: (A/epsilon)^(1/rho). Needs rho > 0.
double invert_error(const PowerLawFit& fit, double epsilon);

/// MAdds needed for a target error: the complexity polynomial evaluated
/// at invert_error(fit, epsilon).
double complexity_at_error(const PowerLawFit& fit, const QuadFit& poly, double epsilon);

/// OLS slope of ln(complexity) against ln(1/epsilon) over (epsilon,
/// complexity) points; needs at least 3.
double complexity_error_exponent(const std::vector<std::pair<double, double>>& points);

/// complexity_at_error for A divided by the same for B at one epsilon.
double complexity_ratio(const PowerLawFit& fit_a, const QuadFit& poly_a, const PowerLawFit& fit_b,
                        const QuadFit& poly_b, double epsilon);

/// Power-law interpolation between two measured points: ln epsilon is
/// linear in ln d between them. Accepts targets in [lo.d, hi.d]; the
/// endpoints return the endpoint values.
double log_interpolate(double d_target, const ScalingPoint& lo, const ScalingPoint& hi);

}  // namespace snet
