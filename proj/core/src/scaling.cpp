#include "shallownet/scaling.hpp"

#include <cmath>
#include <set>
#include <string>

namespace snet {

namespace {

/// Weighted OLS line y = slope*x + intercept; returns {slope, intercept,
/// weighted SSR}.
struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double ssr = 0.0;
};

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y,
                 const std::vector<double>& w) {
    double sw = 0.0, sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sw += w[i];
        sx += w[i] * x[i];
        sy += w[i] * y[i];
        sxx += w[i] * x[i] * x[i];
        sxy += w[i] * x[i] * y[i];
    }
    const double denom = sw * sxx - sx * sx;
    if (denom == 0.0 || !std::isfinite(denom)) {
        throw FitError("degenerate line fit: all x equal");
    }
    LineFit f;
    f.slope = (sw * sxy - sx * sy) / denom;
    f.intercept = (sy - f.slope * sx) / sw;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - (f.slope * x[i] + f.intercept);
        f.ssr += w[i] * r * r;
    }
    return f;
}

}  // namespace

PowerLawFit fit_power_law(const std::vector<ScalingPoint>& points, bool weighted) {
    if (points.size() < 2) {
        throw FitError("fit_power_law: need at least 2 points");
    }
    std::set<double> distinct;
    std::vector<double> x, y, w;
    for (const ScalingPoint& p : points) {
        if (p.d <= 0.0) {
            throw FitError("fit_power_law: d must be positive");
        }
        if (p.epsilon <= 0.0 || p.epsilon >= 1.0) {
            throw FitError("fit_power_law: epsilon must lie in (0,1), got " +
                           std::to_string(p.epsilon));
        }
        if (weighted && p.std <= 0.0) {
            throw FitError("fit_power_law: weighted fit needs positive std on every point");
        }
        distinct.insert(p.d);
        x.push_back(std::log(p.d));
        y.push_back(std::log(p.epsilon));
        w.push_back(weighted ? (p.epsilon / p.std) * (p.epsilon / p.std) : 1.0);
    }
    if (distinct.size() < 2) {
        throw FitError("fit_power_law: need at least 2 distinct d values");
    }
    LineFit line = fit_line(x, y, w);
    PowerLawFit fit;
    fit.A = std::exp(line.intercept);
    fit.rho = -line.slope;
    fit.residual = line.ssr;
    return fit;
}

double extrapolate_error(const PowerLawFit& fit, double d) {
    if (d <= 0.0) {
        throw FitError("extrapolate_error: d must be positive");
    }
    return fit.A * std::pow(d, -fit.rho);
}

double invert_error(const PowerLawFit& fit, double epsilon) {
    if (epsilon <= 0.0 || epsilon >= 1.0) {
        throw FitError("invert_error: epsilon must lie in (0,1)");
    }
    if (fit.rho <= 0.0) {
        throw FitError("invert_error: no solution for rho <= 0");
    }
    return std::pow(fit.A / epsilon, 1.0 / fit.rho);
}

double complexity_at_error(const PowerLawFit& fit, const QuadFit& poly, double epsilon) {
    return quad_eval(poly, invert_error(fit, epsilon));
}

double complexity_error_exponent(const std::vector<std::pair<double, double>>& points) {
    if (points.size() < 3) {
        throw FitError("complexity_error_exponent: need at least 3 points");
    }
    std::vector<double> x, y, w;
    for (const auto& [eps, complexity] : points) {
        if (eps <= 0.0 || complexity <= 0.0) {
            throw FitError("complexity_error_exponent: values must be positive");
        }
        x.push_back(std::log(1.0 / eps));
        y.push_back(std::log(complexity));
        w.push_back(1.0);
    }
    return fit_line(x, y, w).slope;
}

double complexity_ratio(const PowerLawFit& fit_a, const QuadFit& poly_a, const PowerLawFit& fit_b,
                        const QuadFit& poly_b, double epsilon) {
    return complexity_at_error(fit_a, poly_a, epsilon) /
           complexity_at_error(fit_b, poly_b, epsilon);
}

double log_interpolate(double d_target, const ScalingPoint& lo, const ScalingPoint& hi) {
    if (!(lo.d > 0.0) || !(hi.d > lo.d)) {
        throw RangeError("log_interpolate: need 0 < lo.d < hi.d");
    }
    if (lo.epsilon <= 0.0 || hi.epsilon <= 0.0) {
        throw RangeError("log_interpolate: endpoint epsilon must be positive");
    }
    if (d_target < lo.d || d_target > hi.d) {
        throw RangeError("log_interpolate: target outside [" + std::to_string(lo.d) + ", " +
                         std::to_string(hi.d) + "]");
    }
    // weight on hi grows with the log-proximity of the target to hi
    const double t = (std::log(d_target) - std::log(lo.d)) / (std::log(hi.d) - std::log(lo.d));
    return std::exp((1.0 - t) * std::log(lo.epsilon) + t * std::log(hi.epsilon));
}

}  // namespace snet
