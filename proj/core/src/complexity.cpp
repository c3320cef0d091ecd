#include "shallownet/complexity.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <set>

namespace snet {

MAddReport madds(const ArchSpec& spec, MaddMode mode) {
    validate_arch(spec);
    MAddReport report;
    report.mode = mode;
    const std::uint64_t factor = mode == MaddMode::forward ? 1 : 3;

    std::size_t extent = spec.input[1];
    std::size_t conv_idx = 0;
    std::size_t dense_idx = 0;
    for (const LayerDesc& l : spec.layers) {
        switch (l.kind) {
            case LayerKind::conv: {
                extent = extent + 2 * l.padding - l.kernel + 1;
                const std::uint64_t count = static_cast<std::uint64_t>(extent) * extent *
                                            l.kernel * l.kernel * l.in * l.out;
                report.per_layer.push_back(
                    {"conv" + std::to_string(++conv_idx), count * factor});
                break;
            }
            case LayerKind::pool:
                extent /= 2;
                break;
            case LayerKind::dense:
                report.per_layer.push_back({"dense" + std::to_string(++dense_idx),
                                            static_cast<std::uint64_t>(l.in) * l.out * factor});
                break;
            case LayerKind::relu:
            case LayerKind::flatten:
            case LayerKind::batchnorm:
                break;
        }
    }
    for (const MaddEntry& e : report.per_layer) {
        report.total += e.madds;
    }
    return report;
}

QuadFit quad_fit(const std::vector<std::pair<double, double>>& points) {
    std::set<double> distinct;
    for (const auto& [d, y] : points) {
        distinct.insert(d);
    }
    if (distinct.size() < 3) {
        throw FitError("quad_fit: need at least 3 distinct d values, have " +
                       std::to_string(distinct.size()));
    }

    const auto n = static_cast<Eigen::Index>(points.size());
    Eigen::MatrixXd design(n, 3);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double d = points[static_cast<std::size_t>(i)].first;
        design(i, 0) = d * d;
        design(i, 1) = d;
        design(i, 2) = 1.0;
        y(i) = points[static_cast<std::size_t>(i)].second;
    }
    Eigen::VectorXd sol = design.colPivHouseholderQr().solve(y);
    if (!sol.allFinite()) {
        throw FitError("quad_fit: degenerate design matrix");
    }

    QuadFit fit;
    fit.a = sol(0);
    fit.b = sol(1);
    fit.c = sol(2);
    const Eigen::VectorXd resid = design * sol - y;
    const double rms = std::sqrt(resid.squaredNorm() / static_cast<double>(n));
    const double scale = y.cwiseAbs().mean();
    fit.residual = scale > 0.0 ? rms / scale : rms;
    return fit;
}

double quad_eval(const QuadFit& fit, double d) {
    return fit.a * d * d + fit.b * d + fit.c;
}

}  // namespace snet
