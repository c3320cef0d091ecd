#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "shallownet/arch.hpp"

namespace snet {

enum class MaddMode { forward, forward_plus_backward };

struct MaddEntry {
    std::string label;  // conv1, conv2, ..., dense1, ...
    std::uint64_t madds = 0;
};

struct MAddReport {
    std::vector<MaddEntry> per_layer;
    std::uint64_t total = 0;
    MaddMode mode = MaddMode::forward;
};

/// Multiply-add count for one input. Conv contributes
/// H_out*W_out*k^2*C_in*C_out, dense contributes in*out; pooling,
/// activations, batchnorm, and biases contribute nothing. The
/// forward_plus_backward mode scales everything by 3, a standard
/// engineering estimate of a combined forward and backward step; all
/// reference tables here use forward-only counts, which is what matches
/// them exactly.
MAddReport madds(const ArchSpec& spec, MaddMode mode = MaddMode::forward);

/// a*d^2 + b*d + c with the relative RMS residual of the fit.
struct QuadFit {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
    double residual = 0.0;
};

/// Least-squares quadratic over (d, madds) points; needs at least three
/// distinct d values.
QuadFit quad_fit(const std::vector<std::pair<double, double>>& points);

double quad_eval(const QuadFit& fit, double d);

}  // namespace snet
