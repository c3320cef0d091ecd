#pragma once

#include <span>
#include <string>
#include <vector>

#include "shallownet/model.hpp"

namespace snet {

struct GradCheckEntry {
    std::string param;  // e.g. "conv1.weights[42]"
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_err = 0.0;
};

struct GradCheckReport {
    bool passed = false;
    double tolerance = 0.0;
    std::size_t checked = 0;
    std::size_t skipped = 0;                   // probe stepped across a ReLU kink or pool tie
    std::vector<GradCheckEntry> worst;         // worst offender per parameter tensor
    std::vector<GradCheckEntry> failures;      // entries over tolerance
};

/// Compares analytic gradients of the mean cross-entropy loss against
/// central finite differences (step 1e-6) on a random sample of up to
/// 100 entries per parameter tensor (all entries when fewer). An entry
/// over tolerance is only reported as a failure when both probe points
/// stay in the same linear region as the base pass (no ReLU input
/// changes sign, no pool window changes winner); a probe that steps
/// across a kink has no meaningful two-sided derivative and is counted
/// as skipped instead. Entries where both gradients are below 1e-4 in
/// magnitude sit under the finite-difference noise floor and pass as
/// absolute agreement.
GradCheckReport gradient_check(Model& model, const Tensor& batch,
                               std::span<const std::uint8_t> labels, double tolerance, Rng& rng);

}  // namespace snet
