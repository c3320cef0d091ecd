#pragma once

#include <stdexcept>
#include <string>

namespace snet {

/// Shape or dimension mismatch in tensor/layer plumbing.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Architecture generation produced an unusable network (e.g. a filter
/// count rounded below 1).
struct ArchError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Regression failure: too few points, degenerate design matrix, or
/// values outside the fit's domain.
struct FitError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Interpolation/extrapolation target outside the supported range.
struct RangeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Mini-batch stratification cannot satisfy the per-class quota.
struct StratifyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// No tabulated hyper-parameter preset for the requested combination.
struct PresetError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// File-level I/O failure (missing or unreadable input).
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed on-disk payload (dataset record, checkpoint, spec text).
struct CorruptError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Training aborted because the loss became non-finite.
struct DivergedError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// CSV emission asked to write a ragged table.
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace snet
