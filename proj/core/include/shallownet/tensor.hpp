#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

#include "shallownet/errors.hpp"

namespace snet {

/// Dense row-major tensor of 64-bit reals. The numeric currency of the
/// whole engine; layout is fixed so serialized weights are portable.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<std::size_t> shape_, double fill);
    Tensor(std::initializer_list<std::size_t> shape_, double fill)
        : Tensor(std::vector<std::size_t>(shape_), fill) {}

    static Tensor zeros(std::vector<std::size_t> shape_) { return Tensor(std::move(shape_), 0.0); }

    std::size_t size() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }
    std::size_t extent(std::size_t axis) const { return shape[axis]; }

    double* begin() { return data.data(); }
    double* end() { return data.data() + data.size(); }
    const double* begin() const { return data.data(); }
    const double* end() const { return data.data() + data.size(); }

    double& operator[](std::size_t flat) { return data[flat]; }
    double operator[](std::size_t flat) const { return data[flat]; }

    // Row-major index helpers for the ranks the engine uses.
    double& at2(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
    double at2(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }
    double& at3(std::size_t i, std::size_t j, std::size_t k) {
        return data[(i * shape[1] + j) * shape[2] + k];
    }
    double at3(std::size_t i, std::size_t j, std::size_t k) const {
        return data[(i * shape[1] + j) * shape[2] + k];
    }
    double& at4(std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
        return data[((i * shape[1] + j) * shape[2] + k) * shape[3] + l];
    }
    double at4(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
        return data[((i * shape[1] + j) * shape[2] + k) * shape[3] + l];
    }

    /// Same data, new shape; element counts must agree.
    Tensor reshaped(std::vector<std::size_t> new_shape) const;

    bool same_shape(const Tensor& other) const { return shape == other.shape; }

    /// True when every element is finite.
    bool all_finite() const;
};

/// Product of extents; throws ShapeError on a zero extent.
std::size_t shape_numel(std::span<const std::size_t> shape);

/// Elementwise fill tensor; every extent must be >= 1.
Tensor tensor_new(std::vector<std::size_t> shape, double fill);

/// Deterministic splitmix64 stream. The algorithm is fixed: identical
/// seeds give identical streams on every platform, and child streams are
/// derived by a documented mixing function so parallel tasks stay
/// reproducible.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : seed_(seed), state_(seed) {}

    std::uint64_t seed() const { return seed_; }

    /// Next raw 64-bit word: state += 0x9E3779B97F4A7C15, then finalize
    /// with the splitmix64 mixer.
    std::uint64_t next_u64();

    /// Uniform double in [0,1) using the top 53 bits.
    double next_uniform();

    /// Standard normal via the Marsaglia polar method (spare cached).
    double next_normal();

    /// Unbiased integer in [0, n); n must be >= 1.
    std::uint64_t next_below(std::uint64_t n);

    /// Child stream `i`, derived from the original seed only, so the
    /// derivation is independent of how much the parent has consumed:
    /// child_seed = mix(mix(seed) ^ mix(i + 0x9E3779B97F4A7C15)).
    Rng child(std::uint64_t i) const;

    /// splitmix64 finalizer, exposed for seed derivation.
    static std::uint64_t mix(std::uint64_t x);

  private:
    std::uint64_t seed_;
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// He-normal initialization: i.i.d. Gaussian, mean 0, std sqrt(2/fan_in).
Tensor he_normal_init(std::vector<std::size_t> shape, std::size_t fan_in, Rng& rng);

}  // namespace snet
