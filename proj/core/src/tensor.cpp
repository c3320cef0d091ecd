#include "shallownet/tensor.hpp"

#include <cmath>
#include <string>

namespace snet {

std::size_t shape_numel(std::span<const std::size_t> shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) {
        if (e == 0) {
            throw ShapeError("tensor extent must be >= 1");
        }
        n *= e;
    }
    return n;
}

Tensor::Tensor(std::vector<std::size_t> shape_, double fill) {
    std::size_t n = shape_numel(shape_);
    shape = std::move(shape_);
    data.assign(n, fill);
}

Tensor tensor_new(std::vector<std::size_t> shape, double fill) {
    return Tensor(std::move(shape), fill);
}

Tensor Tensor::reshaped(std::vector<std::size_t> new_shape) const {
    if (shape_numel(new_shape) != data.size()) {
        throw ShapeError("reshape changes element count");
    }
    Tensor out;
    out.shape = std::move(new_shape);
    out.data = data;
    return out;
}

bool Tensor::all_finite() const {
    for (double v : data) {
        if (!std::isfinite(v)) {
            return false;
        }
    }
    return true;
}

std::uint64_t Rng::mix(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ULL;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBULL;
    x ^= x >> 31;
    return x;
}

std::uint64_t Rng::next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix(state_);
}

double Rng::next_uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::next_normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u, v, s;
    do {
        u = 2.0 * next_uniform() - 1.0;
        v = 2.0 * next_uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    double scale = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * scale;
    has_spare_ = true;
    return u * scale;
}

std::uint64_t Rng::next_below(std::uint64_t n) {
    if (n == 0) {
        throw std::invalid_argument("next_below: n must be >= 1");
    }
    // Rejection sampling over the largest multiple of n.
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % n;
}

Rng Rng::child(std::uint64_t i) const {
    return Rng(mix(mix(seed_) ^ mix(i + 0x9E3779B97F4A7C15ULL)));
}

Tensor he_normal_init(std::vector<std::size_t> shape, std::size_t fan_in, Rng& rng) {
    if (fan_in == 0) {
        throw std::invalid_argument("he_normal_init: fan_in must be >= 1");
    }
    Tensor t(std::move(shape), 0.0);
    double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (double& v : t.data) {
        v = stddev * rng.next_normal();
    }
    return t;
}

}  // namespace snet
