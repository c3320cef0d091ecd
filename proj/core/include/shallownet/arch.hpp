#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "shallownet/errors.hpp"

namespace snet {

enum class Family { lenet, vgg16, vgg16_enhanced };

const char* family_name(Family f);
Family family_from_name(const std::string& name);

enum class LayerKind { conv, relu, pool, flatten, dense, batchnorm };

/// One entry of an architecture description. Field use by kind:
///   conv:      in (channels), out (channels), kernel, padding
///   dense:     in (units), out (units)
///   flatten:   in (flattened width)
///   batchnorm: in (channels)
///   relu/pool: no fields
struct LayerDesc {
    LayerKind kind = LayerKind::relu;
    std::size_t in = 0;
    std::size_t out = 0;
    std::size_t kernel = 0;
    std::size_t padding = 0;

    static LayerDesc make_conv(std::size_t in, std::size_t out, std::size_t k, std::size_t pad);
    static LayerDesc make_dense(std::size_t in, std::size_t out);
    static LayerDesc make_flatten(std::size_t width);
    static LayerDesc make_batchnorm(std::size_t channels);
    static LayerDesc make_relu();
    static LayerDesc make_pool();
};

/// Pure description of a network; weight allocation happens at model
/// instantiation so specs stay cheap to build, serialize, and audit.
struct ArchSpec {
    Family family = Family::lenet;
    std::size_t d = 0;        // first-conv filter count (d1 for LeNet)
    double constant = 0.0;    // LeNet d2/d1 ratio, VGG per-set growth
    std::array<std::size_t, 3> input = {3, 32, 32};
    std::vector<LayerDesc> layers;
};

/// Round half away from zero. This is the rounding that maps d1=44 to
/// d2=117 under ratio 8/3; round-half-even would not.
long long round_half_away(double x);

/// Two 5x5 valid convolutions with 2x2 pooling, then dense 25*d2 -> 120
/// -> 84 -> 10. d2 = round(ratio*d1) half away from zero, or the
/// override when nonzero (used for the fractional-d2 endpoints where two
/// integer d2 values bracket the ratio).
ArchSpec build_lenet(std::size_t d1, double ratio = 8.0 / 3.0, std::size_t d2_override = 0);

/// Thirteen 3x3 same convolutions in sets of {2,2,3,3,3}, batchnorm and
/// ReLU after each, pooling after each set. Set n <= 4 has
/// round(d*growth^(n-1)) filters; set 5 repeats set 4. Head: dense
/// set5 -> 4096 -> 4096 -> 10.
ArchSpec build_vgg16(std::size_t d, double growth = 2.0);

/// build_vgg16(d, 2) except set 5 carries 16d filters, which keeps
/// depth x extent constant through all five sets.
ArchSpec build_vgg16_enhanced(std::size_t d);

/// Walks the layer list from the input shape and throws ArchError on any
/// inconsistency (channel mismatch, non-positive extent, odd pool input,
/// flatten/dense width mismatch).
void validate_arch(const ArchSpec& spec);

/// Units produced by the final layer (10 for both families).
std::size_t output_units(const ArchSpec& spec);

struct ConservationBlock {
    std::size_t depth = 0;    // filter count of the conv block / set
    std::size_t extent = 0;   // m_i: post-pool for LeNet, pre-pool for VGG
    std::size_t product = 0;  // depth * extent
};

struct ConservationReport {
    std::vector<ConservationBlock> blocks;
    double deviation = 0.0;  // (max - min) / mean of the products
};

/// Audits depth_i * m_i across conv blocks. LeNet measures the post-pool
/// extents (14, 5 from a 32x32 input); VGG measures each set's pre-pool
/// extent (32, 16, 8, 4, 2), matching how the two families are analyzed.
ConservationReport conservation_report(const ArchSpec& spec);

/// Human-readable structured text, stable across versions; also embedded
/// in checkpoint headers.
std::string serialize_arch(const ArchSpec& spec);
ArchSpec parse_arch(const std::string& text);

}  // namespace snet
