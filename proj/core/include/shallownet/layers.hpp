#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "shallownet/tensor.hpp"

namespace snet {

// Layer parameter bundles. Shapes follow the tensor layout notes on each
// field; stride is 1 everywhere and pooling is fixed 2x2/2.

struct ConvLayer {
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::size_t kernel = 0;   // square k x k
    std::size_t padding = 0;  // single symmetric zero-padding
    Tensor weights;           // [out, in, k, k]
    Tensor bias;              // [out]

    static ConvLayer make(std::size_t in_ch, std::size_t out_ch, std::size_t k, std::size_t pad);
};

struct DenseLayer {
    std::size_t in_units = 0;
    std::size_t out_units = 0;
    Tensor weights;  // [out, in]
    Tensor bias;     // [out]

    static DenseLayer make(std::size_t in_units, std::size_t out_units);
};

struct BatchNormLayer {
    std::size_t channels = 0;
    Tensor scale;         // [channels], init 1
    Tensor shift;         // [channels], init 0
    Tensor running_mean;  // [channels], init 0
    Tensor running_var;   // [channels], init 1
    double epsilon = 1e-5;
    double momentum = 0.1;

    static BatchNormLayer make(std::size_t channels);
};

enum class BnMode { train, eval };

// ---- convolution ----
// Inputs are [N, C, H, W]; a rank-3 [C, H, W] input is treated as a
// single sample and the result keeps rank 3.

Tensor conv2d_forward(const Tensor& input, const ConvLayer& layer);

struct ConvGrads {
    Tensor input;
    Tensor weights;
    Tensor bias;
};

/// Exact gradients of conv2d_forward; `input` is the forward input.
ConvGrads conv2d_backward(const Tensor& grad_out, const Tensor& input, const ConvLayer& layer);

// ---- 2x2 max pooling ----

struct PoolResult {
    Tensor output;
    std::vector<std::uint32_t> argmax;  // flat input index per output element
};

/// Spatial extents must be even. Ties break to the first maximal element
/// in row-major window scan so backward routing is deterministic.
PoolResult maxpool_forward(const Tensor& input);

Tensor maxpool_backward(const Tensor& grad_out, const std::vector<std::uint32_t>& argmax,
                        const std::vector<std::size_t>& input_shape);

// ---- ReLU ----

Tensor relu_forward(const Tensor& input);

/// Subgradient at 0 is 0: grad passes only where input > 0.
Tensor relu_backward(const Tensor& grad_out, const Tensor& input);

// ---- fully connected ----

Tensor dense_forward(const Tensor& input, const DenseLayer& layer);

struct DenseGrads {
    Tensor input;
    Tensor weights;
    Tensor bias;
};

DenseGrads dense_backward(const Tensor& grad_out, const Tensor& input, const DenseLayer& layer);

// ---- batch normalization ----

struct BnCache {
    Tensor x_hat;                 // normalized activations
    std::vector<double> inv_std;  // per channel
};

/// Train mode normalizes by batch statistics per channel and updates the
/// running averages (requires batch size >= 2); eval mode uses the
/// running statistics. `cache`, when given, receives what backward needs.
Tensor batchnorm_forward(const Tensor& input, BatchNormLayer& layer, BnMode mode,
                         BnCache* cache = nullptr);

struct BnGrads {
    Tensor input;
    Tensor scale;
    Tensor shift;
};

/// Exact gradient of the train-mode forward map.
BnGrads batchnorm_backward(const Tensor& grad_out, const BatchNormLayer& layer,
                           const BnCache& cache);

// ---- softmax cross-entropy ----

struct LossResult {
    double loss = 0.0;
    Tensor grad_logits;
};

/// loss = -log softmax(logits)[label], max-subtraction stabilized;
/// grad = softmax(logits) - one_hot(label).
LossResult softmax_cross_entropy(const Tensor& logits, std::size_t label);

/// Mean loss over a [N, classes] batch; gradients carry the 1/N factor.
LossResult softmax_cross_entropy_batch(const Tensor& logits, std::span<const std::uint8_t> labels);

}  // namespace snet
