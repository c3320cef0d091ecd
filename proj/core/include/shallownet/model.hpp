#pragma once

#include <string>
#include <vector>

#include "shallownet/arch.hpp"
#include "shallownet/layers.hpp"

namespace snet {

/// An ArchSpec with allocated parameters. conv/dense/bn hold the layers
/// in spec order; the k-th conv entry in spec.layers maps to conv[k-1],
/// and so on per kind.
struct Model {
    ArchSpec spec;
    std::vector<ConvLayer> conv;
    std::vector<DenseLayer> dense;
    std::vector<BatchNormLayer> bn;
};

/// Allocates parameters for the architecture: conv and dense weights He-normal
/// with fan_in = incoming connections per unit, biases zero, batchnorm at
/// identity. Draws come from `rng` in layer order, so one seed fixes the
/// full initialization.
Model build_model(const ArchSpec& spec, Rng& rng);

/// Everything the backward pass needs, captured per layer index during a
/// cached forward.
struct ForwardCache {
    std::vector<Tensor> inputs;                      // conv/relu/dense/pool entries
    std::vector<std::vector<std::size_t>> in_shape;  // pool/flatten entries
    std::vector<std::vector<std::uint32_t>> argmax;  // pool entries
    std::vector<BnCache> bn;                         // batchnorm entries
    Tensor logits;
};

/// Runs a [N,3,H,W] batch through the network to [N,10] logits. Train
/// mode drives batchnorm batch statistics (and updates running stats);
/// pass a cache to enable model_backward.
Tensor model_forward(Model& model, const Tensor& batch, BnMode mode,
                     ForwardCache* cache = nullptr);

/// Gradients of the scalar loss whose logit-gradient is `grad_logits`,
/// for every trainable tensor in param_tensors order.
std::vector<Tensor> model_backward(Model& model, const ForwardCache& cache,
                                   const Tensor& grad_logits);

/// Trainable tensors in layer order: conv weights/bias, dense
/// weights/bias, batchnorm scale/shift. Running statistics are not
/// trainable and are excluded.
std::vector<Tensor*> param_tensors(Model& model);

/// Labels aligned with param_tensors, e.g. "conv1.weights".
std::vector<std::string> param_names(const Model& model);

}  // namespace snet
