#include "shallownet/model.hpp"

namespace snet {

Model build_model(const ArchSpec& spec, Rng& rng) {
    validate_arch(spec);
    Model m;
    m.spec = spec;
    for (const LayerDesc& l : spec.layers) {
        switch (l.kind) {
            case LayerKind::conv: {
                ConvLayer layer = ConvLayer::make(l.in, l.out, l.kernel, l.padding);
                layer.weights =
                    he_normal_init(layer.weights.shape, l.in * l.kernel * l.kernel, rng);
                m.conv.push_back(std::move(layer));
                break;
            }
            case LayerKind::dense: {
                DenseLayer layer = DenseLayer::make(l.in, l.out);
                layer.weights = he_normal_init(layer.weights.shape, l.in, rng);
                m.dense.push_back(std::move(layer));
                break;
            }
            case LayerKind::batchnorm:
                m.bn.push_back(BatchNormLayer::make(l.in));
                break;
            case LayerKind::relu:
            case LayerKind::pool:
            case LayerKind::flatten:
                break;
        }
    }
    return m;
}

Tensor model_forward(Model& model, const Tensor& batch, BnMode mode, ForwardCache* cache) {
    if (batch.rank() != 4) {
        throw ShapeError("model_forward: expected a [N,C,H,W] batch");
    }
    const std::size_t n_layers = model.spec.layers.size();
    if (cache) {
        cache->inputs.assign(n_layers, Tensor{});
        cache->in_shape.assign(n_layers, {});
        cache->argmax.assign(n_layers, {});
        cache->bn.assign(n_layers, BnCache{});
    }

    const std::size_t batch_n = batch.shape[0];
    Tensor cur = batch;
    std::size_t ci = 0, di = 0, bi = 0;
    for (std::size_t i = 0; i < n_layers; ++i) {
        const LayerDesc& l = model.spec.layers[i];
        switch (l.kind) {
            case LayerKind::conv: {
                if (cache) {
                    cache->inputs[i] = cur;
                }
                cur = conv2d_forward(cur, model.conv[ci++]);
                break;
            }
            case LayerKind::relu:
                if (cache) {
                    cache->inputs[i] = cur;
                }
                cur = relu_forward(cur);
                break;
            case LayerKind::pool: {
                if (cache) {
                    cache->inputs[i] = cur;
                    cache->in_shape[i] = cur.shape;
                }
                PoolResult res = maxpool_forward(cur);
                if (cache) {
                    cache->argmax[i] = std::move(res.argmax);
                }
                cur = std::move(res.output);
                break;
            }
            case LayerKind::flatten:
                if (cache) {
                    cache->in_shape[i] = cur.shape;
                }
                cur = cur.reshaped({batch_n, l.in});
                break;
            case LayerKind::dense:
                if (cache) {
                    cache->inputs[i] = cur;
                }
                cur = dense_forward(cur, model.dense[di++]);
                break;
            case LayerKind::batchnorm:
                cur = batchnorm_forward(cur, model.bn[bi], mode, cache ? &cache->bn[i] : nullptr);
                ++bi;
                break;
        }
    }
    if (cache) {
        cache->logits = cur;
    }
    return cur;
}

namespace {

// param_tensors order is forward layer order with two tensors per
// parameterized layer; slot_base[i] is the first slot of spec layer i.
std::vector<std::size_t> slot_bases(const ArchSpec& spec, std::size_t& total) {
    std::vector<std::size_t> base(spec.layers.size(), 0);
    std::size_t slot = 0;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        base[i] = slot;
        const LayerKind k = spec.layers[i].kind;
        if (k == LayerKind::conv || k == LayerKind::dense || k == LayerKind::batchnorm) {
            slot += 2;
        }
    }
    total = slot;
    return base;
}

}  // namespace

std::vector<Tensor> model_backward(Model& model, const ForwardCache& cache,
                                   const Tensor& grad_logits) {
    const std::size_t n_layers = model.spec.layers.size();
    if (cache.inputs.size() != n_layers) {
        throw ShapeError("model_backward: cache does not match this model");
    }
    std::size_t total = 0;
    const std::vector<std::size_t> base = slot_bases(model.spec, total);
    std::vector<Tensor> grads(total);

    Tensor g = grad_logits;
    std::size_t ci = model.conv.size();
    std::size_t di = model.dense.size();
    std::size_t bi = model.bn.size();
    for (std::size_t ri = n_layers; ri-- > 0;) {
        const LayerDesc& l = model.spec.layers[ri];
        switch (l.kind) {
            case LayerKind::conv: {
                ConvGrads cg = conv2d_backward(g, cache.inputs[ri], model.conv[--ci]);
                grads[base[ri]] = std::move(cg.weights);
                grads[base[ri] + 1] = std::move(cg.bias);
                g = std::move(cg.input);
                break;
            }
            case LayerKind::relu:
                g = relu_backward(g, cache.inputs[ri]);
                break;
            case LayerKind::pool:
                g = maxpool_backward(g, cache.argmax[ri], cache.in_shape[ri]);
                break;
            case LayerKind::flatten:
                g = g.reshaped(cache.in_shape[ri]);
                break;
            case LayerKind::dense: {
                DenseGrads dg = dense_backward(g, cache.inputs[ri], model.dense[--di]);
                grads[base[ri]] = std::move(dg.weights);
                grads[base[ri] + 1] = std::move(dg.bias);
                g = std::move(dg.input);
                break;
            }
            case LayerKind::batchnorm: {
                BnGrads bg = batchnorm_backward(g, model.bn[--bi], cache.bn[ri]);
                grads[base[ri]] = std::move(bg.scale);
                grads[base[ri] + 1] = std::move(bg.shift);
                g = std::move(bg.input);
                break;
            }
        }
    }
    return grads;
}

std::vector<Tensor*> param_tensors(Model& model) {
    std::vector<Tensor*> out;
    std::size_t ci = 0, di = 0, bi = 0;
    for (const LayerDesc& l : model.spec.layers) {
        switch (l.kind) {
            case LayerKind::conv:
                out.push_back(&model.conv[ci].weights);
                out.push_back(&model.conv[ci].bias);
                ++ci;
                break;
            case LayerKind::dense:
                out.push_back(&model.dense[di].weights);
                out.push_back(&model.dense[di].bias);
                ++di;
                break;
            case LayerKind::batchnorm:
                out.push_back(&model.bn[bi].scale);
                out.push_back(&model.bn[bi].shift);
                ++bi;
                break;
            case LayerKind::relu:
            case LayerKind::pool:
            case LayerKind::flatten:
                break;
        }
    }
    return out;
}

std::vector<std::string> param_names(const Model& model) {
    std::vector<std::string> out;
    std::size_t ci = 0, di = 0, bi = 0;
    for (const LayerDesc& l : model.spec.layers) {
        switch (l.kind) {
            case LayerKind::conv: {
                const std::string p = "conv" + std::to_string(++ci);
                out.push_back(p + ".weights");
                out.push_back(p + ".bias");
                break;
            }
            case LayerKind::dense: {
                const std::string p = "dense" + std::to_string(++di);
                out.push_back(p + ".weights");
                out.push_back(p + ".bias");
                break;
            }
            case LayerKind::batchnorm: {
                const std::string p = "batchnorm" + std::to_string(++bi);
                out.push_back(p + ".scale");
                out.push_back(p + ".shift");
                break;
            }
            case LayerKind::relu:
            case LayerKind::pool:
            case LayerKind::flatten:
                break;
        }
    }
    return out;
}

}  // namespace snet
