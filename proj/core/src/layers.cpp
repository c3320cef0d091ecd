#include "shallownet/layers.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace snet {

namespace {

using MatrixRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatrixRM>;
using ConstMapRM = Eigen::Map<const MatrixRM>;

struct BatchView {
    std::size_t n, c, h, w;
    bool had_batch_axis;
};

BatchView as_nchw(const Tensor& t, const char* what) {
    if (t.rank() == 3) {
        return {1, t.shape[0], t.shape[1], t.shape[2], false};
    }
    if (t.rank() == 4) {
        return {t.shape[0], t.shape[1], t.shape[2], t.shape[3], true};
    }
    throw ShapeError(std::string(what) + ": expected rank-3 or rank-4 input");
}

std::vector<std::size_t> nchw_shape(const BatchView& v, std::size_t c, std::size_t h,
                                    std::size_t w) {
    if (v.had_batch_axis) {
        return {v.n, c, h, w};
    }
    return {c, h, w};
}

// Gathers the k*k*Cin receptive field of every output position into a
// row-major [Cin*k*k, Hout*Wout] matrix (zero padding applied here).
void im2col(const double* in, std::size_t c_in, std::size_t h, std::size_t w, std::size_t k,
            std::size_t pad, std::size_t h_out, std::size_t w_out, double* patches) {
    const std::size_t cols = h_out * w_out;
    for (std::size_t c = 0; c < c_in; ++c) {
        const double* plane = in + c * h * w;
        for (std::size_t ki = 0; ki < k; ++ki) {
            for (std::size_t kj = 0; kj < k; ++kj) {
                double* row = patches + ((c * k + ki) * k + kj) * cols;
                for (std::size_t y = 0; y < h_out; ++y) {
                    // input row for this output row, shifted by padding
                    std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y + ki) -
                                        static_cast<std::ptrdiff_t>(pad);
                    double* dst = row + y * w_out;
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) {
                        std::fill(dst, dst + w_out, 0.0);
                        continue;
                    }
                    const double* src = plane + static_cast<std::size_t>(iy) * w;
                    for (std::size_t x = 0; x < w_out; ++x) {
                        std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(x + kj) -
                                            static_cast<std::ptrdiff_t>(pad);
                        dst[x] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w))
                                     ? 0.0
                                     : src[static_cast<std::size_t>(ix)];
                    }
                }
            }
        }
    }
}

// Scatter-add of a patch matrix back onto the (unpadded) input plane.
void col2im_add(const double* patches, std::size_t c_in, std::size_t h, std::size_t w,
                std::size_t k, std::size_t pad, std::size_t h_out, std::size_t w_out,
                double* out) {
    const std::size_t cols = h_out * w_out;
    for (std::size_t c = 0; c < c_in; ++c) {
        double* plane = out + c * h * w;
        for (std::size_t ki = 0; ki < k; ++ki) {
            for (std::size_t kj = 0; kj < k; ++kj) {
                const double* row = patches + ((c * k + ki) * k + kj) * cols;
                for (std::size_t y = 0; y < h_out; ++y) {
                    std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y + ki) -
                                        static_cast<std::ptrdiff_t>(pad);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) {
                        continue;
                    }
                    const double* src = row + y * w_out;
                    double* dst = plane + static_cast<std::size_t>(iy) * w;
                    for (std::size_t x = 0; x < w_out; ++x) {
                        std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(x + kj) -
                                            static_cast<std::ptrdiff_t>(pad);
                        if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(w)) {
                            dst[static_cast<std::size_t>(ix)] += src[x];
                        }
                    }
                }
            }
        }
    }
}

void check_conv_geometry(const BatchView& v, const ConvLayer& layer, std::size_t& h_out,
                         std::size_t& w_out) {
    if (v.c != layer.in_channels) {
        throw ShapeError("conv2d: input has " + std::to_string(v.c) + " channels, layer expects " +
                         std::to_string(layer.in_channels));
    }
    std::ptrdiff_t ho = static_cast<std::ptrdiff_t>(v.h + 2 * layer.padding) -
                        static_cast<std::ptrdiff_t>(layer.kernel) + 1;
    std::ptrdiff_t wo = static_cast<std::ptrdiff_t>(v.w + 2 * layer.padding) -
                        static_cast<std::ptrdiff_t>(layer.kernel) + 1;
    if (ho < 1 || wo < 1) {
        throw ShapeError("conv2d: non-positive output extent");
    }
    h_out = static_cast<std::size_t>(ho);
    w_out = static_cast<std::size_t>(wo);
}

}  // namespace

ConvLayer ConvLayer::make(std::size_t in_ch, std::size_t out_ch, std::size_t k, std::size_t pad) {
    ConvLayer l;
    l.in_channels = in_ch;
    l.out_channels = out_ch;
    l.kernel = k;
    l.padding = pad;
    l.weights = Tensor({out_ch, in_ch, k, k}, 0.0);
    l.bias = Tensor({out_ch}, 0.0);
    return l;
}

DenseLayer DenseLayer::make(std::size_t in_units, std::size_t out_units) {
    DenseLayer l;
    l.in_units = in_units;
    l.out_units = out_units;
    l.weights = Tensor({out_units, in_units}, 0.0);
    l.bias = Tensor({out_units}, 0.0);
    return l;
}

BatchNormLayer BatchNormLayer::make(std::size_t channels) {
    BatchNormLayer l;
    l.channels = channels;
    l.scale = Tensor({channels}, 1.0);
    l.shift = Tensor({channels}, 0.0);
    l.running_mean = Tensor({channels}, 0.0);
    l.running_var = Tensor({channels}, 1.0);
    return l;
}

Tensor conv2d_forward(const Tensor& input, const ConvLayer& layer) {
    BatchView v = as_nchw(input, "conv2d_forward");
    std::size_t h_out, w_out;
    check_conv_geometry(v, layer, h_out, w_out);

    const std::size_t kk = layer.in_channels * layer.kernel * layer.kernel;
    const std::size_t cols = h_out * w_out;
    Tensor out(nchw_shape(v, layer.out_channels, h_out, w_out), 0.0);
    std::vector<double> patches(kk * cols);

    ConstMapRM wmat(layer.weights.data.data(), static_cast<Eigen::Index>(layer.out_channels),
                    static_cast<Eigen::Index>(kk));
    for (std::size_t n = 0; n < v.n; ++n) {
        im2col(input.data.data() + n * v.c * v.h * v.w, v.c, v.h, v.w, layer.kernel,
               layer.padding, h_out, w_out, patches.data());
        ConstMapRM pm(patches.data(), static_cast<Eigen::Index>(kk),
                      static_cast<Eigen::Index>(cols));
        MapRM om(out.data.data() + n * layer.out_channels * cols,
                 static_cast<Eigen::Index>(layer.out_channels), static_cast<Eigen::Index>(cols));
        om.noalias() = wmat * pm;
        for (std::size_t o = 0; o < layer.out_channels; ++o) {
            om.row(static_cast<Eigen::Index>(o)).array() += layer.bias.data[o];
        }
    }
    return out;
}

ConvGrads conv2d_backward(const Tensor& grad_out, const Tensor& input, const ConvLayer& layer) {
    BatchView v = as_nchw(input, "conv2d_backward");
    std::size_t h_out, w_out;
    check_conv_geometry(v, layer, h_out, w_out);

    BatchView g = as_nchw(grad_out, "conv2d_backward");
    if (g.n != v.n || g.c != layer.out_channels || g.h != h_out || g.w != w_out) {
        throw ShapeError("conv2d_backward: grad_out shape does not match forward output");
    }

    const std::size_t kk = layer.in_channels * layer.kernel * layer.kernel;
    const std::size_t cols = h_out * w_out;

    ConvGrads grads;
    grads.input = Tensor(input.shape, 0.0);
    grads.weights = Tensor(layer.weights.shape, 0.0);
    grads.bias = Tensor(layer.bias.shape, 0.0);

    std::vector<double> patches(kk * cols);
    std::vector<double> patch_grads(kk * cols);

    ConstMapRM wmat(layer.weights.data.data(), static_cast<Eigen::Index>(layer.out_channels),
                    static_cast<Eigen::Index>(kk));
    MapRM gw(grads.weights.data.data(), static_cast<Eigen::Index>(layer.out_channels),
             static_cast<Eigen::Index>(kk));
    for (std::size_t n = 0; n < v.n; ++n) {
        im2col(input.data.data() + n * v.c * v.h * v.w, v.c, v.h, v.w, layer.kernel,
               layer.padding, h_out, w_out, patches.data());
        ConstMapRM pm(patches.data(), static_cast<Eigen::Index>(kk),
                      static_cast<Eigen::Index>(cols));
        ConstMapRM gm(grad_out.data.data() + n * layer.out_channels * cols,
                      static_cast<Eigen::Index>(layer.out_channels),
                      static_cast<Eigen::Index>(cols));

        gw.noalias() += gm * pm.transpose();
        for (std::size_t o = 0; o < layer.out_channels; ++o) {
            grads.bias.data[o] += gm.row(static_cast<Eigen::Index>(o)).sum();
        }

        MapRM pgm(patch_grads.data(), static_cast<Eigen::Index>(kk),
                  static_cast<Eigen::Index>(cols));
        pgm.noalias() = wmat.transpose() * gm;
        col2im_add(patch_grads.data(), v.c, v.h, v.w, layer.kernel, layer.padding, h_out, w_out,
                   grads.input.data.data() + n * v.c * v.h * v.w);
    }
    return grads;
}

PoolResult maxpool_forward(const Tensor& input) {
    BatchView v = as_nchw(input, "maxpool_forward");
    if (v.h % 2 != 0 || v.w % 2 != 0) {
        throw ShapeError("maxpool: spatial extents must be even");
    }
    const std::size_t ho = v.h / 2;
    const std::size_t wo = v.w / 2;
    PoolResult res;
    res.output = Tensor(nchw_shape(v, v.c, ho, wo), 0.0);
    res.argmax.resize(res.output.size());

    const double* in = input.data.data();
    double* out = res.output.data.data();
    std::size_t oi = 0;
    for (std::size_t nc = 0; nc < v.n * v.c; ++nc) {
        const std::size_t base = nc * v.h * v.w;
        for (std::size_t y = 0; y < ho; ++y) {
            for (std::size_t x = 0; x < wo; ++x) {
                std::size_t i00 = base + (2 * y) * v.w + 2 * x;
                // row-major scan; strict > keeps the first maximum on ties
                std::size_t best = i00;
                double m = in[i00];
                if (in[i00 + 1] > m) { m = in[i00 + 1]; best = i00 + 1; }
                if (in[i00 + v.w] > m) { m = in[i00 + v.w]; best = i00 + v.w; }
                if (in[i00 + v.w + 1] > m) { m = in[i00 + v.w + 1]; best = i00 + v.w + 1; }
                out[oi] = m;
                res.argmax[oi] = static_cast<std::uint32_t>(best);
                ++oi;
            }
        }
    }
    return res;
}

Tensor maxpool_backward(const Tensor& grad_out, const std::vector<std::uint32_t>& argmax,
                        const std::vector<std::size_t>& input_shape) {
    if (grad_out.size() != argmax.size()) {
        throw ShapeError("maxpool_backward: grad/argmax size mismatch");
    }
    Tensor grad_in(input_shape, 0.0);
    for (std::size_t i = 0; i < argmax.size(); ++i) {
        grad_in.data[argmax[i]] += grad_out.data[i];
    }
    return grad_in;
}

Tensor relu_forward(const Tensor& input) {
    Tensor out = input;
    for (double& v : out.data) {
        if (v < 0.0) {
            v = 0.0;
        }
    }
    return out;
}

Tensor relu_backward(const Tensor& grad_out, const Tensor& input) {
    if (!grad_out.same_shape(input)) {
        throw ShapeError("relu_backward: shape mismatch");
    }
    Tensor grad_in = grad_out;
    for (std::size_t i = 0; i < grad_in.size(); ++i) {
        if (input.data[i] <= 0.0) {
            grad_in.data[i] = 0.0;
        }
    }
    return grad_in;
}

Tensor dense_forward(const Tensor& input, const DenseLayer& layer) {
    const bool batched = input.rank() == 2;
    if (!batched && input.rank() != 1) {
        throw ShapeError("dense_forward: expected rank-1 or rank-2 input");
    }
    const std::size_t n = batched ? input.shape[0] : 1;
    const std::size_t in_units = batched ? input.shape[1] : input.shape[0];
    if (in_units != layer.in_units) {
        throw ShapeError("dense_forward: input width " + std::to_string(in_units) +
                         ", layer expects " + std::to_string(layer.in_units));
    }
    Tensor out(batched ? std::vector<std::size_t>{n, layer.out_units}
                       : std::vector<std::size_t>{layer.out_units},
               0.0);
    ConstMapRM x(input.data.data(), static_cast<Eigen::Index>(n),
                 static_cast<Eigen::Index>(in_units));
    ConstMapRM w(layer.weights.data.data(), static_cast<Eigen::Index>(layer.out_units),
                 static_cast<Eigen::Index>(in_units));
    MapRM y(out.data.data(), static_cast<Eigen::Index>(n),
            static_cast<Eigen::Index>(layer.out_units));
    y.noalias() = x * w.transpose();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t o = 0; o < layer.out_units; ++o) {
            y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(o)) += layer.bias.data[o];
        }
    }
    return out;
}

DenseGrads dense_backward(const Tensor& grad_out, const Tensor& input, const DenseLayer& layer) {
    const bool batched = input.rank() == 2;
    const std::size_t n = batched ? input.shape[0] : 1;
    const std::size_t in_units = batched ? input.shape[1] : input.shape[0];
    const std::size_t g_units = grad_out.rank() == 2 ? grad_out.shape[1] : grad_out.shape[0];
    const std::size_t g_n = grad_out.rank() == 2 ? grad_out.shape[0] : 1;
    if (in_units != layer.in_units || g_units != layer.out_units || g_n != n) {
        throw ShapeError("dense_backward: shape mismatch");
    }

    DenseGrads grads;
    grads.input = Tensor(input.shape, 0.0);
    grads.weights = Tensor(layer.weights.shape, 0.0);
    grads.bias = Tensor(layer.bias.shape, 0.0);

    ConstMapRM x(input.data.data(), static_cast<Eigen::Index>(n),
                 static_cast<Eigen::Index>(in_units));
    ConstMapRM w(layer.weights.data.data(), static_cast<Eigen::Index>(layer.out_units),
                 static_cast<Eigen::Index>(in_units));
    ConstMapRM g(grad_out.data.data(), static_cast<Eigen::Index>(n),
                 static_cast<Eigen::Index>(layer.out_units));
    MapRM gx(grads.input.data.data(), static_cast<Eigen::Index>(n),
             static_cast<Eigen::Index>(in_units));
    MapRM gw(grads.weights.data.data(), static_cast<Eigen::Index>(layer.out_units),
             static_cast<Eigen::Index>(in_units));

    gw.noalias() = g.transpose() * x;
    gx.noalias() = g * w;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t o = 0; o < layer.out_units; ++o) {
            grads.bias.data[o] += g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(o));
        }
    }
    return grads;
}

Tensor batchnorm_forward(const Tensor& input, BatchNormLayer& layer, BnMode mode, BnCache* cache) {
    BatchView v = as_nchw(input, "batchnorm_forward");
    if (v.c != layer.channels) {
        throw ShapeError("batchnorm: channel mismatch");
    }
    if (mode == BnMode::train && v.n < 2) {
        throw ShapeError("batchnorm: train mode needs batch size >= 2");
    }
    const std::size_t spatial = v.h * v.w;
    const double count = static_cast<double>(v.n * spatial);

    Tensor out(input.shape, 0.0);
    if (cache) {
        cache->x_hat = Tensor(input.shape, 0.0);
        cache->inv_std.assign(v.c, 0.0);
    }

    for (std::size_t c = 0; c < v.c; ++c) {
        double mean, var;
        if (mode == BnMode::train) {
            double sum = 0.0, sq = 0.0;
            for (std::size_t n = 0; n < v.n; ++n) {
                const double* p = input.data.data() + (n * v.c + c) * spatial;
                for (std::size_t i = 0; i < spatial; ++i) {
                    sum += p[i];
                }
            }
            mean = sum / count;
            for (std::size_t n = 0; n < v.n; ++n) {
                const double* p = input.data.data() + (n * v.c + c) * spatial;
                for (std::size_t i = 0; i < spatial; ++i) {
                    double d = p[i] - mean;
                    sq += d * d;
                }
            }
            var = sq / count;  // biased, used for normalization
            double unbiased = count > 1.0 ? sq / (count - 1.0) : var;
            layer.running_mean.data[c] =
                (1.0 - layer.momentum) * layer.running_mean.data[c] + layer.momentum * mean;
            layer.running_var.data[c] =
                (1.0 - layer.momentum) * layer.running_var.data[c] + layer.momentum * unbiased;
        } else {
            mean = layer.running_mean.data[c];
            var = layer.running_var.data[c];
        }
        const double inv_std = 1.0 / std::sqrt(var + layer.epsilon);
        const double gamma = layer.scale.data[c];
        const double beta = layer.shift.data[c];
        if (cache) {
            cache->inv_std[c] = inv_std;
        }
        for (std::size_t n = 0; n < v.n; ++n) {
            const double* p = input.data.data() + (n * v.c + c) * spatial;
            double* q = out.data.data() + (n * v.c + c) * spatial;
            double* xh = cache ? cache->x_hat.data.data() + (n * v.c + c) * spatial : nullptr;
            for (std::size_t i = 0; i < spatial; ++i) {
                double norm = (p[i] - mean) * inv_std;
                if (xh) {
                    xh[i] = norm;
                }
                q[i] = gamma * norm + beta;
            }
        }
    }
    return out;
}

BnGrads batchnorm_backward(const Tensor& grad_out, const BatchNormLayer& layer,
                           const BnCache& cache) {
    BatchView v = as_nchw(grad_out, "batchnorm_backward");
    if (v.c != layer.channels || !grad_out.same_shape(cache.x_hat)) {
        throw ShapeError("batchnorm_backward: shape mismatch");
    }
    const std::size_t spatial = v.h * v.w;
    const double count = static_cast<double>(v.n * spatial);

    BnGrads grads;
    grads.input = Tensor(grad_out.shape, 0.0);
    grads.scale = Tensor({v.c}, 0.0);
    grads.shift = Tensor({v.c}, 0.0);

    for (std::size_t c = 0; c < v.c; ++c) {
        double sum_g = 0.0, sum_gx = 0.0;
        for (std::size_t n = 0; n < v.n; ++n) {
            const double* g = grad_out.data.data() + (n * v.c + c) * spatial;
            const double* xh = cache.x_hat.data.data() + (n * v.c + c) * spatial;
            for (std::size_t i = 0; i < spatial; ++i) {
                sum_g += g[i];
                sum_gx += g[i] * xh[i];
            }
        }
        grads.shift.data[c] = sum_g;
        grads.scale.data[c] = sum_gx;
        const double gamma = layer.scale.data[c];
        const double inv_std = cache.inv_std[c];
        for (std::size_t n = 0; n < v.n; ++n) {
            const double* g = grad_out.data.data() + (n * v.c + c) * spatial;
            const double* xh = cache.x_hat.data.data() + (n * v.c + c) * spatial;
            double* gi = grads.input.data.data() + (n * v.c + c) * spatial;
            for (std::size_t i = 0; i < spatial; ++i) {
                gi[i] = gamma * inv_std / count * (count * g[i] - sum_g - xh[i] * sum_gx);
            }
        }
    }
    return grads;
}

LossResult softmax_cross_entropy(const Tensor& logits, std::size_t label) {
    if (logits.rank() != 1) {
        throw ShapeError("softmax_cross_entropy: expected rank-1 logits");
    }
    const std::size_t k = logits.shape[0];
    if (label >= k) {
        throw std::invalid_argument("softmax_cross_entropy: label out of range");
    }
    LossResult res;
    res.grad_logits = Tensor({k}, 0.0);

    double mx = -std::numeric_limits<double>::infinity();
    for (double v : logits.data) {
        mx = std::max(mx, v);
    }
    double denom = 0.0;
    for (double v : logits.data) {
        denom += std::exp(v - mx);
    }
    const double log_denom = std::log(denom);
    for (std::size_t i = 0; i < k; ++i) {
        res.grad_logits.data[i] = std::exp(logits.data[i] - mx) / denom;
    }
    res.loss = -(logits.data[label] - mx - log_denom);
    res.grad_logits.data[label] -= 1.0;
    return res;
}

LossResult softmax_cross_entropy_batch(const Tensor& logits,
                                       std::span<const std::uint8_t> labels) {
    if (logits.rank() != 2 || logits.shape[0] != labels.size()) {
        throw ShapeError("softmax_cross_entropy_batch: logits/labels mismatch");
    }
    const std::size_t n = logits.shape[0];
    const std::size_t k = logits.shape[1];
    LossResult res;
    res.grad_logits = Tensor({n, k}, 0.0);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        Tensor row({k}, 0.0);
        std::copy(logits.data.begin() + i * k, logits.data.begin() + (i + 1) * k,
                  row.data.begin());
        LossResult one = softmax_cross_entropy(row, labels[i]);
        res.loss += one.loss * inv_n;
        for (std::size_t j = 0; j < k; ++j) {
            res.grad_logits.data[i * k + j] = one.grad_logits.data[j] * inv_n;
        }
    }
    return res;
}

}  // namespace snet
