#include <cmath>
#include <functional>

#include "doctest.h"
#include "shallownet/layers.hpp"

using namespace snet;

namespace {

void fill_random(Tensor& t, Rng& rng, double scale = 1.0) {
    for (double& v : t.data) {
        v = scale * rng.next_normal();
    }
}

// Direct quadruple-loop convolution used as the correctness oracle for
// the fast path.
Tensor conv_oracle(const Tensor& input, const ConvLayer& layer) {
    const std::size_t n = input.shape[0], cin = input.shape[1];
    const std::size_t h = input.shape[2], w = input.shape[3];
    const std::size_t k = layer.kernel, pad = layer.padding;
    const std::size_t hout = h + 2 * pad - k + 1, wout = w + 2 * pad - k + 1;
    Tensor out({n, layer.out_channels, hout, wout}, 0.0);
    for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t oc = 0; oc < layer.out_channels; ++oc) {
            for (std::size_t oy = 0; oy < hout; ++oy) {
                for (std::size_t ox = 0; ox < wout; ++ox) {
                    double acc = layer.bias[oc];
                    for (std::size_t ic = 0; ic < cin; ++ic) {
                        for (std::size_t ky = 0; ky < k; ++ky) {
                            for (std::size_t kx = 0; kx < k; ++kx) {
                                const std::ptrdiff_t iy =
                                    static_cast<std::ptrdiff_t>(oy + ky) -
                                    static_cast<std::ptrdiff_t>(pad);
                                const std::ptrdiff_t ix =
                                    static_cast<std::ptrdiff_t>(ox + kx) -
                                    static_cast<std::ptrdiff_t>(pad);
                                if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(h) ||
                                    ix >= static_cast<std::ptrdiff_t>(w)) {
                                    continue;
                                }
                                acc += input.at4(b, ic, static_cast<std::size_t>(iy),
                                                 static_cast<std::size_t>(ix)) *
                                       layer.weights.at4(oc, ic, ky, kx);
                            }
                        }
                    }
                    out.at4(b, oc, oy, ox) = acc;
                }
            }
        }
    }
    return out;
}

// Central-difference derivative of `f` with respect to t[i].
double central_diff(std::function<double()> f, double& slot) {
    const double step = 1e-6;
    const double keep = slot;
    slot = keep + step;
    const double hi = f();
    slot = keep - step;
    const double lo = f();
    slot = keep;
    return (hi - lo) / (2.0 * step);
}

}  // namespace

TEST_CASE("fast convolution equals the nested-loop oracle") {
    Rng rng(123);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t n = 1 + rng.next_below(3);
        const std::size_t cin = 1 + rng.next_below(4);
        const std::size_t cout = 1 + rng.next_below(5);
        const std::size_t k = 1 + 2 * rng.next_below(3);  // 1, 3, or 5
        const std::size_t pad = rng.next_below(k == 1 ? 1 : 2);
        const std::size_t h = k + rng.next_below(6);
        const std::size_t w = k + rng.next_below(6);
        ConvLayer layer = ConvLayer::make(cin, cout, k, pad);
        fill_random(layer.weights, rng);
        fill_random(layer.bias, rng);
        Tensor input({n, cin, h, w}, 0.0);
        fill_random(input, rng);
        const Tensor fast = conv2d_forward(input, layer);
        const Tensor slow = conv_oracle(input, layer);
        REQUIRE(fast.shape == slow.shape);
        for (std::size_t i = 0; i < fast.size(); ++i) {
            CHECK(fast[i] == doctest::Approx(slow[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("convolution keeps rank-3 inputs rank 3") {
    Rng rng(7);
    ConvLayer layer = ConvLayer::make(3, 4, 3, 1);
    fill_random(layer.weights, rng);
    Tensor image({3, 8, 8}, 0.5);
    const Tensor out = conv2d_forward(image, layer);
    CHECK(out.shape == std::vector<std::size_t>{4, 8, 8});
    CHECK_THROWS_AS(conv2d_forward(Tensor({3, 3}, 0.0), layer), ShapeError);
    CHECK_THROWS_AS(conv2d_forward(Tensor({1, 2, 8, 8}, 0.0), layer), ShapeError);
}

TEST_CASE("convolution gradients match central differences") {
    Rng rng(99);
    ConvLayer layer = ConvLayer::make(2, 3, 3, 1);
    fill_random(layer.weights, rng, 0.5);
    fill_random(layer.bias, rng, 0.1);
    Tensor input({2, 2, 5, 5}, 0.0);
    fill_random(input, rng);
    Tensor proj({2, 3, 5, 5}, 0.0);
    fill_random(proj, rng);

    const auto J = [&]() {
        const Tensor out = conv2d_forward(input, layer);
        double s = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) {
            s += out[i] * proj[i];
        }
        return s;
    };
    const ConvGrads grads = conv2d_backward(proj, input, layer);

    for (std::size_t i : {std::size_t(0), std::size_t(17), input.size() - 1}) {
        CHECK(grads.input[i] == doctest::Approx(central_diff(J, input.data[i])).epsilon(1e-6));
    }
    for (std::size_t i : {std::size_t(0), std::size_t(25), layer.weights.size() - 1}) {
        CHECK(grads.weights[i] ==
              doctest::Approx(central_diff(J, layer.weights.data[i])).epsilon(1e-6));
    }
    for (std::size_t i = 0; i < layer.bias.size(); ++i) {
        CHECK(grads.bias[i] == doctest::Approx(central_diff(J, layer.bias.data[i])).epsilon(1e-6));
    }
}

TEST_CASE("max pooling keeps the first maximal element on ties") {
    Tensor input({1, 1, 4, 4}, 0.0);
    // window (0,0): tie between positions (0,1) and (1,0)
    input.at4(0, 0, 0, 1) = 5.0;
    input.at4(0, 0, 1, 0) = 5.0;
    // window (0,1): single max at (1,3)
    input.at4(0, 0, 1, 3) = 2.0;
    // window (1,0): negative values, max is the least negative
    input.at4(0, 0, 2, 0) = -3.0;
    input.at4(0, 0, 2, 1) = -1.0;
    input.at4(0, 0, 3, 0) = -2.0;
    input.at4(0, 0, 3, 1) = -4.0;
    const PoolResult pooled = maxpool_forward(input);
    CHECK(pooled.output.shape == std::vector<std::size_t>{1, 1, 2, 2});
    CHECK(pooled.output.at4(0, 0, 0, 0) == 5.0);
    CHECK(pooled.argmax[0] == 1);  // row-major first of the tie
    CHECK(pooled.output.at4(0, 0, 0, 1) == 2.0);
    CHECK(pooled.argmax[1] == 7);
    CHECK(pooled.output.at4(0, 0, 1, 0) == -1.0);
    CHECK(pooled.argmax[2] == 9);

    Tensor grad({1, 1, 2, 2}, 0.0);
    grad.at4(0, 0, 0, 0) = 1.5;
    grad.at4(0, 0, 1, 0) = -2.5;
    const Tensor back = maxpool_backward(grad, pooled.argmax, input.shape);
    CHECK(back.shape == input.shape);
    CHECK(back[1] == 1.5);
    CHECK(back[4] == 0.0);  // the tied loser gets nothing
    CHECK(back[9] == -2.5);

    CHECK_THROWS_AS(maxpool_forward(Tensor({1, 1, 3, 4}, 0.0)), ShapeError);
}

TEST_CASE("relu clamps forward and blocks gradient at zero") {
    Tensor input({5}, 0.0);
    input.data = {-2.0, -0.0, 0.0, 0.5, 3.0};
    const Tensor out = relu_forward(input);
    CHECK(out.data == std::vector<double>{0.0, 0.0, 0.0, 0.5, 3.0});
    Tensor grad({5}, 1.0);
    const Tensor back = relu_backward(grad, input);
    CHECK(back.data == std::vector<double>{0.0, 0.0, 0.0, 1.0, 1.0});
}

TEST_CASE("dense layer is x W^T + b with exact gradients") {
    DenseLayer layer = DenseLayer::make(3, 2);
    layer.weights.data = {1.0, 2.0, 3.0, 4.0, 5.0, 6.0};  // [2,3]
    layer.bias.data = {0.5, -0.5};
    Tensor x({2, 3}, 0.0);
    x.data = {1.0, 0.0, -1.0, 2.0, 1.0, 0.0};
    const Tensor y = dense_forward(x, layer);
    CHECK(y.shape == std::vector<std::size_t>{2, 2});
    CHECK(y.at2(0, 0) == doctest::Approx(1.0 - 3.0 + 0.5));
    CHECK(y.at2(0, 1) == doctest::Approx(4.0 - 6.0 - 0.5));
    CHECK(y.at2(1, 0) == doctest::Approx(2.0 + 2.0 + 0.5));
    CHECK(y.at2(1, 1) == doctest::Approx(8.0 + 5.0 - 0.5));

    Rng rng(5);
    Tensor proj({2, 2}, 0.0);
    fill_random(proj, rng);
    const auto J = [&]() {
        const Tensor out = dense_forward(x, layer);
        double s = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) {
            s += out[i] * proj[i];
        }
        return s;
    };
    const DenseGrads grads = dense_backward(proj, x, layer);
    for (std::size_t i = 0; i < x.size(); ++i) {
        CHECK(grads.input[i] == doctest::Approx(central_diff(J, x.data[i])).epsilon(1e-8));
    }
    for (std::size_t i = 0; i < layer.weights.size(); ++i) {
        CHECK(grads.weights[i] ==
              doctest::Approx(central_diff(J, layer.weights.data[i])).epsilon(1e-8));
    }
    for (std::size_t i = 0; i < layer.bias.size(); ++i) {
        CHECK(grads.bias[i] == doctest::Approx(central_diff(J, layer.bias.data[i])).epsilon(1e-8));
    }
}

TEST_CASE("rank-1 dense input gives rank-1 output") {
    DenseLayer layer = DenseLayer::make(3, 2);
    layer.weights.data = {1.0, 1.0, 1.0, 2.0, 2.0, 2.0};
    Tensor x({3}, 1.0);
    const Tensor y = dense_forward(x, layer);
    CHECK(y.shape == std::vector<std::size_t>{2});
    CHECK(y[0] == doctest::Approx(3.0));
    CHECK(y[1] == doctest::Approx(6.0));
}

TEST_CASE("batchnorm train mode standardizes each channel") {
    Rng rng(21);
    BatchNormLayer layer = BatchNormLayer::make(3);
    Tensor input({4, 3, 2, 2}, 0.0);
    fill_random(input, rng, 2.0);
    for (std::size_t i = 0; i < input.size(); ++i) {
        input[i] += 5.0;  // offset so normalization has something to remove
    }
    BnCache cache;
    const Tensor out = batchnorm_forward(input, layer, BnMode::train, &cache);
    for (std::size_t c = 0; c < 3; ++c) {
        double sum = 0.0, sq = 0.0;
        std::size_t count = 0;
        for (std::size_t n = 0; n < 4; ++n) {
            for (std::size_t p = 0; p < 4; ++p) {
                const double v = out.at4(n, c, p / 2, p % 2);
                sum += v;
                sq += v * v;
                ++count;
            }
        }
        const double mean = sum / static_cast<double>(count);
        const double var = sq / static_cast<double>(count) - mean * mean;
        CHECK(std::abs(mean) < 1e-12);
        CHECK(var == doctest::Approx(1.0).epsilon(1e-3));  // epsilon in the denominator
    }
    // running stats moved from their init toward the batch stats
    CHECK(layer.running_mean[0] != 0.0);
    CHECK(layer.running_var[0] != 1.0);

    CHECK_THROWS_AS(batchnorm_forward(Tensor({1, 3, 2, 2}, 0.0), layer, BnMode::train),
                    ShapeError);
}

TEST_CASE("batchnorm running statistics use the declared update rule") {
    BatchNormLayer layer = BatchNormLayer::make(1);
    Tensor input({2, 1, 1, 2}, 0.0);
    input.data = {1.0, 2.0, 3.0, 6.0};
    batchnorm_forward(input, layer, BnMode::train);
    // batch mean 3, biased var 3.5, unbiased var 14/3
    CHECK(layer.running_mean[0] == doctest::Approx(0.9 * 0.0 + 0.1 * 3.0).epsilon(1e-12));
    CHECK(layer.running_var[0] == doctest::Approx(0.9 * 1.0 + 0.1 * (14.0 / 3.0)).epsilon(1e-12));
}

TEST_CASE("batchnorm eval mode uses running statistics") {
    BatchNormLayer layer = BatchNormLayer::make(1);
    layer.running_mean[0] = 2.0;
    layer.running_var[0] = 4.0;
    layer.scale[0] = 3.0;
    layer.shift[0] = 1.0;
    Tensor input({1, 1, 1, 1}, 6.0);
    const Tensor out = batchnorm_forward(input, layer, BnMode::eval);
    // (6-2)/sqrt(4+1e-5) * 3 + 1
    CHECK(out[0] == doctest::Approx(4.0 / std::sqrt(4.0 + 1e-5) * 3.0 + 1.0).epsilon(1e-12));
}

TEST_CASE("batchnorm gradients match central differences") {
    Rng rng(31);
    BatchNormLayer layer = BatchNormLayer::make(2);
    fill_random(layer.scale, rng, 0.5);
    for (double& v : layer.scale.data) {
        v += 1.0;
    }
    fill_random(layer.shift, rng, 0.2);
    Tensor input({3, 2, 2, 2}, 0.0);
    fill_random(input, rng);
    Tensor proj({3, 2, 2, 2}, 0.0);
    fill_random(proj, rng);

    const auto J = [&]() {
        BatchNormLayer probe = layer;  // keep running stats untouched
        const Tensor out = batchnorm_forward(input, probe, BnMode::train);
        double s = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) {
            s += out[i] * proj[i];
        }
        return s;
    };
    BnCache cache;
    BatchNormLayer fwd = layer;
    batchnorm_forward(input, fwd, BnMode::train, &cache);
    const BnGrads grads = batchnorm_backward(proj, layer, cache);

    for (std::size_t i = 0; i < input.size(); i += 5) {
        CHECK(grads.input[i] == doctest::Approx(central_diff(J, input.data[i])).epsilon(1e-5));
    }
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(grads.scale[i] == doctest::Approx(central_diff(J, layer.scale.data[i])).epsilon(1e-6));
        CHECK(grads.shift[i] == doctest::Approx(central_diff(J, layer.shift.data[i])).epsilon(1e-6));
    }
}

TEST_CASE("softmax cross-entropy against a direct evaluation") {
    Tensor logits({3}, 0.0);
    logits.data = {1.0, 2.0, 0.5};
    const LossResult r = softmax_cross_entropy(logits, 1);
    const double z = std::exp(1.0) + std::exp(2.0) + std::exp(0.5);
    CHECK(r.loss == doctest::Approx(-std::log(std::exp(2.0) / z)).epsilon(1e-12));
    double grad_sum = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
        const double soft = std::exp(logits[i]) / z;
        const double expected = soft - (i == 1 ? 1.0 : 0.0);
        CHECK(r.grad_logits[i] == doctest::Approx(expected).epsilon(1e-12));
        grad_sum += r.grad_logits[i];
    }
    CHECK(grad_sum == doctest::Approx(0.0).epsilon(1e-12));
    CHECK_THROWS_AS(softmax_cross_entropy(logits, 3), std::invalid_argument);
}

TEST_CASE("softmax is stable under large logit offsets") {
    Tensor logits({2}, 0.0);
    logits.data = {1000.0, 1001.0};
    const LossResult r = softmax_cross_entropy(logits, 1);
    CHECK(std::isfinite(r.loss));
    CHECK(r.loss == doctest::Approx(std::log(1.0 + std::exp(-1.0))).epsilon(1e-12));
}

TEST_CASE("batch loss is the mean and gradients carry 1/N") {
    Tensor logits({2, 3}, 0.0);
    logits.data = {1.0, 2.0, 0.5, 0.0, -1.0, 0.2};
    const std::vector<std::uint8_t> labels = {1, 0};
    const LossResult batch = softmax_cross_entropy_batch(logits, labels);
    Tensor row0({3}, 0.0), row1({3}, 0.0);
    row0.data = {1.0, 2.0, 0.5};
    row1.data = {0.0, -1.0, 0.2};
    const LossResult a = softmax_cross_entropy(row0, 1);
    const LossResult b = softmax_cross_entropy(row1, 0);
    CHECK(batch.loss == doctest::Approx(0.5 * (a.loss + b.loss)).epsilon(1e-12));
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(batch.grad_logits.at2(0, i) == doctest::Approx(0.5 * a.grad_logits[i]).epsilon(1e-12));
        CHECK(batch.grad_logits.at2(1, i) == doctest::Approx(0.5 * b.grad_logits[i]).epsilon(1e-12));
    }
}
