// Microbenchmarks for the engine's hot paths. Throughput is reported as
// items/s where one item is one multiply-add, so the numbers read
// directly against the complexity tables (e.g. a 240k-MAdd conv at
// 2 G items/s costs 0.12 ms).

#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "shallownet/arch.hpp"
#include "shallownet/complexity.hpp"
#include "shallownet/layers.hpp"
#include "shallownet/model.hpp"
#include "shallownet/tensor.hpp"
#include "shallownet/training.hpp"

namespace {

using namespace snet;

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng) {
    Tensor t(std::move(shape), 0.0);
    for (double& v : t.data) {
        v = rng.next_normal();
    }
    return t;
}

// Second conv of the d1=6 reference net: 6 -> 16, 5x5 valid on 14x14.
void conv_lenet_stage2(benchmark::State& state) {
    Rng rng(1);
    ConvLayer layer = ConvLayer::make(6, 16, 5, 0);
    layer.weights = random_tensor({16, 6, 5, 5}, rng);
    layer.bias = random_tensor({16}, rng);
    const Tensor input = random_tensor({6, 14, 14}, rng);
    for (auto _ : state) {
        Tensor out = conv2d_forward(input, layer);
        benchmark::DoNotOptimize(out.data.data());
    }
    state.SetItemsProcessed(state.iterations() * 240000);
}
BENCHMARK(conv_lenet_stage2);

// A mid-body block of the d=64 generalized VGG: 64 -> 64, 3x3 pad 1.
void conv_vgg_block(benchmark::State& state) {
    Rng rng(2);
    ConvLayer layer = ConvLayer::make(64, 64, 3, 1);
    layer.weights = random_tensor({64, 64, 3, 3}, rng);
    layer.bias = random_tensor({64}, rng);
    const Tensor input = random_tensor({64, 8, 8}, rng);
    for (auto _ : state) {
        Tensor out = conv2d_forward(input, layer);
        benchmark::DoNotOptimize(out.data.data());
    }
    state.SetItemsProcessed(state.iterations() * 2359296);
}
BENCHMARK(conv_vgg_block);

// The dominant dense layer of every VGG variant.
void dense_vgg_hidden(benchmark::State& state) {
    Rng rng(3);
    DenseLayer layer = DenseLayer::make(4096, 4096);
    layer.weights = random_tensor({4096, 4096}, rng);
    layer.bias = random_tensor({4096}, rng);
    const Tensor input = random_tensor({1, 4096}, rng);
    for (auto _ : state) {
        Tensor out = dense_forward(input, layer);
        benchmark::DoNotOptimize(out.data.data());
    }
    state.SetItemsProcessed(state.iterations() * 4096 * 4096);
}
BENCHMARK(dense_vgg_hidden);

void lenet_forward_batch10(benchmark::State& state) {
    Rng rng(4);
    Model model = build_model(build_lenet(6), rng);
    const Tensor batch = random_tensor({10, 3, 32, 32}, rng);
    for (auto _ : state) {
        Tensor logits = model_forward(model, batch, BnMode::eval);
        benchmark::DoNotOptimize(logits.data.data());
    }
    state.SetItemsProcessed(state.iterations() * 10 * 651720);
}
BENCHMARK(lenet_forward_batch10);

// One full optimizer step: forward, loss, backward, Nesterov update.
void lenet_train_step_batch10(benchmark::State& state) {
    Rng rng(5);
    Model model = build_model(build_lenet(6), rng);
    const Tensor batch = random_tensor({10, 3, 32, 32}, rng);
    const std::vector<std::uint8_t> labels = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    std::vector<Tensor*> params = param_tensors(model);
    std::vector<Tensor> velocity;
    for (const Tensor* p : params) {
        velocity.push_back(Tensor(p->shape, 0.0));
    }
    for (auto _ : state) {
        ForwardCache cache;
        Tensor logits = model_forward(model, batch, BnMode::train, &cache);
        const LossResult loss = softmax_cross_entropy_batch(logits, labels);
        const std::vector<Tensor> grads = model_backward(model, cache, loss.grad_logits);
        for (std::size_t i = 0; i < params.size(); ++i) {
            sgd_nesterov_step(*params[i], grads[i], velocity[i], 1e-6, 0.91, 9.5e-4);
        }
        benchmark::DoNotOptimize(loss.loss);
    }
    state.SetItemsProcessed(state.iterations() * 3 * 10 * 651720);
}
BENCHMARK(lenet_train_step_batch10);

// Pure accounting: walking the widest architecture's layer list.
void madd_count_vgg64(benchmark::State& state) {
    const ArchSpec spec = build_vgg16(64);
    for (auto _ : state) {
        benchmark::DoNotOptimize(madds(spec).total);
    }
}
BENCHMARK(madd_count_vgg64);

}  // namespace

BENCHMARK_MAIN();
