#include "shallownet/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace snet {

namespace {

constexpr double kStep = 1e-6;
constexpr double kAbsFloor = 1e-4;

double batch_loss(Model& model, const Tensor& batch, std::span<const std::uint8_t> labels) {
    Tensor logits = model_forward(model, batch, BnMode::train);
    return softmax_cross_entropy_batch(logits, labels).loss;
}

/// Which linear region of the piecewise-linear network the forward pass
/// lands in: the sign of every ReLU input plus the winning cell of every
/// pool window. A central difference is only a valid derivative when
/// both probe points stay in the base region; crossing a kink or
/// flipping a pool winner makes the two-sided quotient meaningless.
std::vector<std::uint8_t> region_signature(Model& model, const Tensor& batch) {
    ForwardCache cache;
    model_forward(model, batch, BnMode::train, &cache);
    std::vector<std::uint8_t> sig;
    for (std::size_t i = 0; i < model.spec.layers.size(); ++i) {
        const LayerKind kind = model.spec.layers[i].kind;
        if (kind == LayerKind::relu) {
            for (double v : cache.inputs[i].data) {
                sig.push_back(v > 0.0 ? 1 : 0);
            }
        } else if (kind == LayerKind::pool) {
            const Tensor& in = cache.inputs[i];
            const std::size_t w = in.shape[in.rank() - 1];
            const std::size_t h = in.shape[in.rank() - 2];
            const std::size_t planes = in.size() / (h * w);
            for (std::size_t p = 0; p < planes; ++p) {
                const double* plane = in.data.data() + p * h * w;
                for (std::size_t y = 0; y + 1 < h; y += 2) {
                    for (std::size_t x = 0; x + 1 < w; x += 2) {
                        const double cells[4] = {plane[y * w + x], plane[y * w + x + 1],
                                                 plane[(y + 1) * w + x],
                                                 plane[(y + 1) * w + x + 1]};
                        std::uint8_t win = 0;
                        for (std::uint8_t c = 1; c < 4; ++c) {
                            if (cells[c] > cells[win]) {
                                win = c;
                            }
                        }
                        sig.push_back(win);
                    }
                }
            }
        }
    }
    return sig;
}

}  // namespace

GradCheckReport gradient_check(Model& model, const Tensor& batch,
                               std::span<const std::uint8_t> labels, double tolerance, Rng& rng) {
    GradCheckReport report;
    report.tolerance = tolerance;

    ForwardCache cache;
    Tensor logits = model_forward(model, batch, BnMode::train, &cache);
    LossResult loss = softmax_cross_entropy_batch(logits, labels);
    std::vector<Tensor> analytic = model_backward(model, cache, loss.grad_logits);

    std::vector<Tensor*> params = param_tensors(model);
    std::vector<std::string> names = param_names(model);
    std::vector<std::uint8_t> base_sig;  // computed lazily, only when an entry disagrees

    for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor& tensor = *params[p];
        const std::size_t count = std::min<std::size_t>(tensor.size(), 100);

        // sample without replacement via a partial Fisher-Yates shuffle
        std::vector<std::size_t> index(tensor.size());
        for (std::size_t i = 0; i < index.size(); ++i) {
            index[i] = i;
        }
        for (std::size_t i = 0; i < count; ++i) {
            std::swap(index[i], index[i + rng.next_below(index.size() - i)]);
        }

        GradCheckEntry worst;
        worst.param = names[p];
        worst.rel_err = -1.0;
        for (std::size_t i = 0; i < count; ++i) {
            const std::size_t flat = index[i];
            const double saved = tensor.data[flat];
            tensor.data[flat] = saved + kStep;
            const double loss_hi = batch_loss(model, batch, labels);
            tensor.data[flat] = saved - kStep;
            const double loss_lo = batch_loss(model, batch, labels);
            tensor.data[flat] = saved;

            GradCheckEntry e;
            e.param = names[p] + "[" + std::to_string(flat) + "]";
            e.analytic = analytic[p].data[flat];
            e.numeric = (loss_hi - loss_lo) / (2.0 * kStep);
            const double denom = std::max(std::abs(e.analytic), std::abs(e.numeric));
            e.rel_err = denom < kAbsFloor ? 0.0 : std::abs(e.analytic - e.numeric) / denom;

            if (e.rel_err > tolerance) {
                if (base_sig.empty()) {
                    base_sig = region_signature(model, batch);
                }
                tensor.data[flat] = saved + kStep;
                bool crossed = region_signature(model, batch) != base_sig;
                if (!crossed) {
                    tensor.data[flat] = saved - kStep;
                    crossed = region_signature(model, batch) != base_sig;
                }
                tensor.data[flat] = saved;
                if (crossed) {
                    ++report.skipped;
                    continue;
                }
                report.failures.push_back(e);
            }
            ++report.checked;
            if (e.rel_err > worst.rel_err) {
                worst = e;
            }
        }
        if (worst.rel_err >= 0.0) {
            report.worst.push_back(worst);
        }
    }
    report.passed = report.failures.empty();
    return report;
}

}  // namespace snet
