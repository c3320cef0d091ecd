#include "shallownet/training.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "shallownet/csv.hpp"
#include "shallownet/errors.hpp"

namespace snet {

void validate_config(const TrainConfig& config) {
    if (config.eta <= 0.0) throw CorruptError("train config: eta must be positive");
    if (config.mu < 0.0 || config.mu >= 1.0) throw CorruptError("train config: mu must be in [0,1)");
    if (config.alpha < 0.0) throw CorruptError("train config: alpha must be >= 0");
    if (config.epochs < 1) throw CorruptError("train config: epochs must be >= 1");
    if (config.batch_size < 10 || config.batch_size % 10 != 0) {
        throw CorruptError("train config: batch size must be a positive multiple of 10");
    }
    if (config.schedule.empty()) {
        throw CorruptError("train config: schedule must have at least one regime");
    }
    std::size_t expect = 1;
    for (const LrRegime& r : config.schedule) {
        if (r.first != expect || r.last < r.first) {
            throw CorruptError("train config: regimes must tile [1, epochs] in order");
        }
        if (r.dt < 1 || r.q <= 0.0) {
            throw CorruptError("train config: regime needs dt >= 1 and q > 0");
        }
        expect = r.last + 1;
    }
    if (expect != config.epochs + 1) {
        throw CorruptError("train config: schedule covers [1, " + std::to_string(expect - 1) +
                           "], epochs is " + std::to_string(config.epochs));
    }
}

std::string serialize_config(const TrainConfig& config) {
    std::string out;
    out += "shallownet-train v1\n";
    out += "eta " + format_double(config.eta) + "\n";
    out += "mu " + format_double(config.mu) + "\n";
    out += "alpha " + format_double(config.alpha) + "\n";
    out += "epochs " + std::to_string(config.epochs) + "\n";
    out += "batch " + std::to_string(config.batch_size) + "\n";
    out += "seed " + std::to_string(config.seed) + "\n";
    out += "augment " + std::to_string(config.augment ? 1 : 0) + "\n";
    out += "holdout " + std::to_string(config.holdout) + "\n";
    out += "regimes " + std::to_string(config.schedule.size()) + "\n";
    for (const LrRegime& r : config.schedule) {
        out += "regime " + std::to_string(r.first) + " " + std::to_string(r.last) + " " +
               format_double(r.q) + " " + std::to_string(r.dt) + "\n";
    }
    return out;
}

namespace {

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) {
        out.push_back(tok);
    }
    return out;
}

std::uint64_t parse_u64_field(const std::string& tok, const char* what) {
    try {
        std::size_t pos = 0;
        unsigned long long v = std::stoull(tok, &pos);
        if (pos != tok.size()) {
            throw std::invalid_argument(tok);
        }
        return v;
    } catch (const std::exception&) {
        throw CorruptError(std::string("train config: bad ") + what + " '" + tok + "'");
    }
}

}  // namespace

TrainConfig parse_config(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    auto next = [&](const char* what) {
        if (!std::getline(in, line)) {
            throw CorruptError(std::string("train config: missing ") + what);
        }
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        return split_ws(line);
    };
    auto field = [&](const char* key) {
        auto tok = next(key);
        if (tok.size() != 2 || tok[0] != key) {
            throw CorruptError(std::string("train config: expected '") + key + " <value>', got '" +
                               line + "'");
        }
        return tok[1];
    };

    if (next("header") != std::vector<std::string>{"shallownet-train", "v1"}) {
        throw CorruptError("train config: bad header, expected 'shallownet-train v1'");
    }
    TrainConfig c;
    c.eta = parse_double(field("eta"));
    c.mu = parse_double(field("mu"));
    c.alpha = parse_double(field("alpha"));
    c.epochs = parse_u64_field(field("epochs"), "epochs");
    c.batch_size = parse_u64_field(field("batch"), "batch");
    c.seed = parse_u64_field(field("seed"), "seed");
    c.augment = parse_u64_field(field("augment"), "augment") != 0;
    c.holdout = parse_u64_field(field("holdout"), "holdout");
    const std::size_t regimes = parse_u64_field(field("regimes"), "regimes");
    c.schedule.clear();
    for (std::size_t i = 0; i < regimes; ++i) {
        auto tok = next("regime");
        if (tok.size() != 5 || tok[0] != "regime") {
            throw CorruptError("train config: bad regime line '" + line + "'");
        }
        LrRegime r;
        r.first = parse_u64_field(tok[1], "regime first");
        r.last = parse_u64_field(tok[2], "regime last");
        r.q = parse_double(tok[3]);
        r.dt = parse_u64_field(tok[4], "regime dt");
        c.schedule.push_back(r);
    }
    validate_config(c);
    return c;
}

const char* variant_name(Variant v) {
    switch (v) {
        case Variant::main: return "main";
        case Variant::low_constant: return "low";
        case Variant::high_constant: return "high";
    }
    return "?";
}

Variant variant_from_name(const std::string& name) {
    if (name == "main") return Variant::main;
    if (name == "low") return Variant::low_constant;
    if (name == "high") return Variant::high_constant;
    throw PresetError("unknown variant '" + name + "' (expected main, low, or high)");
}

double preset_constant(Family family, Variant variant) {
    switch (family) {
        case Family::lenet:
            switch (variant) {
                case Variant::main: return 8.0 / 3.0;
                case Variant::low_constant: return 4.0 / 3.0;
                case Variant::high_constant: return 16.0 / 3.0;
            }
            break;
        case Family::vgg16:
            switch (variant) {
                case Variant::main: return 2.0;
                case Variant::low_constant: return 1.5;
                case Variant::high_constant: return 2.5;
            }
            break;
        case Family::vgg16_enhanced:
            if (variant == Variant::main) {
                return 2.0;
            }
            break;
    }
    throw PresetError("no constant for this family/variant combination");
}

namespace {

std::vector<LrRegime> one_regime(std::size_t epochs, double q, std::size_t dt) {
    return {{1, epochs, q, dt}};
}

std::vector<LrRegime> lenet_main_schedule(std::size_t epochs) {
    return {{1, 120, 0.8, 10}, {121, epochs, 0.7, 10}};
}

TrainConfig base_config(double eta, double mu, double alpha, std::size_t epochs,
                        std::vector<LrRegime> schedule) {
    TrainConfig c;
    c.eta = eta;
    c.mu = mu;
    c.alpha = alpha;
    c.epochs = epochs;
    c.schedule = std::move(schedule);
    return c;
}

[[noreturn]] void no_preset(Family family, std::size_t d, Variant variant) {
    throw PresetError(std::string("no tabulated hyper-parameters for ") + family_name(family) +
                      " d=" + std::to_string(d) + " variant=" + variant_name(variant) +
                      "; supply an explicit config");
}

}  // namespace

TrainConfig preset(Family family, std::size_t d, Variant variant) {
    if (family == Family::lenet && variant == Variant::main) {
        switch (d) {
            case 1: return base_config(0.028, 0.850, 9.5e-4, 240, lenet_main_schedule(240));
            case 2: return base_config(0.028, 0.850, 9.5e-4, 240, lenet_main_schedule(240));
            case 3: return base_config(0.028, 0.905, 9.5e-4, 220, lenet_main_schedule(220));
            case 6: return base_config(0.028, 0.910, 9.5e-4, 280, lenet_main_schedule(280));
            case 12: return base_config(0.028, 0.915, 9.5e-4, 240, lenet_main_schedule(240));
            case 18: return base_config(0.028, 0.950, 9.5e-4, 280, lenet_main_schedule(280));
            default: no_preset(family, d, variant);
        }
    }
    if (family == Family::lenet && variant == Variant::low_constant) {
        const std::vector<LrRegime> low = {{1, 60, 0.9, 10}, {61, 200, 0.85, 10}};
        switch (d) {
            case 3: return base_config(0.035, 0.900, 1e-5, 200, low);
            case 6: return base_config(0.030, 0.975, 1e-5, 200, low);
            case 12: return base_config(0.030, 0.965, 4e-5, 200, low);
            case 18:
                return base_config(0.025, 0.975, 2e-4, 200,
                                   {{1, 30, 0.95, 10}, {31, 60, 0.9, 10}, {61, 200, 0.8, 10}});
            default: no_preset(family, d, variant);
        }
    }
    if (family == Family::lenet && variant == Variant::high_constant) {
        switch (d) {
            case 3:
                return base_config(0.028, 0.940, 9e-4, 200,
                                   {{1, 120, 0.8, 10}, {121, 200, 0.7, 10}});
            case 6: return base_config(0.006, 0.975, 9e-4, 200, one_regime(200, 0.6, 20));
            case 12: return base_config(0.010, 0.975, 9e-4, 200, one_regime(200, 0.6, 20));
            case 18: return base_config(0.010, 0.975, 1.5e-3, 200, one_regime(200, 0.6, 20));
            default: no_preset(family, d, variant);
        }
    }
    if (family == Family::vgg16 && variant == Variant::main) {
        switch (d) {
            case 8: return base_config(0.01, 0.920, 9e-4, 200, one_regime(200, 0.6, 20));
            case 16: return base_config(0.01, 0.975, 1.5e-3, 200, one_regime(200, 0.6, 20));
            case 32: return base_config(0.01, 0.965, 9.5e-4, 200, one_regime(200, 0.6, 20));
            case 64: return base_config(0.028, 0.975, 1.5e-3, 200, one_regime(200, 0.6, 20));
            default: no_preset(family, d, variant);
        }
    }
    if (family == Family::vgg16 && variant == Variant::low_constant) {
        switch (d) {
            case 16: return base_config(0.008, 0.975, 9e-4, 200, one_regime(200, 0.6, 20));
            case 32: return base_config(0.007, 0.975, 1.5e-3, 200, one_regime(200, 0.6, 20));
            case 64: return base_config(0.002, 0.970, 3e-3, 200, one_regime(200, 0.6, 20));
            default: no_preset(family, d, variant);
        }
    }
    if (family == Family::vgg16 && variant == Variant::high_constant) {
        switch (d) {
            case 16: return base_config(0.010, 0.975, 9e-4, 200, one_regime(200, 0.6, 20));
            case 32: return base_config(0.010, 0.965, 9e-4, 200, one_regime(200, 0.6, 20));
            case 64: return base_config(0.015, 0.975, 9e-4, 200, one_regime(200, 0.6, 20));
            default: no_preset(family, d, variant);
        }
    }
    if (family == Family::vgg16_enhanced && variant == Variant::main && d == 16) {
        return base_config(0.007, 0.975, 2.0e-3, 200, one_regime(200, 0.6, 20));
    }
    no_preset(family, d, variant);
}

TrainConfig with_epochs(TrainConfig config, std::size_t epochs) {
    if (epochs < 1) {
        throw CorruptError("with_epochs: epochs must be >= 1");
    }
    std::vector<LrRegime> clipped;
    for (const LrRegime& r : config.schedule) {
        if (r.first > epochs) {
            break;
        }
        LrRegime c = r;
        c.last = std::min(c.last, epochs);
        clipped.push_back(c);
    }
    if (!clipped.empty() && clipped.back().last < epochs) {
        clipped.back().last = epochs;  // extend the final regime
    }
    config.schedule = std::move(clipped);
    config.epochs = epochs;
    validate_config(config);
    return config;
}

double lr_at(const TrainConfig& config, std::size_t epoch) {
    if (epoch < 1 || epoch > config.epochs) {
        throw RangeError("lr_at: epoch " + std::to_string(epoch) + " outside [1, " +
                         std::to_string(config.epochs) + "]");
    }
    double lr = config.eta;
    for (const LrRegime& r : config.schedule) {
        if (epoch < r.first) {
            break;
        }
        // decays land every dt epochs counted from the regime start
        const std::size_t within = std::min(epoch, r.last) - r.first + 1;
        const std::size_t n = within / r.dt;
        lr *= std::pow(r.q, static_cast<double>(n));
    }
    return lr;
}

void sgd_nesterov_step(Tensor& weights, const Tensor& gradients, Tensor& velocity,
                       double eta_effective, double mu, double alpha) {
    if (!weights.same_shape(gradients) || !weights.same_shape(velocity)) {
        throw ShapeError("sgd_nesterov_step: weights/gradients/velocity shapes differ");
    }
    double* w = weights.data.data();
    const double* g = gradients.data.data();
    double* v = velocity.data.data();
    const std::size_t n = weights.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double gp = g[i] + alpha * w[i];
        v[i] = mu * v[i] + gp;
        w[i] -= eta_effective * (gp + mu * v[i]);
    }
}

std::vector<std::vector<std::uint32_t>> stratified_batches(std::span<const std::uint8_t> labels,
                                                           std::size_t batch_size, Rng& rng) {
    if (batch_size < 10 || batch_size % 10 != 0) {
        throw StratifyError("batch size must be a positive multiple of 10");
    }
    const std::size_t quota = batch_size / 10;
    std::array<std::vector<std::uint32_t>, 10> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] > 9) {
            throw StratifyError("label " + std::to_string(labels[i]) + " at index " +
                                std::to_string(i) + " outside [0,10)");
        }
        by_class[labels[i]].push_back(static_cast<std::uint32_t>(i));
    }
    const std::size_t per_class = by_class[0].size();
    for (std::size_t c = 0; c < 10; ++c) {
        if (by_class[c].size() != per_class) {
            throw StratifyError("class " + std::to_string(c) + " has " +
                                std::to_string(by_class[c].size()) + " examples, class 0 has " +
                                std::to_string(per_class) + "; stratification needs equal counts");
        }
    }
    if (per_class == 0 || per_class % quota != 0) {
        throw StratifyError("per-class count " + std::to_string(per_class) +
                            " not divisible by per-batch quota " + std::to_string(quota));
    }

    auto shuffle = [&rng](std::vector<std::uint32_t>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[rng.next_below(i)]);
        }
    };
    for (auto& v : by_class) {
        shuffle(v);
    }

    const std::size_t n_batches = per_class / quota;
    std::vector<std::vector<std::uint32_t>> batches(n_batches);
    for (std::size_t b = 0; b < n_batches; ++b) {
        batches[b].reserve(batch_size);
        for (std::size_t c = 0; c < 10; ++c) {
            for (std::size_t j = 0; j < quota; ++j) {
                batches[b].push_back(by_class[c][b * quota + j]);
            }
        }
        shuffle(batches[b]);
    }
    return batches;
}

Tensor augment(const Tensor& image, Rng& rng) {
    if (image.rank() != 3) {
        throw ShapeError("augment: expected a [C,H,W] image");
    }
    const std::size_t c = image.shape[0], h = image.shape[1], w = image.shape[2];
    const bool flip = rng.next_uniform() < 0.5;
    const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(rng.next_below(9)) - 4;
    const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(rng.next_below(9)) - 4;

    Tensor out(image.shape, 0.0);
    for (std::size_t ch = 0; ch < c; ++ch) {
        const double* src = image.data.data() + ch * h * w;
        double* dst = out.data.data() + ch * h * w;
        for (std::size_t y = 0; y < h; ++y) {
            const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y) - dy;
            if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) {
                continue;  // row stays at the 0 fill
            }
            for (std::size_t x = 0; x < w; ++x) {
                std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x) - dx;
                if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(w)) {
                    continue;
                }
                if (flip) {
                    sx = static_cast<std::ptrdiff_t>(w) - 1 - sx;
                }
                dst[y * w + x] = src[static_cast<std::size_t>(sy) * w +
                                     static_cast<std::size_t>(sx)];
            }
        }
    }
    return out;
}

namespace {

constexpr std::size_t kEvalChunk = 500;

double evaluate_range(Model& model, const Tensor& images, const std::vector<std::uint8_t>& labels,
                      std::size_t begin, std::size_t end) {
    const std::size_t pixels = images.shape[1] * images.shape[2] * images.shape[3];
    std::size_t wrong = 0;
    for (std::size_t at = begin; at < end; at += kEvalChunk) {
        const std::size_t n = std::min(kEvalChunk, end - at);
        Tensor chunk({n, images.shape[1], images.shape[2], images.shape[3]}, 0.0);
        std::copy(images.data.begin() + at * pixels, images.data.begin() + (at + n) * pixels,
                  chunk.data.begin());
        Tensor logits = model_forward(model, chunk, BnMode::eval);
        const std::size_t classes = logits.shape[1];
        for (std::size_t i = 0; i < n; ++i) {
            const double* row = logits.data.data() + i * classes;
            std::size_t best = 0;
            for (std::size_t j = 1; j < classes; ++j) {
                if (row[j] > row[best]) {
                    best = j;  // ties keep the lowest index
                }
            }
            if (best != labels[at + i]) {
                ++wrong;
            }
        }
    }
    return static_cast<double>(wrong) / static_cast<double>(end - begin);
}

}  // namespace

double evaluate(Model& model, const Dataset& testset) {
    if (testset.labels.empty()) {
        throw std::invalid_argument("evaluate: empty dataset");
    }
    return evaluate_range(model, testset.images, testset.labels, 0, testset.labels.size());
}

std::pair<double, std::optional<double>> aggregate_runs(std::span<const double> errors) {
    if (errors.empty()) {
        throw std::invalid_argument("aggregate_runs: no runs");
    }
    double sum = 0.0;
    for (double e : errors) {
        sum += e;
    }
    const double mean = sum / static_cast<double>(errors.size());
    if (errors.size() < 2) {
        return {mean, std::nullopt};
    }
    double sq = 0.0;
    for (double e : errors) {
        sq += (e - mean) * (e - mean);
    }
    return {mean, std::sqrt(sq / static_cast<double>(errors.size() - 1))};
}

RunResult train(const ArchSpec& spec, const TrainConfig& config, const Dataset& train_data,
                const Dataset& test_data, std::span<const std::uint64_t> seeds) {
    validate_config(config);
    validate_arch(spec);
    if (seeds.empty()) {
        throw std::invalid_argument("train: need at least one seed");
    }
    const std::size_t total = train_data.labels.size();
    if (config.holdout >= total) {
        throw StratifyError("holdout " + std::to_string(config.holdout) +
                            " leaves no training examples");
    }
    const std::size_t n_train = total - config.holdout;
    const std::size_t c = train_data.images.shape[1];
    const std::size_t h = train_data.images.shape[2];
    const std::size_t w = train_data.images.shape[3];
    const std::size_t pixels = c * h * w;

    RunResult result;
    for (std::uint64_t seed : seeds) {
        Rng root(seed);
        Rng init = root.child(0);
        Model model = build_model(spec, init);
        std::vector<Tensor*> params = param_tensors(model);
        std::vector<Tensor> velocity;
        velocity.reserve(params.size());
        for (const Tensor* p : params) {
            velocity.emplace_back(p->shape, 0.0);
        }

        SeedRun run;
        run.seed = seed;
        Tensor sample({c, h, w}, 0.0);
        for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
            Rng er = root.child(epoch);
            const auto batches = stratified_batches(
                std::span(train_data.labels.data(), n_train), config.batch_size, er);
            const double eta = lr_at(config, epoch);
            double loss_sum = 0.0;

            for (std::size_t step = 0; step < batches.size(); ++step) {
                const auto& index = batches[step];
                Tensor batch({index.size(), c, h, w}, 0.0);
                std::vector<std::uint8_t> batch_labels(index.size());
                for (std::size_t j = 0; j < index.size(); ++j) {
                    const double* src = train_data.images.data.data() + index[j] * pixels;
                    double* dst = batch.data.data() + j * pixels;
                    if (config.augment) {
                        std::copy(src, src + pixels, sample.data.begin());
                        Tensor aug = augment(sample, er);
                        std::copy(aug.data.begin(), aug.data.end(), dst);
                    } else {
                        std::copy(src, src + pixels, dst);
                    }
                    batch_labels[j] = train_data.labels[index[j]];
                }

                ForwardCache cache;
                Tensor logits = model_forward(model, batch, BnMode::train, &cache);
                LossResult loss = softmax_cross_entropy_batch(logits, batch_labels);
                if (!std::isfinite(loss.loss)) {
                    throw DivergedError("loss diverged at seed " + std::to_string(seed) +
                                        " epoch " + std::to_string(epoch) + " step " +
                                        std::to_string(step + 1));
                }
                loss_sum += loss.loss;
                std::vector<Tensor> grads = model_backward(model, cache, loss.grad_logits);
                for (std::size_t p = 0; p < params.size(); ++p) {
                    sgd_nesterov_step(*params[p], grads[p], velocity[p], eta, config.mu,
                                      config.alpha);
                }
            }

            EpochTrace trace;
            trace.epoch = epoch;
            trace.train_loss = loss_sum / static_cast<double>(batches.size());
            trace.test_error = evaluate(model, test_data);
            if (config.holdout > 0) {
                trace.val_error = evaluate_range(model, train_data.images, train_data.labels,
                                                 n_train, total);
            }
            run.trace.push_back(trace);
        }
        run.final_error = run.trace.back().test_error;
        run.model = std::move(model);
        result.runs.push_back(std::move(run));
    }

    std::vector<double> errors;
    errors.reserve(result.runs.size());
    for (const SeedRun& r : result.runs) {
        errors.push_back(r.final_error);
    }
    auto [mean, sd] = aggregate_runs(errors);
    result.mean_error = mean;
    result.std_error = sd;
    return result;
}

}  // namespace snet
