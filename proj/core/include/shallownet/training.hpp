#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "shallownet/data.hpp"
#include "shallownet/model.hpp"

namespace snet {

/// One stretch of the stepped learning-rate decay schedule: within
/// epochs [first, last], the rate is multiplied by q once every dt
/// epochs (counted from the regime's start, so the first decay lands dt
/// epochs in). Decays compound across consecutive regimes.
struct LrRegime {
    std::size_t first = 1;
    std::size_t last = 1;
    double q = 1.0;
    std::size_t dt = 1;
};

struct TrainConfig {
    double eta = 0.0;    // initial learning rate
    double mu = 0.0;     // momentum constant
    double alpha = 0.0;  // L2 coefficient, added to the gradient as alpha*w
    std::size_t epochs = 0;
    std::size_t batch_size = 100;
    std::vector<LrRegime> schedule;  // must cover [1, epochs] without gaps
    std::uint64_t seed = 1;
    bool augment = true;
    std::size_t holdout = 0;  // trailing train images held out for validation
};

/// Validates the regime list: contiguous cover of [1, epochs], no
/// overlap, positive dt, eta > 0, mu in [0,1), alpha >= 0.
void validate_config(const TrainConfig& config);

std::string serialize_config(const TrainConfig& config);
TrainConfig parse_config(const std::string& text);

/// Hyper-parameter preset variants. `main` is each family's reference
/// constant (8/3 for LeNet, growth 2 for VGG); low/high are the
/// alternative constants studied alongside them (LeNet 4/3 and 16/3,
/// VGG 3/2 and 5/2).
enum class Variant { main, low_constant, high_constant };

const char* variant_name(Variant v);
Variant variant_from_name(const std::string& name);

/// The architecture constant each preset family/variant was tuned for.
double preset_constant(Family family, Variant variant);

/// Tabulated hyper-parameters for the (family, d, variant) combinations
/// that were actually tuned; throws PresetError for anything else.
TrainConfig preset(Family family, std::size_t d, Variant variant = Variant::main);

/// Clips or extends the schedule to a new epoch count (for shortened
/// smoke runs); the final regime absorbs any extension.
TrainConfig with_epochs(TrainConfig config, std::size_t epochs);

/// Effective learning rate at a 1-based epoch under the stepped decay.
double lr_at(const TrainConfig& config, std::size_t epoch);

/// g' = g + alpha*w; v <- mu*v + g'; w <- w - eta*(g' + mu*v).
/// The momentum update reuses the already-computed gradient rather than
/// evaluating at a lookahead point.
void sgd_nesterov_step(Tensor& weights, const Tensor& gradients, Tensor& velocity,
                       double eta_effective, double mu, double alpha);

/// Splits the examples into batches where every class appears exactly
/// batch_size/10 times, each example used once, order seeded. Class
/// counts must all be equal and divisible by the per-class quota.
std::vector<std::vector<std::uint32_t>> stratified_batches(std::span<const std::uint8_t> labels,
                                                           std::size_t batch_size, Rng& rng);

/// Random horizontal flip (probability 1/2) then translation by up to 4
/// pixels per axis, vacated pixels filled with 0 (the normalized
/// mid-value). Input is one [3,H,W] image.
Tensor augment(const Tensor& image, Rng& rng);

struct EpochTrace {
    std::size_t epoch = 0;
    double train_loss = 0.0;  // mean over the epoch's batches
    double test_error = 0.0;
    std::optional<double> val_error;  // present when holdout > 0
};

struct SeedRun {
    std::uint64_t seed = 0;
    double final_error = 0.0;
    std::vector<EpochTrace> trace;
    Model model;  // state after the final epoch
};

struct RunResult {
    std::vector<SeedRun> runs;
    double mean_error = 0.0;
    std::optional<double> std_error;  // absent for a single run
};

/// Fraction of test examples whose argmax prediction (ties to the lowest
/// index) differs from the label. Batchnorm runs in eval mode.
double evaluate(Model& model, const Dataset& testset);

/// Sample mean and, for n >= 2, the sample standard deviation (n-1
/// divisor) of per-seed final errors.
std::pair<double, std::optional<double>> aggregate_runs(std::span<const double> errors);

/// Full protocol: per seed, He-init then epochs x (N/batch) Nesterov
/// steps over stratified augmented batches with the stepped decay,
/// evaluating the test error each epoch. Throws DivergedError naming
/// seed/epoch/step if the loss leaves the reals.
RunResult train(const ArchSpec& spec, const TrainConfig& config, const Dataset& train_data,
                const Dataset& test_data, std::span<const std::uint64_t> seeds);

}  // namespace snet
