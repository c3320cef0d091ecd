#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "shallownet/model.hpp"

namespace snet {

/// Images already normalized to [-1, 1], batch-first [N,3,32,32].
struct Dataset {
    Tensor images;
    std::vector<std::uint8_t> labels;  // class indices 0..9
    std::string split;                 // "train" or "test"
};

/// Pixel byte to normalized value: 2*(p/255) - 1.
inline double preprocess(std::uint8_t pixel) {
    return 2.0 * (static_cast<double>(pixel) / 255.0) - 1.0;
}

/// Name of the environment variable holding the dataset root.
inline constexpr const char* kDataEnvVar = "SHALLOWNET_DATA";

/// Resolves the dataset root: the explicit argument if non-empty, else
/// the SHALLOWNET_DATA environment variable. Throws IoError with a
/// remediation hint when neither is set.
std::filesystem::path resolve_data_root(const std::string& cli_path);

/// Loads the standard binary batches (3073-byte records, label byte then
/// 3072 channel-planar pixels) from `root` or `root`/cifar-10-batches-bin.
/// Returns the 50,000-image train split and 10,000-image test split,
/// preprocessed. Missing or truncated files raise IoError naming the
/// byte offset; a label byte over 9 raises CorruptError.
std::pair<Dataset, Dataset> load_cifar10(const std::filesystem::path& root);

struct CheckpointMeta {
    std::uint64_t seed = 0;
    std::uint32_t epoch = 0;
    bool high_precision = false;  // store weights as 64-bit instead of 32-bit
};

/// Binary checkpoint: magic, version, flags, seed, epoch, batchnorm
/// epsilon/momentum, the serialized architecture text, then one
/// length-prefixed little-endian float block per parameter tensor
/// (conv weights/bias, dense weights/bias, batchnorm
/// scale/shift/running_mean/running_var, in layer order). 32-bit floats
/// by default; 64-bit in high-precision mode, flagged in the header.
std::vector<std::uint8_t> save_checkpoint(const Model& model, const CheckpointMeta& meta);

/// Rebuilds the model from the embedded architecture and weight blocks.
/// Magic/version/block-count mismatches and truncation raise
/// CorruptError.
std::pair<Model, CheckpointMeta> load_checkpoint(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path);
void write_binary_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace snet
