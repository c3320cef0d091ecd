#include "shallownet/data.hpp"

#include <cstdlib>
#include <cstring>
#include <fstream>

namespace snet {

namespace fs = std::filesystem;

std::filesystem::path resolve_data_root(const std::string& cli_path) {
    if (!cli_path.empty()) {
        return cli_path;
    }
    if (const char* env = std::getenv(kDataEnvVar)) {
        if (*env != '\0') {
            return env;
        }
    }
    throw IoError(std::string("no dataset root: pass --data or set ") + kDataEnvVar +
                  " to a directory holding the CIFAR-10 binary batches");
}

namespace {

constexpr std::size_t kRecord = 3073;  // label byte + 3*32*32 pixels
constexpr std::size_t kPixels = 3072;
constexpr std::size_t kPerFile = 10000;

void load_batch_file(const fs::path& path, Tensor& images, std::vector<std::uint8_t>& labels,
                     std::size_t image_offset) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw IoError("missing CIFAR-10 batch file " + path.string());
    }
    std::vector<char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    const std::size_t expected = kRecord * kPerFile;
    if (bytes.size() != expected) {
        const std::size_t whole = bytes.size() / kRecord;
        throw IoError(path.string() + ": expected " + std::to_string(expected) + " bytes, got " +
                      std::to_string(bytes.size()) + " (truncated record at byte offset " +
                      std::to_string(whole * kRecord) + ")");
    }
    for (std::size_t r = 0; r < kPerFile; ++r) {
        const auto* rec = reinterpret_cast<const std::uint8_t*>(bytes.data()) + r * kRecord;
        if (rec[0] > 9) {
            throw CorruptError(path.string() + ": label byte " + std::to_string(rec[0]) +
                               " at record " + std::to_string(r) + " (byte offset " +
                               std::to_string(r * kRecord) + ")");
        }
        labels[image_offset + r] = rec[0];
        double* dst = images.data.data() + (image_offset + r) * kPixels;
        for (std::size_t i = 0; i < kPixels; ++i) {
            dst[i] = preprocess(rec[1 + i]);
        }
    }
}

}  // namespace

std::pair<Dataset, Dataset> load_cifar10(const std::filesystem::path& root) {
    fs::path dir = root;
    if (!fs::exists(dir / "data_batch_1.bin") &&
        fs::exists(dir / "cifar-10-batches-bin" / "data_batch_1.bin")) {
        dir /= "cifar-10-batches-bin";
    }

    Dataset train;
    train.split = "train";
    train.images = Tensor({50000, 3, 32, 32}, 0.0);
    train.labels.resize(50000);
    for (std::size_t b = 0; b < 5; ++b) {
        load_batch_file(dir / ("data_batch_" + std::to_string(b + 1) + ".bin"), train.images,
                        train.labels, b * kPerFile);
    }

    Dataset test;
    test.split = "test";
    test.images = Tensor({10000, 3, 32, 32}, 0.0);
    test.labels.resize(10000);
    load_batch_file(dir / "test_batch.bin", test.images, test.labels, 0);
    return {train, test};
}

namespace {

constexpr char kMagic[8] = {'S', 'N', 'E', 'T', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kFlagF64 = 1u;

// All multi-byte fields little-endian.
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
}

void put_f32(std::vector<std::uint8_t>& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

struct Reader {
    std::span<const std::uint8_t> bytes;
    std::size_t pos = 0;

    void need(std::size_t n, const char* what) const {
        if (pos + n > bytes.size()) {
            throw CorruptError(std::string("checkpoint truncated reading ") + what +
                               " at byte offset " + std::to_string(pos));
        }
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(bytes[pos + i]) << (8 * i);
        }
        pos += 4;
        return v;
    }
    std::uint64_t u64(const char* what) {
        need(8, what);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= static_cast<std::uint64_t>(bytes[pos + i]) << (8 * i);
        }
        pos += 8;
        return v;
    }
    double f64(const char* what) {
        std::uint64_t bits = u64(what);
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    float f32(const char* what) {
        std::uint32_t bits = u32(what);
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
};

/// Persisted tensors in layer order, running statistics included (they
/// are state, even though they are not trainable).
std::vector<Tensor*> persisted_tensors(Model& model) {
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
                out.push_back(&model.bn[bi].running_mean);
                out.push_back(&model.bn[bi].running_var);
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

}  // namespace

std::vector<std::uint8_t> save_checkpoint(const Model& model, const CheckpointMeta& meta) {
    std::vector<std::uint8_t> out;
    out.insert(out.end(), kMagic, kMagic + 8);
    put_u32(out, kVersion);
    put_u32(out, meta.high_precision ? kFlagF64 : 0u);
    put_u64(out, meta.seed);
    put_u32(out, meta.epoch);
    const double bn_eps = model.bn.empty() ? 1e-5 : model.bn[0].epsilon;
    const double bn_mom = model.bn.empty() ? 0.1 : model.bn[0].momentum;
    put_f64(out, bn_eps);
    put_f64(out, bn_mom);

    const std::string arch = serialize_arch(model.spec);
    put_u32(out, static_cast<std::uint32_t>(arch.size()));
    out.insert(out.end(), arch.begin(), arch.end());

    // persisted_tensors only reads; the const_cast spares a parallel
    // const overload
    std::vector<Tensor*> blocks = persisted_tensors(const_cast<Model&>(model));
    put_u32(out, static_cast<std::uint32_t>(blocks.size()));
    for (const Tensor* t : blocks) {
        put_u32(out, static_cast<std::uint32_t>(t->size()));
        if (meta.high_precision) {
            for (double v : t->data) {
                put_f64(out, v);
            }
        } else {
            for (double v : t->data) {
                put_f32(out, static_cast<float>(v));
            }
        }
    }
    return out;
}

std::pair<Model, CheckpointMeta> load_checkpoint(std::span<const std::uint8_t> bytes) {
    Reader r{bytes};
    r.need(8, "magic");
    if (std::memcmp(bytes.data(), kMagic, 8) != 0) {
        throw CorruptError("checkpoint magic mismatch");
    }
    r.pos = 8;
    const std::uint32_t version = r.u32("version");
    if (version != kVersion) {
        throw CorruptError("unsupported checkpoint version " + std::to_string(version));
    }
    const std::uint32_t flags = r.u32("flags");
    CheckpointMeta meta;
    meta.high_precision = (flags & kFlagF64) != 0;
    meta.seed = r.u64("seed");
    meta.epoch = r.u32("epoch");
    const double bn_eps = r.f64("batchnorm epsilon");
    const double bn_mom = r.f64("batchnorm momentum");

    const std::uint32_t arch_len = r.u32("arch length");
    r.need(arch_len, "arch text");
    const std::string arch_text(reinterpret_cast<const char*>(bytes.data()) + r.pos, arch_len);
    r.pos += arch_len;

    Rng scratch(0);
    Model model = build_model(parse_arch(arch_text), scratch);
    for (BatchNormLayer& bn : model.bn) {
        bn.epsilon = bn_eps;
        bn.momentum = bn_mom;
    }

    std::vector<Tensor*> blocks = persisted_tensors(model);
    const std::uint32_t count = r.u32("block count");
    if (count != blocks.size()) {
        throw CorruptError("checkpoint block count " + std::to_string(count) +
                           " does not match architecture (" + std::to_string(blocks.size()) +
                           " expected)");
    }
    for (Tensor* t : blocks) {
        const std::uint32_t n = r.u32("block length");
        if (n != t->size()) {
            throw CorruptError("checkpoint block length " + std::to_string(n) +
                               " does not match tensor size " + std::to_string(t->size()));
        }
        for (std::size_t i = 0; i < n; ++i) {
            t->data[i] = meta.high_precision ? r.f64("weight")
                                             : static_cast<double>(r.f32("weight"));
        }
    }
    if (r.pos != bytes.size()) {
        throw CorruptError("checkpoint has " + std::to_string(bytes.size() - r.pos) +
                           " trailing bytes");
    }
    return {std::move(model), meta};
}

std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw IoError("cannot open " + path.string());
    }
    return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(f)),
                                     std::istreambuf_iterator<char>());
}

void write_binary_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw IoError("cannot write " + path.string());
    }
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!f) {
        throw IoError("write failed for " + path.string());
    }
}

}  // namespace snet
