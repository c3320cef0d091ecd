#include "shallownet/arch.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "shallownet/csv.hpp"

namespace snet {

const char* family_name(Family f) {
    switch (f) {
        case Family::lenet: return "lenet";
        case Family::vgg16: return "vgg16";
        case Family::vgg16_enhanced: return "vgg16-enhanced";
    }
    return "?";
}

Family family_from_name(const std::string& name) {
    if (name == "lenet") return Family::lenet;
    if (name == "vgg16") return Family::vgg16;
    if (name == "vgg16-enhanced") return Family::vgg16_enhanced;
    throw ArchError("unknown family '" + name + "'");
}

LayerDesc LayerDesc::make_conv(std::size_t in, std::size_t out, std::size_t k, std::size_t pad) {
    LayerDesc l;
    l.kind = LayerKind::conv;
    l.in = in;
    l.out = out;
    l.kernel = k;
    l.padding = pad;
    return l;
}

LayerDesc LayerDesc::make_dense(std::size_t in, std::size_t out) {
    LayerDesc l;
    l.kind = LayerKind::dense;
    l.in = in;
    l.out = out;
    return l;
}

LayerDesc LayerDesc::make_flatten(std::size_t width) {
    LayerDesc l;
    l.kind = LayerKind::flatten;
    l.in = width;
    return l;
}

LayerDesc LayerDesc::make_batchnorm(std::size_t channels) {
    LayerDesc l;
    l.kind = LayerKind::batchnorm;
    l.in = channels;
    return l;
}

LayerDesc LayerDesc::make_relu() {
    LayerDesc l;
    l.kind = LayerKind::relu;
    return l;
}

LayerDesc LayerDesc::make_pool() {
    LayerDesc l;
    l.kind = LayerKind::pool;
    return l;
}

long long round_half_away(double x) {
    return static_cast<long long>(x >= 0.0 ? std::floor(x + 0.5) : std::ceil(x - 0.5));
}

ArchSpec build_lenet(std::size_t d1, double ratio, std::size_t d2_override) {
    if (d1 < 1) {
        throw ArchError("build_lenet: d1 must be >= 1");
    }
    if (ratio <= 0.0 && d2_override == 0) {
        throw ArchError("build_lenet: ratio must be positive");
    }
    long long d2ll = d2_override != 0 ? static_cast<long long>(d2_override)
                                      : round_half_away(ratio * static_cast<double>(d1));
    if (d2ll < 1) {
        throw ArchError("build_lenet: d2 rounds to " + std::to_string(d2ll) + ", need >= 1");
    }
    const std::size_t d2 = static_cast<std::size_t>(d2ll);

    ArchSpec spec;
    spec.family = Family::lenet;
    spec.d = d1;
    spec.constant = ratio;
    spec.layers = {
        LayerDesc::make_conv(3, d1, 5, 0),   // 32 -> 28
        LayerDesc::make_relu(),
        LayerDesc::make_pool(),              // 28 -> 14
        LayerDesc::make_conv(d1, d2, 5, 0),  // 14 -> 10
        LayerDesc::make_relu(),
        LayerDesc::make_pool(),              // 10 -> 5
        LayerDesc::make_flatten(25 * d2),
        LayerDesc::make_dense(25 * d2, 120),
        LayerDesc::make_relu(),
        LayerDesc::make_dense(120, 84),
        LayerDesc::make_relu(),
        LayerDesc::make_dense(84, 10),
    };
    validate_arch(spec);
    return spec;
}

namespace {

ArchSpec build_vgg(Family family, std::size_t d, double growth, std::size_t set5) {
    if (d < 1) {
        throw ArchError("build_vgg16: d must be >= 1");
    }
    std::array<std::size_t, 5> sets;
    for (std::size_t n = 0; n < 4; ++n) {
        long long s = round_half_away(static_cast<double>(d) * std::pow(growth, n));
        if (s < 1) {
            throw ArchError("build_vgg16: set " + std::to_string(n + 1) + " rounds to " +
                            std::to_string(s) + ", need >= 1");
        }
        sets[n] = static_cast<std::size_t>(s);
    }
    sets[4] = set5 != 0 ? set5 : sets[3];

    static constexpr std::size_t convs_per_set[5] = {2, 2, 3, 3, 3};

    ArchSpec spec;
    spec.family = family;
    spec.d = d;
    spec.constant = growth;
    std::size_t channels = 3;
    for (std::size_t n = 0; n < 5; ++n) {
        for (std::size_t j = 0; j < convs_per_set[n]; ++j) {
            spec.layers.push_back(LayerDesc::make_conv(channels, sets[n], 3, 1));
            spec.layers.push_back(LayerDesc::make_batchnorm(sets[n]));
            spec.layers.push_back(LayerDesc::make_relu());
            channels = sets[n];
        }
        spec.layers.push_back(LayerDesc::make_pool());
    }
    // five pools reduce 32x32 to 1x1, so the flattened width is set 5's count
    spec.layers.push_back(LayerDesc::make_flatten(sets[4]));
    spec.layers.push_back(LayerDesc::make_dense(sets[4], 4096));
    spec.layers.push_back(LayerDesc::make_relu());
    spec.layers.push_back(LayerDesc::make_dense(4096, 4096));
    spec.layers.push_back(LayerDesc::make_relu());
    spec.layers.push_back(LayerDesc::make_dense(4096, 10));
    validate_arch(spec);
    return spec;
}

}  // namespace

ArchSpec build_vgg16(std::size_t d, double growth) {
    if (growth <= 0.0) {
        throw ArchError("build_vgg16: growth must be positive");
    }
    return build_vgg(Family::vgg16, d, growth, 0);
}

ArchSpec build_vgg16_enhanced(std::size_t d) {
    return build_vgg(Family::vgg16_enhanced, d, 2.0, 16 * d);
}

void validate_arch(const ArchSpec& spec) {
    if (spec.input[1] != spec.input[2]) {
        throw ArchError("validate_arch: input must be square");
    }
    std::size_t channels = spec.input[0];
    std::size_t extent = spec.input[1];
    bool flat = false;
    std::size_t units = 0;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerDesc& l = spec.layers[i];
        const std::string where = "layer " + std::to_string(i);
        switch (l.kind) {
            case LayerKind::conv: {
                if (flat) throw ArchError(where + ": conv after flatten");
                if (l.in != channels)
                    throw ArchError(where + ": conv expects " + std::to_string(l.in) +
                                    " channels, has " + std::to_string(channels));
                long long out = static_cast<long long>(extent + 2 * l.padding) -
                                static_cast<long long>(l.kernel) + 1;
                if (l.out < 1 || l.kernel < 1 || out < 1)
                    throw ArchError(where + ": non-positive conv output");
                channels = l.out;
                extent = static_cast<std::size_t>(out);
                break;
            }
            case LayerKind::pool:
                if (flat) throw ArchError(where + ": pool after flatten");
                if (extent % 2 != 0) throw ArchError(where + ": pool on odd extent");
                extent /= 2;
                break;
            case LayerKind::batchnorm:
                if (flat) throw ArchError(where + ": batchnorm after flatten");
                if (l.in != channels) throw ArchError(where + ": batchnorm channel mismatch");
                break;
            case LayerKind::relu:
                break;
            case LayerKind::flatten:
                if (flat) throw ArchError(where + ": repeated flatten");
                if (l.in != channels * extent * extent)
                    throw ArchError(where + ": flatten width " + std::to_string(l.in) +
                                    " != " + std::to_string(channels * extent * extent));
                flat = true;
                units = l.in;
                break;
            case LayerKind::dense:
                if (!flat) throw ArchError(where + ": dense before flatten");
                if (l.in != units)
                    throw ArchError(where + ": dense expects " + std::to_string(l.in) +
                                    " units, has " + std::to_string(units));
                if (l.out < 1) throw ArchError(where + ": dense output must be >= 1");
                units = l.out;
                break;
        }
    }
    if (!flat || units == 0) {
        throw ArchError("validate_arch: network does not end in dense layers");
    }
}

std::size_t output_units(const ArchSpec& spec) {
    for (auto it = spec.layers.rbegin(); it != spec.layers.rend(); ++it) {
        if (it->kind == LayerKind::dense) {
            return it->out;
        }
    }
    throw ArchError("output_units: no dense layer");
}

ConservationReport conservation_report(const ArchSpec& spec) {
    ConservationReport report;
    std::size_t extent = spec.input[1];
    std::size_t depth = 0;
    bool in_block = false;
    for (const LayerDesc& l : spec.layers) {
        if (l.kind == LayerKind::conv) {
            extent = extent + 2 * l.padding - l.kernel + 1;
            depth = l.out;
            in_block = true;
        } else if (l.kind == LayerKind::pool) {
            const std::size_t pre = extent;
            extent /= 2;
            if (in_block) {
                ConservationBlock b;
                b.depth = depth;
                b.extent = spec.family == Family::lenet ? extent : pre;
                b.product = b.depth * b.extent;
                report.blocks.push_back(b);
                in_block = false;
            }
        }
    }
    if (report.blocks.empty()) {
        throw ArchError("conservation_report: no conv blocks");
    }
    double lo = static_cast<double>(report.blocks[0].product);
    double hi = lo;
    double sum = 0.0;
    for (const ConservationBlock& b : report.blocks) {
        const double p = static_cast<double>(b.product);
        lo = std::min(lo, p);
        hi = std::max(hi, p);
        sum += p;
    }
    report.deviation = (hi - lo) / (sum / static_cast<double>(report.blocks.size()));
    return report;
}

std::string serialize_arch(const ArchSpec& spec) {
    std::string out;
    out += "shallownet-arch v1\n";
    out += "family ";
    out += family_name(spec.family);
    out += "\n";
    out += "d " + std::to_string(spec.d) + "\n";
    out += "constant " + format_double(spec.constant) + "\n";
    out += "input " + std::to_string(spec.input[0]) + " " + std::to_string(spec.input[1]) + " " +
           std::to_string(spec.input[2]) + "\n";
    out += "layers " + std::to_string(spec.layers.size()) + "\n";
    for (const LayerDesc& l : spec.layers) {
        switch (l.kind) {
            case LayerKind::conv:
                out += "conv " + std::to_string(l.in) + " " + std::to_string(l.out) + " " +
                       std::to_string(l.kernel) + " " + std::to_string(l.padding) + "\n";
                break;
            case LayerKind::relu: out += "relu\n"; break;
            case LayerKind::pool: out += "pool\n"; break;
            case LayerKind::flatten: out += "flatten " + std::to_string(l.in) + "\n"; break;
            case LayerKind::dense:
                out += "dense " + std::to_string(l.in) + " " + std::to_string(l.out) + "\n";
                break;
            case LayerKind::batchnorm:
                out += "batchnorm " + std::to_string(l.in) + "\n";
                break;
        }
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

std::size_t parse_size(const std::string& tok, const char* what) {
    try {
        std::size_t pos = 0;
        long long v = std::stoll(tok, &pos);
        if (pos != tok.size() || v < 0) {
            throw std::invalid_argument(tok);
        }
        return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
        throw CorruptError(std::string("arch text: bad ") + what + " '" + tok + "'");
    }
}

}  // namespace

ArchSpec parse_arch(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    auto next_line = [&](const char* what) {
        if (!std::getline(in, line)) {
            throw CorruptError(std::string("arch text: missing ") + what);
        }
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        return split_ws(line);
    };

    if (next_line("header") != std::vector<std::string>{"shallownet-arch", "v1"}) {
        throw CorruptError("arch text: bad header, expected 'shallownet-arch v1'");
    }
    ArchSpec spec;
    auto fam = next_line("family");
    if (fam.size() != 2 || fam[0] != "family") throw CorruptError("arch text: bad family line");
    spec.family = family_from_name(fam[1]);
    auto d = next_line("d");
    if (d.size() != 2 || d[0] != "d") throw CorruptError("arch text: bad d line");
    spec.d = parse_size(d[1], "d");
    auto c = next_line("constant");
    if (c.size() != 2 || c[0] != "constant") throw CorruptError("arch text: bad constant line");
    spec.constant = parse_double(c[1]);
    auto inp = next_line("input");
    if (inp.size() != 4 || inp[0] != "input") throw CorruptError("arch text: bad input line");
    for (std::size_t i = 0; i < 3; ++i) {
        spec.input[i] = parse_size(inp[i + 1], "input extent");
    }
    auto n = next_line("layers");
    if (n.size() != 2 || n[0] != "layers") throw CorruptError("arch text: bad layers line");
    const std::size_t count = parse_size(n[1], "layer count");

    for (std::size_t i = 0; i < count; ++i) {
        auto tok = next_line("layer entry");
        if (tok.empty()) throw CorruptError("arch text: empty layer entry");
        if (tok[0] == "conv" && tok.size() == 5) {
            spec.layers.push_back(LayerDesc::make_conv(parse_size(tok[1], "conv in"),
                                                       parse_size(tok[2], "conv out"),
                                                       parse_size(tok[3], "conv kernel"),
                                                       parse_size(tok[4], "conv padding")));
        } else if (tok[0] == "relu" && tok.size() == 1) {
            spec.layers.push_back(LayerDesc::make_relu());
        } else if (tok[0] == "pool" && tok.size() == 1) {
            spec.layers.push_back(LayerDesc::make_pool());
        } else if (tok[0] == "flatten" && tok.size() == 2) {
            spec.layers.push_back(LayerDesc::make_flatten(parse_size(tok[1], "flatten width")));
        } else if (tok[0] == "dense" && tok.size() == 3) {
            spec.layers.push_back(LayerDesc::make_dense(parse_size(tok[1], "dense in"),
                                                        parse_size(tok[2], "dense out")));
        } else if (tok[0] == "batchnorm" && tok.size() == 2) {
            spec.layers.push_back(
                LayerDesc::make_batchnorm(parse_size(tok[1], "batchnorm channels")));
        } else {
            throw CorruptError("arch text: bad layer entry '" + line + "'");
        }
    }
    validate_arch(spec);
    return spec;
}

}  // namespace snet
