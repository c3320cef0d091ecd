// Command-line front end: architecture inspection, complexity tables,
// power-law fits, table regeneration from the bundled raw data, and
// CIFAR-10 training runs.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "shallownet/arch.hpp"
#include "shallownet/complexity.hpp"
#include "shallownet/csv.hpp"
#include "shallownet/data.hpp"
#include "shallownet/errors.hpp"
#include "shallownet/scaling.hpp"
#include "shallownet/training.hpp"

namespace {

using namespace snet;

struct ArchOpts {
    std::string family;
    std::size_t d = 0;
    std::size_t d2 = 0;        // lenet only: explicit second conv depth
    double constant = 0.0;     // 0 means the family default
};

void add_arch_flags(CLI::App* cmd, ArchOpts& opts) {
    cmd->add_option("family", opts.family, "lenet, vgg16, or vgg16-enhanced")->required();
    cmd->add_option("--d,--d1", opts.d, "family depth parameter (first conv depth for lenet)")
        ->required();
    cmd->add_option("--d2", opts.d2, "explicit second conv depth (lenet only)");
    cmd->add_option("--constant,--ratio,--growth", opts.constant,
                    "architecture constant: lenet d2/d1 ratio or vgg set growth factor");
}

ArchSpec build_from_opts(const ArchOpts& opts) {
    const Family family = family_from_name(opts.family);
    if (opts.d2 != 0 && family != Family::lenet) {
        throw CLI::ValidationError("--d2 only applies to lenet");
    }
    switch (family) {
        case Family::lenet:
            return build_lenet(opts.d, opts.constant > 0.0 ? opts.constant : 8.0 / 3.0, opts.d2);
        case Family::vgg16:
            return build_vgg16(opts.d, opts.constant > 0.0 ? opts.constant : 2.0);
        case Family::vgg16_enhanced:
            if (opts.constant > 0.0 && opts.constant != 2.0) {
                throw ArchError("vgg16-enhanced is defined only for growth 2");
            }
            return build_vgg16_enhanced(opts.d);
    }
    throw ArchError("unhandled family");
}

void write_or_print(const std::string& path, const std::string& text) {
    if (path.empty()) {
        std::cout << text;
    } else {
        const std::filesystem::path parent = std::filesystem::path(path).parent_path();
        if (!parent.empty()) {
            std::filesystem::create_directories(parent);
        }
        write_text_file(path, text);
    }
}

std::string layer_line(std::size_t index, const LayerDesc& l) {
    std::string out = std::to_string(index) + "  ";
    switch (l.kind) {
        case LayerKind::conv:
            out += "conv " + std::to_string(l.in) + " -> " + std::to_string(l.out) + ", " +
                   std::to_string(l.kernel) + "x" + std::to_string(l.kernel) + ", pad " +
                   std::to_string(l.padding);
            break;
        case LayerKind::batchnorm: out += "batchnorm " + std::to_string(l.in); break;
        case LayerKind::relu: out += "relu"; break;
        case LayerKind::pool: out += "maxpool 2x2"; break;
        case LayerKind::flatten: out += "flatten -> " + std::to_string(l.in); break;
        case LayerKind::dense:
            out += "dense " + std::to_string(l.in) + " -> " + std::to_string(l.out);
            break;
    }
    return out;
}

int run_arch(const ArchOpts& opts, const std::string& out_path) {
    const ArchSpec spec = build_from_opts(opts);
    std::cout << "family " << family_name(spec.family) << "\n";
    std::cout << "d " << spec.d << "\n";
    std::cout << "constant " << format_double(spec.constant) << "\n";
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        std::cout << layer_line(i + 1, spec.layers[i]) << "\n";
    }
    const ConservationReport report = conservation_report(spec);
    std::cout << "conservation blocks (depth x extent):\n";
    for (const ConservationBlock& b : report.blocks) {
        std::cout << "  " << b.depth << " x " << b.extent << " = " << b.product << "\n";
    }
    std::cout << "deviation " << format_double(report.deviation * 100.0) << "%\n";
    if (!out_path.empty()) {
        write_or_print(out_path, serialize_arch(spec));
        std::cout << "wrote " << out_path << "\n";
    }
    return 0;
}

int run_madds(const ArchOpts& opts, const std::string& mode_name, const std::string& out_path) {
    const ArchSpec spec = build_from_opts(opts);
    MaddMode mode = MaddMode::forward;
    if (mode_name == "forward+backward") {
        mode = MaddMode::forward_plus_backward;
    } else if (mode_name != "forward") {
        throw CLI::ValidationError("--mode must be forward or forward+backward");
    }
    const MAddReport report = madds(spec, mode);
    std::vector<std::vector<std::string>> rows;
    for (const MaddEntry& e : report.per_layer) {
        rows.push_back({e.label, std::to_string(e.madds)});
    }
    rows.push_back({"total", std::to_string(report.total)});
    write_or_print(out_path, emit_table({"layer", "madds"}, rows));
    return 0;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

CsvTable table_from_text(const std::string& text, const std::string& origin) {
    const auto all = parse_csv(text);
    if (all.empty()) {
        throw FormatError(origin + ": empty CSV");
    }
    CsvTable t;
    t.header = all.front();
    t.rows.assign(all.begin() + 1, all.end());
    return t;
}

std::vector<ScalingPoint> points_from_csv(const std::string& path) {
    const CsvTable table = table_from_text(read_text_file(path), path);
    auto col = [&](const std::string& name) -> std::ptrdiff_t {
        for (std::size_t i = 0; i < table.header.size(); ++i) {
            if (table.header[i] == name) {
                return static_cast<std::ptrdiff_t>(i);
            }
        }
        return -1;
    };
    const std::ptrdiff_t dcol = col("d");
    const std::ptrdiff_t ecol = col("epsilon");
    const std::ptrdiff_t scol = col("std");
    if (dcol < 0 || ecol < 0) {
        throw FormatError(path + ": need 'd' and 'epsilon' columns");
    }
    std::vector<ScalingPoint> points;
    for (const auto& row : table.rows) {
        ScalingPoint p;
        p.d = parse_double(row[static_cast<std::size_t>(dcol)]);
        p.epsilon = parse_double(row[static_cast<std::size_t>(ecol)]);
        if (scol >= 0 && !row[static_cast<std::size_t>(scol)].empty()) {
            p.std = parse_double(row[static_cast<std::size_t>(scol)]);
        }
        points.push_back(p);
    }
    return points;
}

int run_fit(const std::string& input, bool weighted, const std::string& out_path) {
    const PowerLawFit fit = fit_power_law(points_from_csv(input), weighted);
    std::vector<std::vector<std::string>> rows = {
        {"A", "", format_double(fit.A)},
        {"rho", "", format_double(fit.rho)},
        {"residual", "", format_double(fit.residual)},
    };
    write_or_print(out_path, emit_table({"quantity", "input", "value"}, rows));
    return 0;
}

int run_extrapolate(const std::string& input, bool weighted, const std::vector<double>& at_d,
                    const std::vector<double>& at_error, const std::string& out_path) {
    if (at_d.empty() && at_error.empty()) {
        throw CLI::ValidationError("give at least one --at-d or --at-error");
    }
    const PowerLawFit fit = fit_power_law(points_from_csv(input), weighted);
    std::vector<std::vector<std::string>> rows = {
        {"A", "", format_double(fit.A)},
        {"rho", "", format_double(fit.rho)},
    };
    for (double d : at_d) {
        rows.push_back({"epsilon_at_d", format_double(d), format_double(extrapolate_error(fit, d))});
    }
    for (double eps : at_error) {
        rows.push_back({"d_at_epsilon", format_double(eps), format_double(invert_error(fit, eps))});
    }
    write_or_print(out_path, emit_table({"quantity", "input", "value"}, rows));
    return 0;
}

// ---- reproduce-tables ------------------------------------------------

std::filesystem::path table_path(const std::string& data_dir, const char* name) {
    const std::filesystem::path p = std::filesystem::path(data_dir) / name;
    if (!std::filesystem::exists(p)) {
        throw IoError("missing raw-data table " + p.string() +
                      "; pass --data-dir pointing at the repository's data/ directory");
    }
    return p;
}

CsvTable load_table(const std::string& data_dir, const char* name) {
    return table_from_text(read_text_file(table_path(data_dir, name).string()), name);
}

double cell(const CsvTable& t, std::size_t row, const std::string& col) {
    for (std::size_t i = 0; i < t.header.size(); ++i) {
        if (t.header[i] == col) {
            return parse_double(t.rows[row][i]);
        }
    }
    throw FormatError("missing column '" + col + "'");
}

std::vector<ScalingPoint> table_points(const CsvTable& t) {
    std::vector<ScalingPoint> points;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        points.push_back({cell(t, r, "d"), cell(t, r, "epsilon"), cell(t, r, "std")});
    }
    return points;
}

// LeNet scaling points with the two-architecture depths collapsed onto
// the d2 = (8/3) d1 line by log-log interpolation.
std::vector<ScalingPoint> composite_lenet_points(const CsvTable& raw) {
    std::vector<ScalingPoint> out;
    std::size_t r = 0;
    while (r < raw.rows.size()) {
        const double d1 = cell(raw, r, "d1");
        if (r + 1 < raw.rows.size() && cell(raw, r + 1, "d1") == d1) {
            const ScalingPoint lo{cell(raw, r, "d2"), cell(raw, r, "epsilon"), 0.0};
            const ScalingPoint hi{cell(raw, r + 1, "d2"), cell(raw, r + 1, "epsilon"), 0.0};
            out.push_back({d1, log_interpolate((8.0 / 3.0) * d1, lo, hi), 0.0});
            r += 2;
        } else {
            out.push_back({d1, cell(raw, r, "epsilon"), 0.0});
            r += 1;
        }
    }
    return out;
}

struct Fig3Pipeline {
    PowerLawFit lenet_fit;
    PowerLawFit vgg_fit;
    QuadFit lenet_quad;
    QuadFit vgg_quad;
};

Fig3Pipeline fig3_pipeline(const std::string& data_dir) {
    Fig3Pipeline p;
    p.lenet_fit = fit_power_law(composite_lenet_points(load_table(data_dir, "fig1_lenet_raw.csv")));
    p.vgg_fit = fit_power_law(table_points(load_table(data_dir, "fig2_vgg.csv")));

    std::vector<std::pair<double, double>> lenet_curve;
    for (std::size_t d : {6, 19, 44, 86, 164}) {
        lenet_curve.emplace_back(static_cast<double>(d),
                                 static_cast<double>(madds(build_lenet(d)).total));
    }
    p.lenet_quad = quad_fit(lenet_curve);

    std::vector<std::pair<double, double>> vgg_curve;
    for (std::size_t d : {4, 8, 16, 32, 64}) {
        vgg_curve.emplace_back(static_cast<double>(d),
                               static_cast<double>(madds(build_vgg16(d)).total));
    }
    p.vgg_quad = quad_fit(vgg_curve);
    return p;
}

std::string rel_dev(double computed, double reference) {
    return format_double(std::abs(computed - reference) / std::abs(reference));
}

int reproduce_fig3a(const std::string& data_dir, const std::string& out_path) {
    std::vector<std::vector<std::string>> rows;
    const auto emit_family = [&](const char* file, const char* fam, auto build) {
        const CsvTable t = load_table(data_dir, file);
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            const auto d = static_cast<std::size_t>(cell(t, r, "d"));
            const auto published = static_cast<std::uint64_t>(cell(t, r, "madds"));
            const std::uint64_t computed = madds(build(d)).total;
            rows.push_back({fam, std::to_string(d), std::to_string(computed),
                            std::to_string(published),
                            rel_dev(static_cast<double>(computed), static_cast<double>(published))});
        }
    };
    emit_family("fig3a_lenet.csv", "lenet", [](std::size_t d) { return build_lenet(d); });
    emit_family("fig3a_vgg.csv", "vgg16", [](std::size_t d) { return build_vgg16(d); });
    write_or_print(out_path, emit_table({"family", "d", "computed", "published", "rel_dev"}, rows));
    return 0;
}

int reproduce_fig3b(const std::string& data_dir, const std::string& out_path) {
    const Fig3Pipeline p = fig3_pipeline(data_dir);
    const CsvTable t = load_table(data_dir, "fig3b.csv");
    std::vector<std::vector<std::string>> rows;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const double eps = cell(t, r, "epsilon");
        const double lenet = complexity_at_error(p.lenet_fit, p.lenet_quad, eps) / 1e9;
        const double vgg = complexity_at_error(p.vgg_fit, p.vgg_quad, eps) / 1e9;
        const double lenet_published = cell(t, r, "lenet_gmadd");
        const double vgg_published = cell(t, r, "vgg_gmadd");
        rows.push_back({format_double(eps), format_double(lenet), format_double(lenet_published),
                        rel_dev(lenet, lenet_published), format_double(vgg),
                        format_double(vgg_published), rel_dev(vgg, vgg_published)});
    }
    write_or_print(out_path,
                   emit_table({"epsilon", "lenet_gmadd", "lenet_published", "lenet_rel_dev",
                               "vgg_gmadd", "vgg_published", "vgg_rel_dev"},
                              rows));
    return 0;
}

int reproduce_fig3c(const std::string& data_dir, const std::string& out_path) {
    const Fig3Pipeline p = fig3_pipeline(data_dir);
    const CsvTable t = load_table(data_dir, "fig3c.csv");
    std::vector<std::vector<std::string>> rows;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const double eps = cell(t, r, "epsilon");
        const double ratio =
            complexity_ratio(p.lenet_fit, p.lenet_quad, p.vgg_fit, p.vgg_quad, eps);
        const double published = cell(t, r, "ratio");
        rows.push_back({format_double(eps), format_double(ratio), format_double(published),
                        format_double(std::abs(ratio - published))});
    }
    write_or_print(out_path, emit_table({"epsilon", "computed", "published", "abs_dev"}, rows));
    return 0;
}

int reproduce_fits(const std::string& data_dir, const std::string& out_path) {
    struct Entry {
        const char* label;
        const char* file;
        double rho_reference;  // rounded value quoted alongside the raw tables
    };
    const Entry entries[] = {
        {"lenet_main", "fig1_lenet.csv", 0.4},
        {"vgg_main", "fig2_vgg.csv", 0.4},
        {"lenet_c4_3", "fig4a_lenet_c4_3.csv", 0.4},
        {"lenet_c16_3", "fig4a_lenet_c16_3.csv", 0.35},
        {"vgg_c3_2", "fig4b_vgg_c3_2.csv", 0.4},
        {"vgg_c5_2", "fig4b_vgg_c5_2.csv", 0.32},
    };
    std::vector<std::vector<std::string>> rows;
    for (const Entry& e : entries) {
        const PowerLawFit fit = fit_power_law(table_points(load_table(data_dir, e.file)));
        rows.push_back({e.label, format_double(fit.A), format_double(fit.rho),
                        format_double(e.rho_reference),
                        format_double(std::abs(fit.rho - e.rho_reference))});
    }
    write_or_print(out_path, emit_table({"dataset", "A", "rho", "rho_reference", "abs_dev"}, rows));
    return 0;
}

// ---- train -----------------------------------------------------------

struct TrainOpts {
    ArchOpts arch;
    std::string arch_file;
    std::string config_file;
    std::string variant = "main";
    std::string data_path;
    std::string out_dir = "runs";
    std::size_t epochs = 0;     // 0 keeps the config's count
    std::size_t batch = 0;
    std::size_t holdout = 0;
    bool holdout_set = false;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::size_t n_seeds = 1;
    bool no_augment = false;
    bool f64 = false;
    bool deterministic = false;
};

std::string trace_csv(const RunResult& result, bool with_val) {
    std::vector<std::string> header = {"seed", "epoch", "train_loss", "test_error"};
    if (with_val) {
        header.push_back("val_error");
    }
    std::vector<std::vector<std::string>> rows;
    for (const SeedRun& run : result.runs) {
        for (const EpochTrace& t : run.trace) {
            std::vector<std::string> row = {std::to_string(run.seed), std::to_string(t.epoch),
                                            format_double(t.train_loss),
                                            format_double(t.test_error)};
            if (with_val) {
                row.push_back(t.val_error ? format_double(*t.val_error) : std::string());
            }
            rows.push_back(std::move(row));
        }
    }
    return emit_table(header, rows);
}

std::string summary_csv(const RunResult& result) {
    std::vector<std::vector<std::string>> rows;
    for (const SeedRun& run : result.runs) {
        rows.push_back({std::to_string(run.seed), format_double(run.final_error), ""});
    }
    rows.push_back({"aggregate", format_double(result.mean_error),
                    result.std_error ? format_double(*result.std_error) : std::string()});
    return emit_table({"seed", "final_error", "std"}, rows);
}

int run_train(const TrainOpts& opts) {
    ArchSpec spec;
    if (!opts.arch_file.empty()) {
        spec = parse_arch(read_text_file(opts.arch_file));
    } else {
        spec = build_from_opts(opts.arch);
    }

    TrainConfig config;
    if (!opts.config_file.empty()) {
        config = parse_config(read_text_file(opts.config_file));
    } else {
        config = preset(spec.family, spec.d, variant_from_name(opts.variant));
    }
    if (opts.epochs > 0) {
        config = with_epochs(config, opts.epochs);
    }
    if (opts.batch > 0) {
        config.batch_size = opts.batch;
    }
    if (opts.holdout_set) {
        config.holdout = opts.holdout;
    }
    if (opts.seed_set) {
        config.seed = opts.seed;
    }
    if (opts.no_augment) {
        config.augment = false;
    }

    const std::filesystem::path root = resolve_data_root(opts.data_path);
    const auto [train_set, test_set] = load_cifar10(root);

    std::vector<std::uint64_t> seeds;
    for (std::size_t i = 0; i < opts.n_seeds; ++i) {
        seeds.push_back(config.seed + i);
    }

    const RunResult result = train(spec, config, train_set, test_set, seeds);

    std::filesystem::create_directories(opts.out_dir);
    const std::filesystem::path dir(opts.out_dir);
    write_text_file((dir / "results.csv").string(), trace_csv(result, config.holdout > 0));
    write_text_file((dir / "summary.csv").string(), summary_csv(result));
    write_text_file((dir / "config.txt").string(), serialize_config(config));
    write_text_file((dir / "arch.txt").string(), serialize_arch(spec));
    for (const SeedRun& run : result.runs) {
        CheckpointMeta meta;
        meta.seed = run.seed;
        meta.epoch = static_cast<std::uint32_t>(config.epochs);
        meta.high_precision = opts.f64;
        write_binary_file(dir / ("seed" + std::to_string(run.seed) + ".ckpt"),
                          save_checkpoint(run.model, meta));
    }

    std::cout << "mean_error " << format_double(result.mean_error) << "\n";
    if (result.std_error) {
        std::cout << "std_error " << format_double(*result.std_error) << "\n";
    }
    std::cout << "wrote " << (dir / "results.csv").string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Architecture families under the depth-size conservation law: "
                 "multiply-add budgets, error scaling fits, and CIFAR-10 training."};
    app.require_subcommand(1);

    ArchOpts arch_opts;
    std::string arch_out;
    CLI::App* arch_cmd = app.add_subcommand("arch", "Build an architecture and audit conservation");
    add_arch_flags(arch_cmd, arch_opts);
    arch_cmd->add_option("--out", arch_out, "write the serialized architecture here");

    ArchOpts madd_opts;
    std::string madd_mode = "forward";
    std::string madd_out;
    CLI::App* madd_cmd = app.add_subcommand("madds", "Per-layer multiply-add counts");
    add_arch_flags(madd_cmd, madd_opts);
    madd_cmd->add_option("--mode", madd_mode, "forward or forward+backward");
    madd_cmd->add_option("--out", madd_out, "write the CSV here instead of stdout");

    std::string fit_input, fit_out;
    bool fit_weighted = false;
    CLI::App* fit_cmd = app.add_subcommand("fit", "Fit epsilon = A * d^-rho to a CSV of (d, epsilon[, std])");
    fit_cmd->add_option("--input", fit_input, "CSV with d and epsilon columns")->required();
    fit_cmd->add_flag("--weighted", fit_weighted, "weight points by (epsilon/std)^2");
    fit_cmd->add_option("--out", fit_out, "write the result CSV here");

    std::string ex_input, ex_out;
    bool ex_weighted = false;
    std::vector<double> ex_at_d, ex_at_error;
    CLI::App* ex_cmd = app.add_subcommand("extrapolate", "Fit, then predict error at d or invert d at error");
    ex_cmd->add_option("--input", ex_input, "CSV with d and epsilon columns")->required();
    ex_cmd->add_flag("--weighted", ex_weighted, "weight points by (epsilon/std)^2");
    ex_cmd->add_option("--at-d", ex_at_d, "predict epsilon at these depths");
    ex_cmd->add_option("--at-error", ex_at_error, "solve for the depth reaching these errors");
    ex_cmd->add_option("--out", ex_out, "write the result CSV here");

    std::string which, tables_dir = "data", tables_out;
    CLI::App* rep_cmd = app.add_subcommand(
        "reproduce-tables", "Recompute a published table and diff it against the bundled copy");
    rep_cmd->add_option("which", which, "fig3a, fig3b, fig3c, or fits")->required();
    rep_cmd->add_option("--data-dir", tables_dir, "directory with the bundled raw-data CSVs");
    rep_cmd->add_option("--out", tables_out, "write the comparison CSV here");

    TrainOpts train_opts;
    CLI::App* train_cmd = app.add_subcommand("train", "Train an architecture on CIFAR-10");
    train_cmd->add_option("--arch", train_opts.arch_file, "serialized architecture file");
    train_cmd->add_option("--family", train_opts.arch.family, "lenet, vgg16, or vgg16-enhanced");
    train_cmd->add_option("--d,--d1", train_opts.arch.d, "family depth parameter");
    train_cmd->add_option("--d2", train_opts.arch.d2, "explicit second conv depth (lenet only)");
    train_cmd->add_option("--constant,--ratio,--growth", train_opts.arch.constant,
                          "architecture constant");
    train_cmd->add_option("--config", train_opts.config_file, "training config file (else preset)");
    train_cmd->add_option("--variant", train_opts.variant, "preset variant: main, low, or high");
    train_cmd->add_option("--epochs", train_opts.epochs, "override the epoch count");
    train_cmd->add_option("--batch", train_opts.batch, "override the batch size");
    train_cmd->add_option("--holdout", train_opts.holdout, "hold out trailing training images")
        ->each([&](const std::string&) { train_opts.holdout_set = true; });
    train_cmd->add_option("--seed", train_opts.seed, "base seed")
        ->each([&](const std::string&) { train_opts.seed_set = true; });
    train_cmd->add_option("--seeds", train_opts.n_seeds, "number of consecutive seeds to run");
    train_cmd->add_option("--data", train_opts.data_path,
                          "CIFAR-10 root (else the SHALLOWNET_DATA environment variable)");
    train_cmd->add_option("--out-dir", train_opts.out_dir, "directory for results and checkpoints");
    train_cmd->add_flag("--no-augment", train_opts.no_augment, "disable flip/translate augmentation");
    train_cmd->add_flag("--f64", train_opts.f64, "store checkpoints in 64-bit precision");
    train_cmd->add_flag("--deterministic", train_opts.deterministic,
                        "single-threaded bit-reproducible execution (always on; flag documents intent)");

    std::string preset_family, preset_variant = "main", preset_out;
    std::size_t preset_d = 0;
    CLI::App* preset_cmd = app.add_subcommand("preset", "Print the tuned training config");
    preset_cmd->add_option("family", preset_family, "lenet, vgg16, or vgg16-enhanced")->required();
    preset_cmd->add_option("--d,--d1", preset_d, "family depth parameter")->required();
    preset_cmd->add_option("--variant", preset_variant, "main, low, or high");
    preset_cmd->add_option("--out", preset_out, "write the config here instead of stdout");

    try {
        app.parse(argc, argv);
        if (arch_cmd->parsed()) return run_arch(arch_opts, arch_out);
        if (madd_cmd->parsed()) return run_madds(madd_opts, madd_mode, madd_out);
        if (fit_cmd->parsed()) return run_fit(fit_input, fit_weighted, fit_out);
        if (ex_cmd->parsed()) {
            return run_extrapolate(ex_input, ex_weighted, ex_at_d, ex_at_error, ex_out);
        }
        if (rep_cmd->parsed()) {
            if (which == "fig3a") return reproduce_fig3a(tables_dir, tables_out);
            if (which == "fig3b") return reproduce_fig3b(tables_dir, tables_out);
            if (which == "fig3c") return reproduce_fig3c(tables_dir, tables_out);
            if (which == "fits") return reproduce_fits(tables_dir, tables_out);
            std::cerr << "unknown table '" << which << "' (expected fig3a, fig3b, fig3c, fits)\n";
            return 1;
        }
        if (train_cmd->parsed()) return run_train(train_opts);
        if (preset_cmd->parsed()) {
            const TrainConfig config =
                preset(family_from_name(preset_family), preset_d, variant_from_name(preset_variant));
            write_or_print(preset_out, serialize_config(config));
            return 0;
        }
        return 1;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const ArchError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const DivergedError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
