// streamnet: train, sweep, analyze, plot and slice-preview front end.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "streamnet/analysis.hpp"
#include "streamnet/config.hpp"
#include "streamnet/data_io.hpp"
#include "streamnet/plot.hpp"
#include "streamnet/training.hpp"

namespace fs = std::filesystem;
using namespace streamnet;

namespace {

constexpr int kOk = 0;
constexpr int kRuntimeFailure = 1;
constexpr int kConfigError = 2;

struct ConfigArgs {
    std::string path;
    std::vector<std::string> overrides;
};

void add_config_options(CLI::App* cmd, ConfigArgs& args) {
    cmd->add_option("--config,-c", args.path, "key = value config file");
    cmd->add_option("--set,-s", args.overrides, "override a key, e.g. --set noise_ratio=0.5")->allow_extra_args(false);
}

RunConfig resolve_config(const ConfigArgs& args) {
    RunConfig cfg = args.path.empty() ? RunConfig{} : load_run_config(args.path);
    apply_overrides(cfg, args.overrides);
    cfg.validate();
    return cfg;
}

void echo_config(const RunConfig& cfg) {
    fs::create_directories(cfg.output_dir);
    write_file_atomic(cfg.output_dir / "config.txt", "# effective configuration\n" + cfg.to_text());
}

std::string pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f%%", v * 100.0);
    return buf;
}

int cmd_train(const ConfigArgs& args) {
    const RunConfig cfg = resolve_config(args);
    ExperimentConfig exp = cfg.experiment();
    const auto [train_set, test_set] = load_datasets(cfg);
    echo_config(cfg);
    std::cerr << "training " << exp.file_stem() << " (" << train_set.size() << " train / " << test_set.size()
              << " test)\n";
    TrainHooks hooks;
    hooks.on_epoch = [&](const TrainingProgress& p, const Network&, const AdamState&) {
        const LogRow& r = p.logs.front().rows.back();
        std::cerr << "epoch " << p.epochs_completed << "/" << exp.epochs << "  loss " << format_double(r.train_loss)
                  << "  clean " << pct(r.clean_acc) << "  noisy " << pct(r.noisy_acc) << "\n";
    };
    TrainResult res = train(exp, train_set, test_set, hooks);
    const TrainingLog& log = res.logs.front();
    const fs::path csv = cfg.output_dir / (exp.file_stem() + ".csv");
    const fs::path ckpt = cfg.output_dir / (exp.file_stem() + ".ckpt");
    write_file_atomic(csv, log_to_csv(log));
    save_checkpoint(ckpt, res.network, &res.adam,
                    CheckpointMeta{exp.seed, exp.fingerprint(), TrainingProgress{exp.epochs, {log}}});
    const LogRow& last = log.rows.back();
    std::cout << "final clean_acc " << format_double(last.clean_acc) << " noisy_acc " << format_double(last.noisy_acc)
              << " (ratio " << format_double(exp.noise_ratio) << ")\n"
              << "log " << csv.string() << "\ncheckpoint " << ckpt.string() << "\n";
    return kOk;
}

int cmd_sweep(const ConfigArgs& args, bool dry_run, bool fresh) {
    const RunConfig cfg = resolve_config(args);
    const auto cells = cfg.sweep_cells();
    if (dry_run) {
        for (const auto& c : cells) std::cout << c.file_stem() << "\n";
        std::cout << cells.size() << " cells\n";
        return kOk;
    }
    const auto [train_set, test_set] = load_datasets(cfg);
    echo_config(cfg);
    SweepOptions opts;
    opts.out_dir = cfg.output_dir;
    opts.workers = cfg.resolved_workers();
    opts.resume = !fresh;
    opts.progress = [](const std::string& msg) { std::cerr << msg << "\n"; };
    const auto results = sweep(cells, train_set, test_set, opts);
    std::size_t failed = 0;
    for (const auto& r : results) {
        if (!r.ok()) {
            ++failed;
            std::cerr << "cell " << r.config.file_stem() << " failed: " << r.error << "\n";
        }
    }
    std::cout << results.size() - failed << "/" << results.size() << " cells ok; summary "
              << (cfg.output_dir / "summary.csv").string() << "\n";
    return failed == 0 ? kOk : kRuntimeFailure;
}

std::string safe_name(std::string s) {
    for (char& c : s)
        if (c == '/' || c == ':' || c == ' ' || c == '\\') c = '_';
    return s;
}

int cmd_analyze(const std::vector<std::string>& checkpoints, const std::vector<std::string>& tags, std::size_t bins,
                double alpha, const std::string& out_dir) {
    if (checkpoints.empty()) throw ConfigError("", "analyze needs at least one checkpoint");
    if (!tags.empty() && tags.size() != checkpoints.size()) {
        throw ConfigError("", "--tag must be given once per checkpoint");
    }
    if (bins < 2) throw ConfigError("bins", "must be at least 2");
    if (!(alpha >= 0.0)) throw ConfigError("alpha", "must be non-negative");
    std::vector<Network> nets;
    std::vector<std::string> names;
    for (std::size_t i = 0; i < checkpoints.size(); ++i) {
        nets.push_back(load_checkpoint(checkpoints[i]).network);
        names.push_back(tags.empty() ? fs::path(checkpoints[i]).stem().string() : tags[i]);
    }
    std::vector<std::pair<std::string, const Network*>> list;
    for (std::size_t i = 0; i < nets.size(); ++i) list.emplace_back(names[i], &nets[i]);
    DiversityOptions opts;
    opts.bins = bins;
    opts.alpha = alpha;
    const KLReport report = diversity_report(list, opts);
    const fs::path out = out_dir;
    fs::create_directories(out);
    write_file_atomic(out / "kl_report.csv", kl_report_csv(report));
    for (const auto& [key, h] : report.histograms) {
        write_file_atomic(out / ("hist_" + safe_name(key) + ".csv"), histogram_csv(h));
    }
    for (const KLRow& r : report.rows) {
        if (r.channel.rfind("stream", 0) == 0) continue;
        std::cout << r.tag << " " << r.channel << " kl " << format_double(r.kl) << " (" << r.weights << " weights)\n";
    }
    std::cout << "report " << (out / "kl_report.csv").string() << "\n";
    return kOk;
}

std::vector<std::string> read_lines(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

BarSeries read_histogram_csv(const fs::path& path) {
    const auto lines = read_lines(path);
    BarSeries b;
    b.label = path.stem().string();
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        std::stringstream ss(lines[i]);
        std::string f;
        std::vector<std::string> fields;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        if (fields.size() != 4) {
            throw Error(path.string() + ": line " + std::to_string(i + 1) + ": expected 4 fields, found " +
                        std::to_string(fields.size()));
        }
        try {
            if (b.edges.empty()) b.edges.push_back(parse_double(fields[1]));
            b.edges.push_back(parse_double(fields[2]));
            b.counts.push_back(parse_double(fields[3]));
        } catch (const Error& e) {
            throw Error(path.string() + ": line " + std::to_string(i + 1) + ": " + e.what());
        }
    }
    return b;
}

int cmd_plot(const std::vector<std::string>& csvs, const std::string& out, const std::string& column,
             const std::string& title) {
    if (csvs.empty()) throw ConfigError("", "plot needs at least one CSV; nothing written");
    LogColumn col = LogColumn::noisy_acc;
    if (column == "clean_acc") {
        col = LogColumn::clean_acc;
    } else if (column == "train_loss") {
        col = LogColumn::train_loss;
    } else if (column != "noisy_acc") {
        throw ConfigError("column", "expected noisy_acc, clean_acc or train_loss");
    }
    const auto first = read_lines(csvs.front());
    const bool histograms = !first.empty() && first.front() == "bin,lo,hi,count";
    std::string svg;
    ChartOptions opts;
    opts.title = title;
    if (histograms) {
        std::vector<BarSeries> panels;
        for (const auto& p : csvs) panels.push_back(read_histogram_csv(p));
        opts.x_label = "weight";
        svg = histogram_svg(panels, opts);
    } else {
        std::vector<Series> series;
        for (const auto& p : csvs) {
            std::ifstream in(p);
            if (!in) throw Error("cannot open '" + p + "'");
            TrainingLog log;
            try {
                log = read_log_csv(in);
            } catch (const Error& e) {
                throw Error(p + ": " + e.what());
            }
            Series s;
            s.label = tag_from_stem(fs::path(p).stem().string());
            for (const LogRow& r : log.rows) {
                const double y = col == LogColumn::noisy_acc   ? r.noisy_acc
                                 : col == LogColumn::clean_acc ? r.clean_acc
                                                               : r.train_loss;
                s.points.emplace_back(r.epoch, y);
            }
            series.push_back(std::move(s));
        }
        opts.y_label = column;
        svg = line_chart_svg(series, opts);
    }
    write_file_atomic(out, svg);
    std::cout << "wrote " << out << "\n";
    return kOk;
}

int cmd_slice_preview(const std::string& image, std::size_t synthetic_index, std::size_t n_slices,
                      std::vector<double> ratios, std::uint64_t seed, const std::string& out_dir) {
    Tensor img;
    if (!image.empty()) {
        img = read_ppm(image);
    } else {
        SyntheticSpec s;
        s.train_per_class = synthetic_index / s.n_classes + 1;
        s.test_per_class = 1;
        img = generate_synthetic(s).first.images.batch_slice(synthetic_index, 1);
    }
    if (n_slices == 0) throw ConfigError("slices", "must be at least 1");
    for (double r : ratios)
        if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("noise", "ratios must lie in [0, 1]");
    const fs::path out = out_dir;
    fs::create_directories(out);
    write_ppm(out / "input.ppm", img);
    const SliceSpec spec = make_slice_spec(n_slices);
    const auto slices = slice_image(img, spec);
    Tensor sum(img.shape());
    for (std::size_t i = 0; i < slices.size(); ++i) {
        write_ppm(out / ("slice_" + std::to_string(i) + ".ppm"), slices[i]);
        for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += slices[i][k];
    }
    write_ppm(out / "reconstruction.ppm", sum);
    const auto [h, w] = std::pair{img.shape().h, img.shape().w};
    for (double r : ratios) {
        const Tensor noisy = corrupt_batch(img, NoiseSpec{r, seed, NoiseMode::location});
        char name[32];
        std::snprintf(name, sizeof(name), "noise_%02ld.ppm", std::lround(r * 10.0));
        write_ppm(out / name, noisy);
        std::size_t black = 0;
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) {
                bool zero = true;
                for (std::size_t c = 0; c < img.shape().c; ++c) zero = zero && noisy.at(0, c, y, x) == 0.0;
                black += zero ? 1 : 0;
            }
        std::cout << name << ": " << black << " black pixel locations\n";
    }
    std::cout << slices.size() << " slices written to " << out.string() << "\n";
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-stream intensity-slice CNNs: training, noise sweeps and filter-weight analysis.\n"
                 "Threads: STREAMNET_THREADS (default: logical cores). Exit codes: 0 ok, 1 runtime failure, "
                 "2 config error."};
    app.require_subcommand(1);

    ConfigArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "train one configuration; writes config echo, log CSV and checkpoint");
    add_config_options(train_cmd, train_args);

    ConfigArgs sweep_args;
    bool dry_run = false;
    bool fresh = false;
    auto* sweep_cmd = app.add_subcommand("sweep", "architectures x noise_ratios x seeds; resumes finished cells");
    add_config_options(sweep_cmd, sweep_args);
    sweep_cmd->add_flag("--dry-run", dry_run, "list the cells without training");
    sweep_cmd->add_flag("--fresh", fresh, "ignore existing checkpoints and retrain every cell");

    std::vector<std::string> ckpts;
    std::vector<std::string> tags;
    std::size_t bins = 50;
    double alpha = 1.0;
    std::string analyze_out = "analysis";
    auto* analyze_cmd = app.add_subcommand("analyze", "first-layer weight histograms and KL divergence from uniform");
    analyze_cmd->add_option("checkpoints", ckpts, "checkpoint files")->required();
    analyze_cmd->add_option("--tag", tags, "report name per checkpoint (default: file stem)");
    analyze_cmd->add_option("--bins", bins, "histogram bins")->capture_default_str();
    analyze_cmd->add_option("--alpha", alpha, "additive smoothing")->capture_default_str();
    analyze_cmd->add_option("--out,-o", analyze_out, "output directory")->capture_default_str();

    std::vector<std::string> csvs;
    std::string plot_out;
    std::string column = "noisy_acc";
    std::string title;
    auto* plot_cmd = app.add_subcommand("plot", "SVG line chart of log CSVs or bar chart of histogram CSVs");
    plot_cmd->add_option("csvs", csvs, "log or histogram CSV files");
    plot_cmd->add_option("--out,-o", plot_out, "output SVG")->required();
    plot_cmd->add_option("--column", column, "noisy_acc, clean_acc or train_loss")->capture_default_str();
    plot_cmd->add_option("--title", title, "chart title");

    std::string image;
    std::size_t synthetic_index = 0;
    std::size_t n_slices = 10;
    std::vector<double> ratios{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    std::uint64_t seed = 0;
    std::string preview_out = "preview";
    auto* preview_cmd = app.add_subcommand("slice-preview", "PPM dumps of every slice and noise level of one image");
    preview_cmd->add_option("--image,-i", image, "binary PPM (P6) input; default: a synthetic image");
    preview_cmd->add_option("--synthetic-index", synthetic_index, "synthetic training image used without --image");
    preview_cmd->add_option("--slices,-n", n_slices, "number of slices")->capture_default_str();
    preview_cmd->add_option("--noise", ratios, "noise ratios")->delimiter(',');
    preview_cmd->add_option("--seed", seed, "noise seed")->capture_default_str();
    preview_cmd->add_option("--out,-o", preview_out, "output directory")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (*train_cmd) return cmd_train(train_args);
        if (*sweep_cmd) return cmd_sweep(sweep_args, dry_run, fresh);
        if (*analyze_cmd) return cmd_analyze(ckpts, tags, bins, alpha, analyze_out);
        if (*plot_cmd) return cmd_plot(csvs, plot_out, column, title);
        if (*preview_cmd) return cmd_slice_preview(image, synthetic_index, n_slices, ratios, seed, preview_out);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntimeFailure;
    }
    return kRuntimeFailure;
}
