#include "streamnet/training.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "streamnet/ops.hpp"
#include "streamnet/rng.hpp"

namespace streamnet {
namespace fs = std::filesystem;

namespace {

// Seed domains; fixed forever so logs stay comparable across versions.
constexpr std::uint64_t kInitDomain = 0x1a17;
constexpr std::uint64_t kShuffleDomain = 0x5f1e;
constexpr std::uint64_t kEvalNoiseDomain = 0xe7a1;
constexpr std::uint64_t kTrainNoiseDomain = 0x7a19;

bool on_ratio_grid(double r) {
    const double scaled = r * 10.0;
    return r >= 0.0 && r <= 0.9 + 1e-12 && std::abs(scaled - std::round(scaled)) < 1e-9;
}

std::string base_fingerprint(const ExperimentConfig& c) {
    std::ostringstream os;
    os << network_spec_to_text(c.effective_network());
    os << "adam=" << format_double(c.adam.lr) << ',' << format_double(c.adam.beta1) << ','
       << format_double(c.adam.beta2) << ',' << format_double(c.adam.epsilon) << '\n'
       << "noise_mode=" << (c.noise_mode == NoiseMode::location ? "location" : "per_channel") << '\n'
       << "train_noise=" << (c.train_noise == TrainNoise::clean ? "clean" : "noisy") << '\n'
       << "epochs=" << c.epochs << '\n'
       << "batch_size=" << c.batch_size << '\n'
       << "experiment_seed=" << c.seed << '\n'
       << "eval_every=" << c.eval_every << '\n'
       << "eval_batch=" << c.eval_batch << '\n'
       << "dataset=" << c.dataset << '\n'
       << "dataset_key=" << c.dataset_key << '\n';
    return os.str();
}

void check_data(const ExperimentConfig& config, const Dataset& data, const char* which) {
    if (data.empty()) throw Error(std::string(which) + " dataset is empty");
    const NetworkSpec& ns = config.network;
    const Shape s = data.image_shape();
    if (s.c != ns.in_channels || s.h != ns.in_height || s.w != ns.in_width) {
        throw ShapeError(std::string(which) + " images",
                         Shape{1, ns.in_channels, ns.in_height, ns.in_width}.str(), s.str());
    }
    if (data.n_classes > ns.n_classes) {
        throw Error(std::string(which) + " dataset has " + std::to_string(data.n_classes) +
                    " classes, network has " + std::to_string(ns.n_classes));
    }
}

} // namespace

std::string ExperimentConfig::tag() const {
    const long tenths = std::lround(noise_ratio * 10.0);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "noise_%02ld_%zu", tenths, network.n_streams);
    std::string t = buf;
    switch (network.vertex) {
    case Vertex::v1:
    case Vertex::v8: break;
    case Vertex::v5: t += "_v5x" + std::to_string(network.width_multiplier); break;
    case Vertex::v6: t += "_v6"; break;
    case Vertex::v7: {
        t += "_v7x" + std::to_string(network.width_multiplier);
        const std::size_t slices = network.slice_spec ? network.slice_spec->count() : 0;
        if (slices != network.width_multiplier) t += "s" + std::to_string(slices);
        break;
    }
    }
    const AdamConfig conv = AdamConfig::conventional();
    if (adam.beta1 == conv.beta1 && adam.beta2 == conv.beta2) t += "_adamconv";
    if (train_noise == TrainNoise::noisy) t += "_trainnoisy";
    if (noise_mode == NoiseMode::per_channel) t += "_pcnoise";
    if (network.membership == SliceMembership::luminance &&
        (network.vertex == Vertex::v7 || network.vertex == Vertex::v8)) {
        t += "_lum";
    }
    return t;
}

std::string ExperimentConfig::file_stem() const { return dataset + "_" + tag() + "_" + std::to_string(seed); }

void ExperimentConfig::validate() const {
    network.validate();
    if (!on_ratio_grid(noise_ratio)) {
        throw Error("noise_ratio must be one of 0.0, 0.1, ..., 0.9, got " + format_double(noise_ratio));
    }
    if (batch_size == 0) throw Error("batch_size must be positive");
    if (eval_batch == 0) throw Error("eval_batch must be positive");
    if (!(adam.lr > 0.0)) throw Error("adam lr must be positive");
    if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0)) throw Error("adam beta1 must lie in [0, 1)");
    if (!(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) throw Error("adam beta2 must lie in [0, 1)");
    if (!(adam.epsilon > 0.0)) throw Error("adam epsilon must be positive");
    if (dataset.empty() || dataset.find_first_of("/\\ ") != std::string::npos) {
        throw Error("dataset name must be non-empty and contain no spaces or slashes");
    }
}

std::string ExperimentConfig::fingerprint() const {
    return base_fingerprint(*this) + "noise_ratio=" + format_double(noise_ratio) + '\n';
}

NetworkSpec ExperimentConfig::effective_network() const {
    NetworkSpec ns = network;
    ns.seed = derive_seed(seed, {kInitDomain});
    return ns;
}

NoiseSpec eval_noise(std::uint64_t seed, double ratio, NoiseMode mode) {
    return NoiseSpec{ratio, derive_seed(seed, {kEvalNoiseDomain}), mode};
}

std::vector<int> predict(const Network& net, const Tensor& images, std::size_t batch) {
    const std::size_t n = images.shape().n;
    std::vector<int> out;
    out.reserve(n);
    for (std::size_t first = 0; first < n; first += batch) {
        const std::size_t count = std::min(batch, n - first);
        const Tensor logits = net.forward(images.batch_slice(first, count), Mode::eval);
        for (std::size_t i = 0; i < count; ++i) {
            const auto row = logits.item(i);
            out.push_back(static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin()));
        }
    }
    return out;
}

namespace {
double accuracy_of(const std::vector<int>& predicted, const std::vector<int>& labels) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) hits += predicted[i] == labels[i] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(labels.size());
}
} // namespace

double evaluate(const Network& net, const Dataset& data, const NoiseSpec& noise, std::size_t batch) {
    if (data.empty()) throw Error("evaluate: empty dataset");
    if (noise.ratio == 0.0) return accuracy_of(predict(net, data.images, batch), data.labels);
    return accuracy_of(predict(net, corrupt_batch(data.images, noise), batch), data.labels);
}

double dataset_loss(const Network& net, const Dataset& data, std::size_t batch) {
    if (data.empty()) throw Error("dataset_loss: empty dataset");
    const std::size_t n = data.size();
    double total = 0.0;
    for (std::size_t first = 0; first < n; first += batch) {
        const std::size_t count = std::min(batch, n - first);
        const Tensor logits = net.forward(data.images.batch_slice(first, count), Mode::eval);
        const auto labels = std::span<const int>(data.labels).subspan(first, count);
        total += softmax_cross_entropy(logits, labels).loss * static_cast<double>(count);
    }
    return total / static_cast<double>(n);
}

TrainResult train_shared(const ExperimentConfig& config, std::span<const double> ratios, const Dataset& train,
                         const Dataset& test, const TrainHooks& hooks, const std::optional<Checkpoint>& resume) {
    config.validate();
    if (ratios.empty()) throw Error("train_shared: no noise ratios requested");
    for (double r : ratios) {
        if (!on_ratio_grid(r)) throw Error("noise ratio " + format_double(r) + " is not on the 0.0..0.9 grid");
    }
    if (config.train_noise == TrainNoise::noisy && ratios.size() != 1) {
        throw Error("train_shared: noisy training depends on the ratio; pass exactly one");
    }
    check_data(config, train, "training");
    check_data(config, test, "test");

    const NetworkSpec spec = config.effective_network();
    Network net = resume ? resume->network : Network(spec);
    if (!(net.spec() == spec)) throw Error("resume checkpoint was built from a different network spec");
    net.set_stream_threads(config.stream_threads);
    AdamState adam = resume && resume->adam ? *resume->adam : adam_init(net, config.adam);
    if (resume && !resume->adam) throw Error("resume checkpoint carries no optimizer state");

    std::vector<TrainingLog> logs(ratios.size());
    std::size_t start_epoch = 0;
    if (resume) {
        if (!resume->meta.progress) throw Error("resume checkpoint carries no training progress");
        const TrainingProgress& prog = *resume->meta.progress;
        if (prog.logs.size() != ratios.size()) throw Error("resume checkpoint logs a different set of noise ratios");
        logs = prog.logs;
        start_epoch = prog.epochs_completed;
        if (start_epoch > config.epochs) throw Error("resume checkpoint is past the configured epoch count");
    }
    for (std::size_t i = 0; i < ratios.size(); ++i) {
        ExperimentConfig cell = config;
        cell.noise_ratio = ratios[i];
        if (resume && logs[i].tag != cell.tag()) throw Error("resume checkpoint log tag mismatch: " + logs[i].tag);
        logs[i].tag = cell.tag();
    }

    // Corrupted test sets are built once, so every evaluation sees the same images.
    std::vector<std::optional<Tensor>> noisy_test(ratios.size());
    for (std::size_t i = 0; i < ratios.size(); ++i) {
        if (ratios[i] > 0.0) noisy_test[i] = corrupt_batch(test.images, eval_noise(config.seed, ratios[i], config.noise_mode));
    }

    const auto t0 = std::chrono::steady_clock::now();
    const double wall_base = !logs.front().rows.empty() ? logs.front().rows.back().wall_ms : 0.0;
    auto record = [&](double epoch, double train_loss) {
        const double clean = accuracy_of(predict(net, test.images, config.eval_batch), test.labels);
        double wall = 0.0;
        if (config.log_wall_time) {
            wall = wall_base + std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        }
        for (std::size_t i = 0; i < ratios.size(); ++i) {
            const double noisy =
                noisy_test[i] ? accuracy_of(predict(net, *noisy_test[i], config.eval_batch), test.labels) : clean;
            logs[i].rows.push_back(LogRow{epoch, train_loss, clean, noisy, wall});
        }
    };

    if (!resume) record(0.0, dataset_loss(net, train, config.eval_batch));

    const std::size_t n = train.size();
    const std::size_t iters_per_epoch = (n + config.batch_size - 1) / config.batch_size;
    std::vector<std::size_t> order(n);
    for (std::size_t epoch = start_epoch; epoch < config.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng shuffle(derive_seed(config.seed, {kShuffleDomain, epoch}));
        for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);
        const NoiseSpec train_noise{ratios.front(), derive_seed(config.seed, {kTrainNoiseDomain, epoch}),
                                    config.noise_mode};

        double loss_sum = 0.0;
        std::size_t loss_count = 0;
        for (std::size_t it = 0; it < iters_per_epoch; ++it) {
            const std::size_t first = it * config.batch_size;
            const std::size_t count = std::min(config.batch_size, n - first);
            const std::span<const std::size_t> ids(order.data() + first, count);
            Tensor x = train.gather(ids);
            if (config.train_noise == TrainNoise::noisy && train_noise.ratio > 0.0) {
                x = corrupt_indexed(x, train_noise, ids);
            }
            const std::vector<int> labels = train.gather_labels(ids);

            net.zero_grad();
            ForwardCache cache;
            const Tensor logits = net.forward(x, Mode::train, &cache);
            const SoftmaxCrossEntropy sce = softmax_cross_entropy(logits, labels);
            if (!std::isfinite(sce.loss)) {
                throw Error("training diverged: non-finite loss at epoch " + std::to_string(epoch + 1) +
                            ", iteration " + std::to_string(it + 1));
            }
            net.backward(cache, sce.grad_logits);
            adam_step(adam, net);
            loss_sum += sce.loss * static_cast<double>(count);
            loss_count += count;

            const std::size_t global = epoch * iters_per_epoch + it + 1;
            if (config.eval_every > 0 && global % config.eval_every == 0) {
                record(static_cast<double>(global) / static_cast<double>(iters_per_epoch),
                       loss_sum / static_cast<double>(loss_count));
                loss_sum = 0.0;
                loss_count = 0;
            }
        }
        if (config.eval_every == 0) record(static_cast<double>(epoch + 1), loss_sum / static_cast<double>(loss_count));
        if (hooks.on_epoch) hooks.on_epoch(TrainingProgress{epoch + 1, logs}, net, adam);
    }
    net.zero_grad();
    return TrainResult{std::move(net), std::move(adam), std::move(logs)};
}

TrainResult train(const ExperimentConfig& config, const Dataset& train_set, const Dataset& test,
                  const TrainHooks& hooks, const std::optional<Checkpoint>& resume) {
    const double ratio = config.noise_ratio;
    return train_shared(config, std::span<const double>(&ratio, 1), train_set, test, hooks, resume);
}

// ---------------------------------------------------------------------------

namespace {

struct Group {
    std::vector<std::size_t> cells;  // indices into the cell list
    std::string key;
};

std::optional<TrainingLog> reusable_log(const ExperimentConfig& cell, const fs::path& ckpt) {
    if (!fs::exists(ckpt)) return std::nullopt;
    try {
        Checkpoint c = load_checkpoint(ckpt);
        if (c.meta.config_text != cell.fingerprint() || !c.meta.progress) return std::nullopt;
        const TrainingProgress& p = *c.meta.progress;
        if (p.epochs_completed != cell.epochs || p.logs.size() != 1 || p.logs.front().tag != cell.tag()) {
            return std::nullopt;
        }
        return p.logs.front();
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

} // namespace

std::vector<CellResult> sweep(const std::vector<ExperimentConfig>& cells, const Dataset& train_set,
                              const Dataset& test, const SweepOptions& options) {
    if (options.out_dir.empty()) throw Error("sweep: no output directory");
    fs::create_directories(options.out_dir);

    std::vector<CellResult> results(cells.size());
    {
        std::map<std::string, std::size_t> stems;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            results[i].config = cells[i];
            const std::string stem = cells[i].file_stem();
            if (!stems.emplace(stem, i).second) throw Error("sweep: duplicate cell '" + stem + "'");
            results[i].csv = options.out_dir / (stem + ".csv");
            results[i].checkpoint = options.out_dir / (stem + ".ckpt");
        }
    }

    std::vector<Group> groups;
    {
        std::map<std::string, std::size_t> by_key;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            const bool shareable = options.share_training && cells[i].train_noise == TrainNoise::clean;
            const std::string key = shareable ? base_fingerprint(cells[i]) : cells[i].fingerprint();
            auto [it, inserted] = by_key.emplace(key, groups.size());
            if (inserted) groups.push_back(Group{{}, key});
            groups[it->second].cells.push_back(i);
        }
    }

    std::mutex report_mutex;
    auto report = [&](const std::string& msg) {
        if (!options.progress) return;
        std::lock_guard lock(report_mutex);
        options.progress(msg);
    };

    auto run_group = [&](const Group& g) {
        std::vector<std::size_t> pending;
        for (std::size_t i : g.cells) {
            CellResult& r = results[i];
            try {
                r.config.validate();
            } catch (const std::exception& e) {
                r.error = e.what();
                report("invalid " + r.config.file_stem() + ": " + r.error);
                continue;
            }
            if (options.resume) {
                if (auto log = reusable_log(r.config, r.checkpoint)) {
                    r.log = std::move(log);
                    r.reused = true;
                    if (!fs::exists(r.csv)) write_file_atomic(r.csv, log_to_csv(*r.log));
                    report("reused " + r.config.file_stem());
                    continue;
                }
            }
            pending.push_back(i);
        }
        if (pending.empty()) return;

        const ExperimentConfig& lead = results[pending.front()].config;
        std::vector<double> ratios;
        std::string partial_key = g.key + "ratios=";
        for (std::size_t i : pending) {
            ratios.push_back(results[i].config.noise_ratio);
            partial_key += format_double(results[i].config.noise_ratio) + ";";
        }
        const fs::path partial = options.out_dir / (lead.file_stem() + ".partial.ckpt");

        try {
            std::optional<Checkpoint> resume;
            if (options.resume && fs::exists(partial)) {
                try {
                    Checkpoint c = load_checkpoint(partial);
                    if (c.meta.config_text == partial_key && c.meta.progress) resume = std::move(c);
                } catch (const std::exception&) {
                }
                if (resume) {
                    report("resuming " + lead.file_stem() + " at epoch " +
                           std::to_string(resume->meta.progress->epochs_completed));
                }
            }
            TrainHooks hooks;
            hooks.on_epoch = [&](const TrainingProgress& p, const Network& net, const AdamState& adam) {
                if (p.epochs_completed < lead.epochs) {
                    save_checkpoint(partial, net, &adam, CheckpointMeta{lead.seed, partial_key, p});
                }
                report(lead.file_stem() + (ratios.size() > 1 ? " (+" + std::to_string(ratios.size() - 1) + " ratios)" : "") +
                       " epoch " + std::to_string(p.epochs_completed) + "/" + std::to_string(lead.epochs));
            };
            TrainResult tr = train_shared(lead, ratios, train_set, test, hooks, resume);
            for (std::size_t k = 0; k < pending.size(); ++k) {
                CellResult& r = results[pending[k]];
                write_file_atomic(r.csv, log_to_csv(tr.logs[k]));
                save_checkpoint(r.checkpoint, tr.network, &tr.adam,
                                CheckpointMeta{r.config.seed, r.config.fingerprint(),
                                               TrainingProgress{r.config.epochs, {tr.logs[k]}}});
                r.log = tr.logs[k];
            }
            std::error_code ec;
            fs::remove(partial, ec);
            report("finished " + lead.file_stem());
        } catch (const std::exception& e) {
            for (std::size_t i : pending) results[i].error = e.what();
            report("failed " + lead.file_stem() + ": " + e.what());
        }
    };

    const std::size_t workers = std::max<std::size_t>(1, std::min(options.workers, groups.size()));
    if (workers == 1) {
        for (const Group& g : groups) run_group(g);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t gi = next++; gi < groups.size(); gi = next++) run_group(groups[gi]);
            });
        }
    }

    std::sort(results.begin(), results.end(), [](const CellResult& a, const CellResult& b) {
        const std::string ta = a.config.tag();
        const std::string tb = b.config.tag();
        return ta != tb ? ta < tb : a.config.seed < b.config.seed;
    });
    write_file_atomic(options.out_dir / "summary.csv", summary_csv(results));
    return results;
}

std::string summary_csv(const std::vector<CellResult>& results, std::size_t window) {
    std::ostringstream os;
    os << kSummaryHeader << '\n';
    for (const CellResult& r : results) {
        const ExperimentConfig& c = r.config;
        os << c.tag() << ',' << c.seed << ',' << c.dataset << ',' << vertex_name(c.network.vertex) << ','
           << c.network.n_streams << ',' << format_double(c.noise_ratio) << ',';
        if (r.log && !r.log->rows.empty()) {
            os << format_double(final_window_mean(*r.log, LogColumn::clean_acc, window)) << ','
               << format_double(final_window_mean(*r.log, LogColumn::noisy_acc, window)) << ",ok";
        } else {
            std::string err = r.error;
            std::replace(err.begin(), err.end(), ',', ';');
            std::replace(err.begin(), err.end(), '\n', ' ');
            os << ",,failed: " << err;
        }
        os << '\n';
    }
    return os.str();
}

} // namespace streamnet
