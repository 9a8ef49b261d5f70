#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "streamnet/dataset.hpp"
#include "streamnet/training.hpp"

namespace streamnet {

/// Invalid configuration; the CLI maps it to exit code 2.
class ConfigError : public Error {
public:
    ConfigError(const std::string& key, const std::string& message)
        : Error(key.empty() ? message : "config key '" + key + "': " + message), key_(key) {}
    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

/// Architecture shorthand: "v1", "v5:N", "v6:N", "v7:N" (width N over N slices), "v8:N".
struct ArchitectureChoice {
    Vertex vertex = Vertex::v1;
    std::size_t n = 1;

    std::string str() const;
    friend bool operator==(const ArchitectureChoice&, const ArchitectureChoice&) = default;
};

ArchitectureChoice parse_architecture(const std::string& text);

/// Every knob of a run or sweep. Defaults are the desk-scale settings.
struct RunConfig {
    // data
    std::string dataset = "synthetic";  // synthetic | cifar10 | raw
    std::filesystem::path data_dir;     // cifar10 batches
    std::filesystem::path train_path;   // raw dumps
    std::filesystem::path test_path;
    std::size_t train_size = 2000;  // 0 keeps everything (cifar10/raw)
    std::size_t test_size = 1000;
    std::uint64_t data_seed = 1;
    std::size_t n_classes = 10;
    std::size_t image_size = 32;  // synthetic only
    std::size_t channels = 3;     // synthetic only

    // architecture
    ArchitectureChoice architecture{Vertex::v8, 5};
    std::size_t conv5_filters = 0;  // 0 follows n_classes
    std::size_t fc_hidden = 64;
    std::size_t fc_layers = 1;
    std::array<std::size_t, 4> base_filters = kBaseFilters;
    std::size_t filter_divisor = 4;
    bool same_padding = true;
    SliceMembership slice_membership = SliceMembership::per_channel;

    // training
    double noise_ratio = 0.5;
    NoiseMode noise_mode = NoiseMode::location;
    TrainNoise train_noise = TrainNoise::clean;
    std::size_t epochs = 30;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    std::size_t eval_every = 0;
    std::size_t eval_batch = 100;
    double lr = 1e-4;
    double beta1 = 0.99;
    double beta2 = 0.9;
    double epsilon = 1e-8;
    bool adam_conventional_betas = false;
    bool log_wall_time = true;
    std::size_t stream_threads = 1;

    // sweep
    std::vector<ArchitectureChoice> architectures{{Vertex::v1, 1}, {Vertex::v8, 5}};
    std::vector<double> noise_ratios{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    std::vector<std::uint64_t> seeds{0};
    std::size_t workers = 0;  // 0: STREAMNET_THREADS, else logical cores

    // analysis
    std::size_t kl_bins = 50;
    double kl_alpha = 1.0;

    std::filesystem::path output_dir = "runs";

    /// Sets one key from its text form; throws ConfigError naming the key.
    void set(const std::string& key, const std::string& value);
    /// Cross-field checks, including dataset paths; throws ConfigError.
    void validate() const;
    /// Effective configuration in the file format, every key listed.
    std::string to_text() const;

    ExperimentConfig experiment(const ArchitectureChoice& arch, double ratio, std::uint64_t seed) const;
    /// The single-run cell (architecture, noise_ratio, seed).
    ExperimentConfig experiment() const;
    /// architectures x noise_ratios x seeds.
    std::vector<ExperimentConfig> sweep_cells() const;
    /// Text identifying the exact data loaded, folded into experiment fingerprints.
    std::string dataset_key() const;
    std::size_t resolved_workers() const;
};

/// Parses `key = value` lines; `#` starts a comment; blank lines are ignored.
/// Unknown or repeated keys are errors naming the key and line.
RunConfig parse_run_config(const std::string& text, RunConfig base = {});
RunConfig load_run_config(const std::filesystem::path& path);
/// Applies "key=value" overrides in order.
void apply_overrides(RunConfig& config, const std::vector<std::string>& overrides);

/// Loads (train, test) as the config describes.
std::pair<Dataset, Dataset> load_datasets(const RunConfig& config);

/// STREAMNET_THREADS when set to a positive integer, else logical cores (at least 1).
std::size_t default_thread_count();

} // namespace streamnet
