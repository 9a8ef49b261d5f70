#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "streamnet/data_io.hpp"
#include "streamnet/dataset.hpp"
#include "streamnet/network.hpp"
#include "streamnet/optimizer.hpp"
#include "streamnet/slicing.hpp"
#include "streamnet/training_log.hpp"

namespace streamnet {

enum class TrainNoise { clean, noisy };

/// One cell of the architecture x noise x seed matrix.
struct ExperimentConfig {
    NetworkSpec network;  // network.seed is ignored; initialization derives from `seed`
    AdamConfig adam;
    double noise_ratio = 0.0;
    NoiseMode noise_mode = NoiseMode::location;
    TrainNoise train_noise = TrainNoise::clean;
    std::size_t epochs = 30;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    /// 0 evaluates once per epoch; k > 0 evaluates every k iterations.
    std::size_t eval_every = 0;
    std::size_t eval_batch = 100;
    std::string dataset = "synthetic";
    /// Identifies the exact data (generator settings, subset sizes); part of the fingerprint.
    std::string dataset_key;
    bool log_wall_time = true;
    std::size_t stream_threads = 1;

    /// Legend tag noise_{ratio*10:02d}_{n_streams}, with a suffix for vertices and
    /// options the legend alone cannot tell apart (see README).
    std::string tag() const;
    /// File stem {dataset}_{tag}_{seed}.
    std::string file_stem() const;
    /// Throws Error naming the first invalid field.
    void validate() const;
    /// Canonical text of every field that affects results (not threads or wall-time logging).
    std::string fingerprint() const;
    /// Network spec with the seed actually used for initialization.
    NetworkSpec effective_network() const;
};

/// Top-1 predictions, evaluated in chunks of `batch`.
std::vector<int> predict(const Network& net, const Tensor& images, std::size_t batch = 100);
/// Top-1 accuracy on `data` after corruption with `noise` (ratio 0 leaves it clean).
double evaluate(const Network& net, const Dataset& data, const NoiseSpec& noise, std::size_t batch = 100);
/// Mean cross-entropy over `data` (clean).
double dataset_loss(const Network& net, const Dataset& data, std::size_t batch = 100);

/// Test-time noise shared by every architecture trained with `seed`.
NoiseSpec eval_noise(std::uint64_t seed, double ratio, NoiseMode mode = NoiseMode::location);

struct TrainHooks {
    /// Called after every completed epoch with the state needed to resume.
    std::function<void(const TrainingProgress&, const Network&, const AdamState&)> on_epoch;
};

struct TrainResult {
    Network network;
    AdamState adam;
    std::vector<TrainingLog> logs;  // one per requested noise ratio, same order
};

/// Trains once and logs noisy accuracy at each of `ratios`. The ratio never affects
/// training unless train_noise is noisy, in which case exactly one ratio is allowed.
/// config.noise_ratio is ignored. `resume` continues from a saved epoch boundary.
TrainResult train_shared(const ExperimentConfig& config, std::span<const double> ratios, const Dataset& train,
                         const Dataset& test, const TrainHooks& hooks = {},
                         const std::optional<Checkpoint>& resume = std::nullopt);

/// Single-ratio convenience over train_shared.
TrainResult train(const ExperimentConfig& config, const Dataset& train, const Dataset& test,
                  const TrainHooks& hooks = {}, const std::optional<Checkpoint>& resume = std::nullopt);

// ---------------------------------------------------------------------------

struct SweepOptions {
    std::filesystem::path out_dir;
    std::size_t workers = 1;
    /// Reuse finished cells and partial checkpoints whose fingerprint matches.
    bool resume = true;
    /// Train cells differing only in noise_ratio once (train-clean only).
    bool share_training = true;
    std::function<void(const std::string&)> progress;
};

struct CellResult {
    ExperimentConfig config;
    std::optional<TrainingLog> log;
    std::string error;
    bool reused = false;
    std::filesystem::path csv;
    std::filesystem::path checkpoint;

    bool ok() const noexcept { return log.has_value(); }
};

/// Runs every cell, writing {stem}.csv and {stem}.ckpt per cell and summary.csv.
/// A failing cell is recorded and the rest continue. Results are sorted by (tag, seed).
std::vector<CellResult> sweep(const std::vector<ExperimentConfig>& cells, const Dataset& train,
                              const Dataset& test, const SweepOptions& options);

inline constexpr const char* kSummaryHeader =
    "tag,seed,dataset,vertex,n_streams,noise_ratio,final_clean_acc,final_noisy_acc,status";

std::string summary_csv(const std::vector<CellResult>& results, std::size_t window = 10);

} // namespace streamnet
