#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "streamnet/dataset.hpp"
#include "streamnet/network.hpp"
#include "streamnet/optimizer.hpp"
#include "streamnet/training_log.hpp"

namespace streamnet {

/// Raised for unreadable, truncated, mismatched-version or checksum-failing files.
class FormatError : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// CIFAR-10 binary batches

inline constexpr std::size_t kCifarImageBytes = 3 * 32 * 32;
inline constexpr std::size_t kCifarRecordBytes = 1 + kCifarImageBytes;

struct CifarOptions {
    std::size_t train_limit = 0;  // 0 keeps every image
    std::size_t test_limit = 0;
    std::uint64_t subset_seed = 0;
};

/// Decodes one CIFAR-10 batch file (records of 1 label byte + 3072 planar RGB bytes).
Dataset read_cifar10_batch(const std::filesystem::path& file, Split split);

/// Reads data_batch_1..5.bin and test_batch.bin from `dir`; pixels become byte / 255.
/// Non-zero limits take a class-stratified subset.
std::pair<Dataset, Dataset> load_cifar10(const std::filesystem::path& dir, const CifarOptions& options = {});

// ---------------------------------------------------------------------------
// Raw tensor dump
//
//   offset  size  field
//   0       8     magic "SNTDUMP1"
//   8       4     dtype (1 = float32, 2 = float64), little-endian u32
//   12      4     n_classes (u32, 0 when unlabeled)
//   16      32    n, c, h, w (u64 each)
//   48      ...   n*c*h*w values, planar per image (channel, row, column)
//   ...     4*n   labels (u32) when n_classes > 0

void write_raw_dump(const std::filesystem::path& path, const Dataset& data, bool float32 = false);
Dataset read_raw_dump(const std::filesystem::path& path, Split split);

// ---------------------------------------------------------------------------
// Synthetic intensity-band dataset

struct SyntheticSpec {
    std::size_t n_classes = 10;
    std::size_t train_per_class = 200;
    std::size_t test_per_class = 100;
    std::size_t channels = 3;
    std::size_t size = 32;
    std::uint64_t seed = 1;
};

/// Each class paints a fixed class-specific shape, jittered by up to one pixel, with
/// intensities drawn from its own narrow band (class k uses [0.1k + 0.02, 0.1k + 0.08]).
/// The background is a smooth random field spanning the whole [0, 1] range, so every
/// band also contains clutter. Deterministic in `seed`; classes are exactly balanced.
std::pair<Dataset, Dataset> generate_synthetic(const SyntheticSpec& spec);

// ---------------------------------------------------------------------------
// Checkpoints

struct TrainingProgress {
    std::size_t epochs_completed = 0;
    std::vector<TrainingLog> logs;

    friend bool operator==(const TrainingProgress&, const TrainingProgress&) = default;
};

struct CheckpointMeta {
    std::uint64_t seed = 0;
    std::string config_text;
    std::optional<TrainingProgress> progress;
};

struct Checkpoint {
    Network network;
    std::optional<AdamState> adam;
    CheckpointMeta meta;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Writes atomically (temporary file, then rename). Parameters are stored as
/// little-endian float64 blobs keyed by id; the body carries an FNV-1a checksum.
void save_checkpoint(const std::filesystem::path& path, const Network& net, const AdamState* adam,
                     const CheckpointMeta& meta = {});
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string network_spec_to_text(const NetworkSpec& spec);
NetworkSpec network_spec_from_text(const std::string& text);

// ---------------------------------------------------------------------------
// Files

/// Writes `contents` to `path` via a sibling temporary and rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

/// Binary PPM (P6, maxval 255) of item `index` of a 1- or 3-channel tensor.
void write_ppm(const std::filesystem::path& path, const Tensor& images, std::size_t index = 0);
/// Reads a P6 PPM into a (1, 3, h, w) tensor with values byte / 255.
Tensor read_ppm(const std::filesystem::path& path);
/// 8-bit quantization used by write_ppm.
std::uint8_t to_byte(double v);

} // namespace streamnet
