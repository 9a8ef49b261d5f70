#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "streamnet/rng.hpp"
#include "streamnet/tensor.hpp"

namespace streamnet {

/// Partition of [0, 1] into half-open intensity intervals [b_i, b_{i+1}).
/// The last boundary sits at 1.1 so a value of exactly 1.0 lands in the final slice.
struct SliceSpec {
    std::vector<double> boundaries;

    std::size_t count() const noexcept { return boundaries.empty() ? 0 : boundaries.size() - 1; }
    double lower(std::size_t i) const { return boundaries.at(i); }
    double upper(std::size_t i) const { return boundaries.at(i + 1); }
    /// Index of the interval holding `v`, or count() when outside every interval.
    std::size_t slice_of(double v) const noexcept;

    /// Validates ordering and coverage; throws Error.
    void validate() const;

    friend bool operator==(const SliceSpec&, const SliceSpec&) = default;
};

inline constexpr double kSliceTerminal = 1.1;

/// n equal-width intervals over [0, 1] with the final boundary moved to 1.1.
SliceSpec make_slice_spec(std::size_t n_slices);

enum class SliceMembership {
    per_channel,  // each channel element tested on its own value
    luminance,    // whole pixel follows the slice of its Rec.601 luminance
};

/// Keeps the values whose membership falls in slice i and zeroes the rest.
/// Works on any batch size; values must lie in [0, 1].
Tensor extract_slice(const Tensor& images, const SliceSpec& spec, std::size_t i,
                     SliceMembership membership = SliceMembership::per_channel);

std::vector<Tensor> slice_image(const Tensor& images, const SliceSpec& spec,
                                SliceMembership membership = SliceMembership::per_channel);

/// Channel-stacks all slices: output channel block [i*c, (i+1)*c) holds slice i.
Tensor pack_slices(const Tensor& images, const SliceSpec& spec,
                   SliceMembership membership = SliceMembership::per_channel);

enum class NoiseMode {
    location,     // a chosen pixel location is zeroed in every channel
    per_channel,  // each channel draws its own set of locations
};

struct NoiseSpec {
    double ratio = 0.0;
    std::uint64_t seed = 0;
    NoiseMode mode = NoiseMode::location;

    void validate() const;
};

/// Number of pixel locations zeroed for a given ratio: round(ratio * h * w).
std::size_t noise_location_count(double ratio, std::size_t h, std::size_t w);

/// Zeroes exactly noise_location_count(ratio, h, w) distinct locations of every item,
/// drawn uniformly without replacement from `rng`.
Tensor corrupt_with_noise(const Tensor& images, const NoiseSpec& noise, Rng& rng);

/// Corrupts item k with its own generator seeded by derive_seed(noise.seed, {k + first_index}),
/// so the result does not depend on batch composition or processing order.
Tensor corrupt_batch(const Tensor& images, const NoiseSpec& noise, std::size_t first_index = 0);

/// As corrupt_batch, but item b uses the sub-seed of ids[b] (shuffled mini-batches).
Tensor corrupt_indexed(const Tensor& images, const NoiseSpec& noise, std::span<const std::size_t> ids);

} // namespace streamnet
