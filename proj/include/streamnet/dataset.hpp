#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "streamnet/tensor.hpp"

namespace streamnet {

enum class Split { train, test };

/// Images stored contiguously as (N, c, h, w) with values in [0, 1].
struct Dataset {
    Tensor images;
    std::vector<int> labels;
    Split split = Split::train;
    std::size_t n_classes = 0;

    std::size_t size() const noexcept { return labels.size(); }
    bool empty() const noexcept { return labels.empty(); }
    Shape image_shape() const { return Shape{1, images.shape().c, images.shape().h, images.shape().w}; }

    /// Gathers the listed items into a batch tensor and matching labels.
    Tensor gather(std::span<const std::size_t> indices) const;
    std::vector<int> gather_labels(std::span<const std::size_t> indices) const;

    /// Checks label range, pixel range and tensor/label agreement; throws Error.
    void validate() const;
    std::vector<std::size_t> class_counts() const;
};

/// Class-stratified subset of `total` items chosen with `seed`; original order is kept.
/// Classes receive total / K items each, the first total % K classes one extra.
Dataset stratified_subset(const Dataset& data, std::size_t total, std::uint64_t seed);

} // namespace streamnet
