#include "streamnet/dataset.hpp"

#include <algorithm>

#include "streamnet/rng.hpp"

namespace streamnet {

Tensor Dataset::gather(std::span<const std::size_t> indices) const {
    const Shape& s = images.shape();
    Tensor out(Shape{indices.size(), s.c, s.h, s.w});
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const auto src = images.item(indices[k]);
        std::copy(src.begin(), src.end(), out.item(k).begin());
    }
    return out;
}

std::vector<int> Dataset::gather_labels(std::span<const std::size_t> indices) const {
    std::vector<int> out;
    out.reserve(indices.size());
    for (std::size_t i : indices) out.push_back(labels.at(i));
    return out;
}

void Dataset::validate() const {
    if (images.shape().n != labels.size()) {
        throw Error("dataset has " + std::to_string(images.shape().n) + " images but " +
                    std::to_string(labels.size()) + " labels");
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= n_classes) {
            throw Error("label " + std::to_string(labels[i]) + " at index " + std::to_string(i) +
                        " outside [0, " + std::to_string(n_classes) + ")");
        }
    }
    for (double v : images.data()) {
        if (!(v >= 0.0 && v <= 1.0)) throw Error("pixel value " + std::to_string(v) + " outside [0, 1]");
    }
}

std::vector<std::size_t> Dataset::class_counts() const {
    std::vector<std::size_t> counts(n_classes, 0);
    for (int l : labels) counts.at(static_cast<std::size_t>(l)) += 1;
    return counts;
}

Dataset stratified_subset(const Dataset& data, std::size_t total, std::uint64_t seed) {
    const std::size_t k = data.n_classes;
    if (k == 0) throw Error("stratified_subset: dataset has no classes");
    std::vector<std::vector<std::size_t>> by_class(k);
    for (std::size_t i = 0; i < data.size(); ++i) by_class[static_cast<std::size_t>(data.labels[i])].push_back(i);
    std::vector<std::size_t> chosen;
    for (std::size_t c = 0; c < k; ++c) {
        const std::size_t want = total / k + (c < total % k ? 1 : 0);
        auto& pool = by_class[c];
        if (pool.size() < want) {
            throw Error("stratified_subset: class " + std::to_string(c) + " has " + std::to_string(pool.size()) +
                        " items, need " + std::to_string(want));
        }
        Rng rng(derive_seed(seed, {c}));
        for (std::size_t i = 0; i < want; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
            std::swap(pool[i], pool[j]);
        }
        chosen.insert(chosen.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(want));
    }
    std::sort(chosen.begin(), chosen.end());
    Dataset out;
    out.images = data.gather(chosen);
    out.labels = data.gather_labels(chosen);
    out.split = data.split;
    out.n_classes = k;
    return out;
}

} // namespace streamnet
