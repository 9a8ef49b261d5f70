#include "streamnet/slicing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace streamnet {
namespace {

void require_unit_range(const Tensor& images) {
    for (double v : images.data()) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw Error("intensity slicing expects values in [0, 1], found " + std::to_string(v));
        }
    }
}

double luminance(const Tensor& images, std::size_t b, std::size_t y, std::size_t x) {
    const std::size_t c = images.shape().c;
    if (c == 3) {
        return 0.299 * images.at(b, 0, y, x) + 0.587 * images.at(b, 1, y, x) +
               0.114 * images.at(b, 2, y, x);
    }
    double sum = 0.0;
    for (std::size_t ch = 0; ch < c; ++ch) sum += images.at(b, ch, y, x);
    return sum / static_cast<double>(c);
}

// Slice index per element; luminance mode broadcasts the pixel's index across channels.
std::vector<std::size_t> membership_map(const Tensor& images, const SliceSpec& spec,
                                        SliceMembership membership) {
    std::vector<std::size_t> idx(images.size());
    if (membership == SliceMembership::per_channel) {
        for (std::size_t i = 0; i < images.size(); ++i) idx[i] = spec.slice_of(images[i]);
        return idx;
    }
    const Shape& s = images.shape();
    for (std::size_t b = 0; b < s.n; ++b)
        for (std::size_t y = 0; y < s.h; ++y)
            for (std::size_t x = 0; x < s.w; ++x) {
                const std::size_t k = spec.slice_of(luminance(images, b, y, x));
                for (std::size_t ch = 0; ch < s.c; ++ch) idx[images.index(b, ch, y, x)] = k;
            }
    return idx;
}

} // namespace

std::size_t SliceSpec::slice_of(double v) const noexcept {
    // upper_bound finds the first boundary strictly greater than v.
    const auto it = std::upper_bound(boundaries.begin(), boundaries.end(), v);
    if (it == boundaries.begin() || it == boundaries.end()) return count();
    return static_cast<std::size_t>(it - boundaries.begin()) - 1;
}

void SliceSpec::validate() const {
    if (boundaries.size() < 2) throw Error("SliceSpec needs at least two boundaries");
    if (boundaries.front() != 0.0) throw Error("SliceSpec must start at 0.0");
    if (!(boundaries.back() > 1.0)) throw Error("SliceSpec must end above 1.0 so that 1.0 is covered");
    for (std::size_t i = 1; i < boundaries.size(); ++i) {
        if (!(boundaries[i] > boundaries[i - 1])) {
            throw Error("SliceSpec boundaries must be strictly increasing (index " + std::to_string(i) + ")");
        }
    }
}

SliceSpec make_slice_spec(std::size_t n_slices) {
    if (n_slices == 0) throw Error("make_slice_spec: need at least one slice");
    SliceSpec spec;
    spec.boundaries.reserve(n_slices + 1);
    for (std::size_t i = 0; i < n_slices; ++i) {
        spec.boundaries.push_back(static_cast<double>(i) / static_cast<double>(n_slices));
    }
    spec.boundaries.push_back(kSliceTerminal);
    return spec;
}

Tensor extract_slice(const Tensor& images, const SliceSpec& spec, std::size_t i,
                     SliceMembership membership) {
    if (i >= spec.count()) {
        throw Error("extract_slice: slice " + std::to_string(i) + " outside [0, " +
                    std::to_string(spec.count()) + ")");
    }
    require_unit_range(images);
    const auto idx = membership_map(images, spec, membership);
    Tensor out = Tensor::zeros_like(images);
    for (std::size_t k = 0; k < images.size(); ++k) {
        if (idx[k] == i) out[k] = images[k];
    }
    return out;
}

std::vector<Tensor> slice_image(const Tensor& images, const SliceSpec& spec, SliceMembership membership) {
    spec.validate();
    require_unit_range(images);
    const auto idx = membership_map(images, spec, membership);
    std::vector<Tensor> slices(spec.count(), Tensor::zeros_like(images));
    for (std::size_t k = 0; k < images.size(); ++k) slices[idx[k]][k] = images[k];
    return slices;
}

Tensor pack_slices(const Tensor& images, const SliceSpec& spec, SliceMembership membership) {
    spec.validate();
    require_unit_range(images);
    const auto idx = membership_map(images, spec, membership);
    const Shape& s = images.shape();
    const std::size_t n_slices = spec.count();
    Tensor out(Shape{s.n, n_slices * s.c, s.h, s.w});
    const std::size_t plane = s.h * s.w;
    for (std::size_t b = 0; b < s.n; ++b)
        for (std::size_t ch = 0; ch < s.c; ++ch)
            for (std::size_t p = 0; p < plane; ++p) {
                const std::size_t src = (b * s.c + ch) * plane + p;
                const std::size_t k = idx[src];
                out[(b * n_slices * s.c + k * s.c + ch) * plane + p] = images[src];
            }
    return out;
}

void NoiseSpec::validate() const {
    if (!(ratio >= 0.0 && ratio <= 1.0)) {
        throw Error("noise ratio must lie in [0, 1], got " + std::to_string(ratio));
    }
}

std::size_t noise_location_count(double ratio, std::size_t h, std::size_t w) {
    return static_cast<std::size_t>(std::llround(ratio * static_cast<double>(h * w)));
}

Tensor corrupt_with_noise(const Tensor& images, const NoiseSpec& noise, Rng& rng) {
    noise.validate();
    Tensor out = images;
    const Shape& s = images.shape();
    const std::size_t plane = s.h * s.w;
    const std::size_t count = noise_location_count(noise.ratio, s.h, s.w);
    if (count == 0) return out;
    std::vector<std::size_t> order(plane);
    // Partial Fisher-Yates: the first `count` entries are a uniform sample without replacement.
    const auto draw = [&] {
        std::iota(order.begin(), order.end(), std::size_t{0});
        for (std::size_t i = 0; i < count; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng.below(plane - i));
            std::swap(order[i], order[j]);
        }
    };
    for (std::size_t b = 0; b < s.n; ++b) {
        if (noise.mode == NoiseMode::location) {
            draw();
            for (std::size_t ch = 0; ch < s.c; ++ch) {
                double* base = out.data().data() + (b * s.c + ch) * plane;
                for (std::size_t i = 0; i < count; ++i) base[order[i]] = 0.0;
            }
        } else {
            for (std::size_t ch = 0; ch < s.c; ++ch) {
                draw();
                double* base = out.data().data() + (b * s.c + ch) * plane;
                for (std::size_t i = 0; i < count; ++i) base[order[i]] = 0.0;
            }
        }
    }
    return out;
}

Tensor corrupt_indexed(const Tensor& images, const NoiseSpec& noise, std::span<const std::size_t> ids) {
    noise.validate();
    const Shape& s = images.shape();
    if (ids.size() != s.n) {
        throw ShapeError("corrupt_indexed ids", std::to_string(s.n), std::to_string(ids.size()));
    }
    Tensor out(s);
    const Shape one{1, s.c, s.h, s.w};
    for (std::size_t b = 0; b < s.n; ++b) {
        Rng rng(derive_seed(noise.seed, {ids[b]}));
        const Tensor item(one, std::vector<double>(images.item(b).begin(), images.item(b).end()));
        const Tensor corrupted = corrupt_with_noise(item, noise, rng);
        std::copy(corrupted.data().begin(), corrupted.data().end(), out.item(b).begin());
    }
    return out;
}

Tensor corrupt_batch(const Tensor& images, const NoiseSpec& noise, std::size_t first_index) {
    std::vector<std::size_t> ids(images.shape().n);
    std::iota(ids.begin(), ids.end(), first_index);
    return corrupt_indexed(images, noise, ids);
}

} // namespace streamnet
