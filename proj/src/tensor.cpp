#include "streamnet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace streamnet {

std::string Shape::str() const {
    std::ostringstream os;
    os << '(' << n << ", " << c << ", " << h << ", " << w << ')';
    return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(shape), data_(shape.size(), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.size()) {
        throw ShapeError("Tensor", std::to_string(shape_.size()) + " elements for " + shape_.str(),
                         std::to_string(data_.size()) + " elements");
    }
}

Tensor Tensor::reshaped(Shape shape) const {
    if (shape.size() != data_.size()) {
        throw ShapeError("reshape", std::to_string(data_.size()) + " elements",
                         shape.str() + " with " + std::to_string(shape.size()) + " elements");
    }
    return Tensor(shape, data_);
}

Tensor Tensor::batch_slice(std::size_t first, std::size_t count) const {
    if (first + count > shape_.n) {
        throw ShapeError("batch_slice", "range within batch of " + std::to_string(shape_.n),
                         "[" + std::to_string(first) + ", " + std::to_string(first + count) + ")");
    }
    const std::size_t stride = shape_.item_size();
    std::vector<double> out(data_.begin() + static_cast<std::ptrdiff_t>(first * stride),
                            data_.begin() + static_cast<std::ptrdiff_t>((first + count) * stride));
    return Tensor(Shape{count, shape_.c, shape_.h, shape_.w}, std::move(out));
}

std::span<double> Tensor::ensure_grad() {
    if (grad_.size() != data_.size()) grad_.assign(data_.size(), 0.0);
    return grad_;
}

bool Tensor::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); }) &&
           std::all_of(grad_.begin(), grad_.end(), [](double v) { return std::isfinite(v); });
}

void ParamTensor::zero_grad() {
    if (grad.shape() != value.shape()) {
        grad = Tensor::zeros_like(value);
    } else {
        std::fill(grad.data().begin(), grad.data().end(), 0.0);
    }
}

void require_shape(const char* what, const Shape& expected, const Shape& actual) {
    if (expected != actual) throw ShapeError(what, expected.str(), actual.str());
}

} // namespace streamnet
