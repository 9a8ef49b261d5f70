#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace streamnet {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when an operation receives tensors whose dimensions disagree.
class ShapeError : public Error {
public:
    ShapeError(const std::string& what, const std::string& expected, const std::string& actual)
        : Error(what + ": expected " + expected + ", got " + actual),
          expected_(expected),
          actual_(actual) {}

    const std::string& expected() const noexcept { return expected_; }
    const std::string& actual() const noexcept { return actual_; }

private:
    std::string expected_;
    std::string actual_;
};

/// Rank-4 shape in (batch, channel, height, width) order.
struct Shape {
    std::size_t n = 0;
    std::size_t c = 0;
    std::size_t h = 0;
    std::size_t w = 0;

    std::size_t size() const noexcept { return n * c * h * w; }
    /// Elements per batch item.
    std::size_t item_size() const noexcept { return c * h * w; }
    std::string str() const;

    friend bool operator==(const Shape&, const Shape&) = default;
};

/// Dense row-major rank-4 array of doubles with an optional gradient buffer.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape()); }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    const std::vector<double>& vec() const noexcept { return data_; }

    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }

    double& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) noexcept {
        return data_[index(n, c, h, w)];
    }
    double at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const noexcept {
        return data_[index(n, c, h, w)];
    }
    std::size_t index(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const noexcept {
        return ((n * shape_.c + c) * shape_.h + h) * shape_.w + w;
    }

    /// Same data viewed under a new shape with equal element count.
    Tensor reshaped(Shape shape) const;
    /// Copy of batch items [first, first + count).
    Tensor batch_slice(std::size_t first, std::size_t count) const;
    std::span<const double> item(std::size_t n) const noexcept {
        return std::span<const double>(data_).subspan(n * shape_.item_size(), shape_.item_size());
    }
    std::span<double> item(std::size_t n) noexcept {
        return std::span<double>(data_).subspan(n * shape_.item_size(), shape_.item_size());
    }

    bool has_grad() const noexcept { return !grad_.empty(); }
    /// Allocates a zeroed gradient buffer if none exists.
    std::span<double> ensure_grad();
    std::span<double> grad() noexcept { return grad_; }
    std::span<const double> grad() const noexcept { return grad_; }
    void drop_grad() noexcept { grad_.clear(); }

    bool all_finite() const noexcept;

    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

private:
    Shape shape_{};
    std::vector<double> data_;
    std::vector<double> grad_;
};

/// Trainable tensor with its accumulated gradient and a stable identifier.
struct ParamTensor {
    std::string id;
    Tensor value;
    Tensor grad;

    ParamTensor() = default;
    ParamTensor(std::string id_, Tensor value_)
        : id(std::move(id_)), value(std::move(value_)), grad(Tensor::zeros_like(value)) {}

    void zero_grad();
};

/// Throws ShapeError unless `actual == expected`.
void require_shape(const char* what, const Shape& expected, const Shape& actual);

} // namespace streamnet
