#pragma once

// Layer primitives with explicit forward contexts and analytic backward passes.
// Every function here is pure: outputs depend only on the arguments.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "streamnet/tensor.hpp"

namespace streamnet {

struct Conv2dContext {
    Tensor input;
    Tensor weight;
    std::size_t padding = 0;
    bool valid = false;
};

struct Conv2dGrads {
    Tensor input;
    Tensor weight;
    std::vector<double> bias;
};

/// Stride-1 cross-correlation with zero padding and per-output-channel bias.
/// `weight` has shape (outC, inC, kh, kw). Output is (n, outC, h + 2p - kh + 1, w + 2p - kw + 1).
/// Fills `ctx` for a later backward call when non-null.
Tensor conv2d(const Tensor& input, const Tensor& weight, std::span<const double> bias,
              std::size_t padding, Conv2dContext* ctx = nullptr);

/// With `input_grad` false the input gradient is skipped and left empty.
Conv2dGrads conv2d_backward(const Conv2dContext& ctx, const Tensor& grad_out, bool input_grad = true);

/// Six-loop convolution kept as an independent reference for conv2d.
Tensor conv2d_direct(const Tensor& input, const Tensor& weight, std::span<const double> bias,
                     std::size_t padding);

/// Padding that keeps the spatial size for an odd kernel.
constexpr std::size_t same_padding(std::size_t kernel) { return (kernel - 1) / 2; }

Tensor relu(const Tensor& input);
/// Passes `grad_out` where `input > 0`; the subgradient at exactly 0 is 0.
Tensor relu_backward(const Tensor& input, const Tensor& grad_out);

struct MaxPoolContext {
    Shape input_shape{};
    std::vector<std::size_t> argmax;  // flat input index per output element
    bool valid = false;
};

/// Non-overlapping 2x2 max pool, stride 2. Odd dims are padded on the right/bottom
/// with the lowest representable value, so output is (n, c, ceil(h/2), ceil(w/2)).
/// Ties resolve to the first element in row-major window order.
Tensor maxpool2x2(const Tensor& input, MaxPoolContext* ctx = nullptr);
Tensor maxpool2x2_backward(const MaxPoolContext& ctx, const Tensor& grad_out);

struct LinearContext {
    Tensor input;
    Tensor weight;
    bool valid = false;
};

struct LinearGrads {
    Tensor input;
    Tensor weight;
    std::vector<double> bias;
};

/// Affine map on the row-major flattening of each batch item.
/// `weight` has shape (d, m, 1, 1) where d = c*h*w of the input. Output is (n, m, 1, 1).
Tensor linear(const Tensor& input, const Tensor& weight, std::span<const double> bias,
              LinearContext* ctx = nullptr);
LinearGrads linear_backward(const LinearContext& ctx, const Tensor& grad_out);

struct SoftmaxCrossEntropy {
    double loss = 0.0;
    Tensor probs;
    Tensor grad_logits;
};

/// Mean softmax cross-entropy over the batch. `logits` items are read as K-vectors.
SoftmaxCrossEntropy softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

/// Concatenates the flattened items of each part along the feature axis: (n, sum d_i, 1, 1).
Tensor concat_features(std::span<const Tensor> parts);
/// Inverse of concat_features for gradients; `shapes` are the original part shapes.
std::vector<Tensor> split_features(const Tensor& joined, std::span<const Shape> shapes);

/// Central-difference gradient of a scalar function, one coordinate at a time.
Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x,
                                  double step);

} // namespace streamnet
