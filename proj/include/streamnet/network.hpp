#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "streamnet/ops.hpp"
#include "streamnet/slicing.hpp"
#include "streamnet/tensor.hpp"

namespace streamnet {

/// Corners of the capacity / hard-wired sparsity / input-induced sparsity cube.
enum class Vertex {
    v1,  // 1-stream simple CNN            {lower, no, no}
    v5,  // 1-stream wide CNN              {higher, no, no}
    v6,  // N streams, same input          {higher, yes, no}
    v7,  // 1-stream slice multi-channel   {higher, no, yes}
    v8,  // Streaming Network              {higher, yes, yes}
};

std::string vertex_name(Vertex v);
Vertex parse_vertex(const std::string& name);

inline constexpr std::array<std::size_t, 5> kKernelSizes{7, 5, 3, 1, 1};
inline constexpr std::array<std::size_t, 4> kBaseFilters{32, 64, 128, 256};

struct NetworkSpec {
    Vertex vertex = Vertex::v1;
    std::size_t n_streams = 1;
    std::size_t width_multiplier = 1;
    std::optional<SliceSpec> slice_spec;
    SliceMembership membership = SliceMembership::per_channel;
    std::size_t n_classes = 10;
    std::size_t conv5_filters = 10;
    std::size_t fc_hidden = 64;
    std::size_t fc_layers = 1;
    /// conv1..conv4 filter counts before width scaling: base_filters / filter_divisor.
    std::array<std::size_t, 4> base_filters = kBaseFilters;
    std::size_t filter_divisor = 1;
    bool same_padding = true;
    std::size_t in_channels = 3;
    std::size_t in_height = 32;
    std::size_t in_width = 32;
    std::uint64_t seed = 0;

    /// Filter counts of one stream's conv1..conv5, width multiplier applied.
    std::array<std::size_t, 5> stream_filters() const;
    /// Input channels seen by each stream's first conv.
    std::size_t stream_in_channels() const;
    /// Throws Error describing the first violated constraint.
    void validate() const;

    friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

struct ConvLayer {
    ParamTensor weight;  // (out, in, k, k)
    ParamTensor bias;    // (out, 1, 1, 1)
    std::size_t padding = 0;
};

struct DenseLayer {
    ParamTensor weight;  // (in, out, 1, 1)
    ParamTensor bias;    // (out, 1, 1, 1)
};

struct Stream {
    std::vector<ConvLayer> convs;
};

enum class Mode { train, eval };

struct StreamCache {
    std::vector<Conv2dContext> conv;
    std::vector<Tensor> pre_activation;
    std::vector<MaxPoolContext> pool;
    Shape output_shape{};
};

struct ForwardCache {
    std::vector<StreamCache> streams;
    std::vector<LinearContext> dense;
    std::vector<Tensor> dense_pre_activation;
    LinearContext classifier;
};

class Network {
public:
    explicit Network(NetworkSpec spec);

    const NetworkSpec& spec() const noexcept { return spec_; }
    std::span<Stream> streams() noexcept { return streams_; }
    std::span<const Stream> streams() const noexcept { return streams_; }
    std::span<DenseLayer> hidden() noexcept { return hidden_; }
    std::span<const DenseLayer> hidden() const noexcept { return hidden_; }
    DenseLayer& classifier() noexcept { return classifier_; }
    const DenseLayer& classifier() const noexcept { return classifier_; }

    /// Every trainable tensor in a fixed order (streams, then head).
    std::vector<ParamTensor*> params();
    std::vector<const ParamTensor*> params() const;
    ParamTensor& param(const std::string& id);
    std::size_t parameter_count() const;
    /// Feature length produced by one stream after conv5 and pooling.
    std::size_t stream_feature_size() const;

    /// Routes a batch of images to the per-stream inputs of this vertex.
    std::vector<Tensor> route(const Tensor& batch) const;

    /// Logits (n, K). Records contexts into `cache` when non-null.
    Tensor forward(const Tensor& batch, Mode mode, ForwardCache* cache = nullptr) const;
    /// Forward on already-routed stream inputs, one per stream.
    Tensor forward_routed(std::span<const Tensor> inputs, Mode mode, ForwardCache* cache = nullptr) const;
    /// One stream's conv stack output before flattening.
    Tensor forward_stream(std::size_t stream, const Tensor& input, StreamCache* cache = nullptr) const;

    /// Accumulates parameter gradients for the loss whose logit gradient is `grad_logits`.
    void backward(const ForwardCache& cache, const Tensor& grad_logits);
    void zero_grad();

    /// Worker threads used to run streams concurrently inside forward/backward.
    void set_stream_threads(std::size_t threads) noexcept { stream_threads_ = threads == 0 ? 1 : threads; }

private:
    void backward_stream(std::size_t stream, const StreamCache& cache, const Tensor& grad_out);

    NetworkSpec spec_;
    std::vector<Stream> streams_;
    std::vector<DenseLayer> hidden_;
    DenseLayer classifier_;
    std::size_t stream_threads_ = 1;
};

/// Dispatches on spec.vertex after validating vertex-specific preconditions.
Network build_network(const NetworkSpec& spec);
Network build_v1(NetworkSpec spec);
Network build_v5(NetworkSpec spec);
Network build_v6(NetworkSpec spec);
Network build_v7(NetworkSpec spec);
Network build_v8(NetworkSpec spec);

/// Fan-in scaled uniform bound sqrt(6 / fan_in) used for weight initialization.
double init_bound(std::size_t fan_in);

} // namespace streamnet
