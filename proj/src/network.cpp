#include "streamnet/network.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "streamnet/rng.hpp"

namespace streamnet {
namespace {

std::uint64_t id_hash(const std::string& id) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : id) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Weights draw from their own id-keyed generator, so streams are initialized
// independently of build order.
ParamTensor make_weight(const std::string& id, Shape shape, std::size_t fan_in, std::uint64_t seed) {
    Tensor t(shape);
    Rng rng(derive_seed(seed, {id_hash(id)}));
    const double bound = init_bound(fan_in);
    for (double& v : t.data()) v = rng.uniform(-bound, bound);
    return ParamTensor(id, std::move(t));
}

ParamTensor make_bias(const std::string& id, std::size_t count) {
    return ParamTensor(id, Tensor(Shape{count, 1, 1, 1}));
}

void accumulate(ParamTensor& p, std::span<const double> g) {
    auto dst = p.grad.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
}

template <class Fn>
void for_each_stream(std::size_t count, std::size_t threads, Fn&& fn) {
    if (threads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    const std::size_t workers = std::min(threads, count);
    std::vector<std::exception_ptr> errors(workers);
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t i = w; i < count; i += workers) fn(i);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

} // namespace

std::string vertex_name(Vertex v) {
    switch (v) {
    case Vertex::v1: return "v1";
    case Vertex::v5: return "v5";
    case Vertex::v6: return "v6";
    case Vertex::v7: return "v7";
    case Vertex::v8: return "v8";
    }
    return "?";
}

Vertex parse_vertex(const std::string& name) {
    for (Vertex v : {Vertex::v1, Vertex::v5, Vertex::v6, Vertex::v7, Vertex::v8}) {
        if (vertex_name(v) == name) return v;
    }
    throw Error("unknown vertex '" + name + "' (expected v1, v5, v6, v7 or v8)");
}

double init_bound(std::size_t fan_in) { return std::sqrt(6.0 / static_cast<double>(fan_in)); }

std::array<std::size_t, 5> NetworkSpec::stream_filters() const {
    std::array<std::size_t, 5> f{};
    for (std::size_t i = 0; i < 4; ++i) f[i] = base_filters[i] / filter_divisor;
    f[4] = conv5_filters;
    const bool wide = vertex == Vertex::v5 || vertex == Vertex::v7;
    if (wide) {
        for (auto& x : f) x *= width_multiplier;
    }
    return f;
}

std::size_t NetworkSpec::stream_in_channels() const {
    if (vertex == Vertex::v7) return in_channels * (slice_spec ? slice_spec->count() : 0);
    return in_channels;
}

void NetworkSpec::validate() const {
    if (n_classes < 2) throw Error("n_classes must be at least 2");
    if (conv5_filters == 0) throw Error("conv5_filters must be positive");
    if (fc_hidden == 0 && fc_layers > 0) throw Error("fc_hidden must be positive");
    if (filter_divisor == 0) throw Error("filter_divisor must be positive");
    for (std::size_t b : base_filters) {
        if (b / filter_divisor == 0) throw Error("filter_divisor leaves a conv layer without filters");
    }
    if (in_channels == 0 || in_height == 0 || in_width == 0) throw Error("input shape must be non-empty");
    if (width_multiplier == 0) throw Error("width_multiplier must be positive");
    if (n_streams == 0) throw Error("n_streams must be positive");
    switch (vertex) {
    case Vertex::v1:
        if (n_streams != 1 || width_multiplier != 1) throw Error("v1 is a single stream of unit width");
        break;
    case Vertex::v5:
        if (n_streams != 1) throw Error("v5 has exactly one stream");
        break;
    case Vertex::v6:
        if (width_multiplier != 1) throw Error("v6 streams use the unit-width template");
        break;
    case Vertex::v7:
        if (n_streams != 1) throw Error("v7 has exactly one stream");
        if (!slice_spec) throw Error("v7 requires a slice_spec");
        break;
    case Vertex::v8:
        if (width_multiplier != 1) throw Error("v8 streams use the unit-width template");
        if (!slice_spec) throw Error("v8 requires a slice_spec");
        if (slice_spec->count() != n_streams) {
            throw Error("v8 needs one slice per stream: " + std::to_string(n_streams) + " streams, " +
                        std::to_string(slice_spec->count()) + " slices");
        }
        break;
    }
    if (slice_spec) slice_spec->validate();
}

Network::Network(NetworkSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    const auto filters = spec_.stream_filters();
    for (std::size_t s = 0; s < spec_.n_streams; ++s) {
        Stream stream;
        std::size_t in_c = spec_.stream_in_channels();
        for (std::size_t l = 0; l < 5; ++l) {
            const std::string prefix = "stream" + std::to_string(s) + ".conv" + std::to_string(l + 1);
            const std::size_t k = kKernelSizes[l];
            ConvLayer layer{make_weight(prefix + ".weight", Shape{filters[l], in_c, k, k}, in_c * k * k, spec_.seed),
                            make_bias(prefix + ".bias", filters[l]),
                            spec_.same_padding ? same_padding(k) : 0};
            stream.convs.push_back(std::move(layer));
            in_c = filters[l];
        }
        streams_.push_back(std::move(stream));
    }
    std::size_t features = spec_.n_streams * stream_feature_size();
    for (std::size_t j = 0; j < spec_.fc_layers; ++j) {
        const std::string prefix = "head.fc" + std::to_string(j + 1);
        hidden_.push_back(DenseLayer{
            make_weight(prefix + ".weight", Shape{features, spec_.fc_hidden, 1, 1}, features, spec_.seed),
            make_bias(prefix + ".bias", spec_.fc_hidden)});
        features = spec_.fc_hidden;
    }
    classifier_ = DenseLayer{
        make_weight("head.classifier.weight", Shape{features, spec_.n_classes, 1, 1}, features, spec_.seed),
        make_bias("head.classifier.bias", spec_.n_classes)};
}

std::size_t Network::stream_feature_size() const {
    std::size_t h = spec_.in_height;
    std::size_t w = spec_.in_width;
    for (std::size_t l = 0; l < 5; ++l) {
        const std::size_t k = kKernelSizes[l];
        const std::size_t pad = spec_.same_padding ? same_padding(k) : 0;
        if (h + 2 * pad < k || w + 2 * pad < k) {
            throw Error("input " + std::to_string(spec_.in_height) + "x" + std::to_string(spec_.in_width) +
                        " collapses before conv" + std::to_string(l + 1));
        }
        h = (h + 2 * pad - k + 1 + 1) / 2;
        w = (w + 2 * pad - k + 1 + 1) / 2;
    }
    return spec_.stream_filters()[4] * h * w;
}

std::vector<ParamTensor*> Network::params() {
    std::vector<ParamTensor*> out;
    for (Stream& s : streams_)
        for (ConvLayer& l : s.convs) {
            out.push_back(&l.weight);
            out.push_back(&l.bias);
        }
    for (DenseLayer& d : hidden_) {
        out.push_back(&d.weight);
        out.push_back(&d.bias);
    }
    out.push_back(&classifier_.weight);
    out.push_back(&classifier_.bias);
    return out;
}

std::vector<const ParamTensor*> Network::params() const {
    auto mutable_params = const_cast<Network*>(this)->params();
    return {mutable_params.begin(), mutable_params.end()};
}

ParamTensor& Network::param(const std::string& id) {
    for (ParamTensor* p : params())
        if (p->id == id) return *p;
    throw Error("no parameter with id '" + id + "'");
}

std::size_t Network::parameter_count() const {
    std::size_t total = 0;
    for (const ParamTensor* p : params()) total += p->value.size();
    return total;
}

std::vector<Tensor> Network::route(const Tensor& batch) const {
    const Shape& s = batch.shape();
    require_shape("network input", Shape{s.n, spec_.in_channels, spec_.in_height, spec_.in_width}, s);
    switch (spec_.vertex) {
    case Vertex::v1:
    case Vertex::v5: return {batch};
    case Vertex::v6: return std::vector<Tensor>(spec_.n_streams, batch);
    case Vertex::v7: return {pack_slices(batch, *spec_.slice_spec, spec_.membership)};
    case Vertex::v8: return slice_image(batch, *spec_.slice_spec, spec_.membership);
    }
    throw Error("unreachable vertex");
}

Tensor Network::forward_stream(std::size_t stream, const Tensor& input, StreamCache* cache) const {
    const Stream& st = streams_.at(stream);
    Tensor x = input;
    if (cache != nullptr) {
        cache->conv.assign(st.convs.size(), {});
        cache->pre_activation.assign(st.convs.size(), {});
        cache->pool.assign(st.convs.size(), {});
    }
    for (std::size_t l = 0; l < st.convs.size(); ++l) {
        const ConvLayer& layer = st.convs[l];
        Tensor z = conv2d(x, layer.weight.value, layer.bias.value.data(), layer.padding,
                          cache != nullptr ? &cache->conv[l] : nullptr);
        Tensor a = relu(z);
        if (cache != nullptr) cache->pre_activation[l] = std::move(z);
        x = maxpool2x2(a, cache != nullptr ? &cache->pool[l] : nullptr);
    }
    if (cache != nullptr) cache->output_shape = x.shape();
    return x;
}

Tensor Network::forward(const Tensor& batch, Mode mode, ForwardCache* cache) const {
    const auto inputs = route(batch);
    return forward_routed(inputs, mode, cache);
}

Tensor Network::forward_routed(std::span<const Tensor> inputs, Mode /*mode*/, ForwardCache* cache) const {
    if (inputs.size() != streams_.size()) {
        throw ShapeError("forward stream inputs", std::to_string(streams_.size()), std::to_string(inputs.size()));
    }
    const std::size_t expected_c = spec_.stream_in_channels();
    for (const Tensor& in : inputs) {
        const Shape& s = in.shape();
        require_shape("stream input", Shape{inputs.front().shape().n, expected_c, spec_.in_height, spec_.in_width}, s);
    }
    std::vector<Tensor> outputs(streams_.size());
    if (cache != nullptr) cache->streams.assign(streams_.size(), {});
    for_each_stream(streams_.size(), stream_threads_, [&](std::size_t i) {
        outputs[i] = forward_stream(i, inputs[i], cache != nullptr ? &cache->streams[i] : nullptr);
    });
    Tensor x = concat_features(outputs);
    if (cache != nullptr) {
        cache->dense.assign(hidden_.size(), {});
        cache->dense_pre_activation.assign(hidden_.size(), {});
    }
    for (std::size_t j = 0; j < hidden_.size(); ++j) {
        Tensor z = linear(x, hidden_[j].weight.value, hidden_[j].bias.value.data(),
                          cache != nullptr ? &cache->dense[j] : nullptr);
        x = relu(z);
        if (cache != nullptr) cache->dense_pre_activation[j] = std::move(z);
    }
    return linear(x, classifier_.weight.value, classifier_.bias.value.data(),
                  cache != nullptr ? &cache->classifier : nullptr);
}

void Network::backward_stream(std::size_t stream, const StreamCache& cache, const Tensor& grad_out) {
    Stream& st = streams_.at(stream);
    Tensor g = grad_out;
    for (std::size_t l = st.convs.size(); l-- > 0;) {
        g = maxpool2x2_backward(cache.pool[l], g);
        g = relu_backward(cache.pre_activation[l], g);
        // The first layer's input is data; its gradient is never needed.
        auto grads = conv2d_backward(cache.conv[l], g, l > 0);
        accumulate(st.convs[l].weight, grads.weight.data());
        accumulate(st.convs[l].bias, grads.bias);
        g = std::move(grads.input);
    }
}

void Network::backward(const ForwardCache& cache, const Tensor& grad_logits) {
    if (cache.streams.size() != streams_.size() || !cache.classifier.valid) {
        throw Error("Network::backward: forward cache is missing or from another network");
    }
    auto cg = linear_backward(cache.classifier, grad_logits);
    accumulate(classifier_.weight, cg.weight.data());
    accumulate(classifier_.bias, cg.bias);
    Tensor g = std::move(cg.input);
    for (std::size_t j = hidden_.size(); j-- > 0;) {
        g = relu_backward(cache.dense_pre_activation[j], g);
        auto dg = linear_backward(cache.dense[j], g);
        accumulate(hidden_[j].weight, dg.weight.data());
        accumulate(hidden_[j].bias, dg.bias);
        g = std::move(dg.input);
    }
    std::vector<Shape> shapes;
    shapes.reserve(cache.streams.size());
    for (const StreamCache& sc : cache.streams) shapes.push_back(sc.output_shape);
    const auto parts = split_features(g, shapes);
    for_each_stream(streams_.size(), stream_threads_,
                    [&](std::size_t i) { backward_stream(i, cache.streams[i], parts[i]); });
}

void Network::zero_grad() {
    for (ParamTensor* p : params()) p->zero_grad();
}

Network build_network(const NetworkSpec& spec) {
    switch (spec.vertex) {
    case Vertex::v1: return build_v1(spec);
    case Vertex::v5: return build_v5(spec);
    case Vertex::v6: return build_v6(spec);
    case Vertex::v7: return build_v7(spec);
    case Vertex::v8: return build_v8(spec);
    }
    throw Error("unreachable vertex");
}

namespace {
void expect_vertex(const NetworkSpec& spec, Vertex v) {
    if (spec.vertex != v) {
        throw Error("build_" + vertex_name(v) + " called with vertex " + vertex_name(spec.vertex));
    }
}
} // namespace

Network build_v1(NetworkSpec spec) {
    expect_vertex(spec, Vertex::v1);
    return Network(std::move(spec));
}

Network build_v5(NetworkSpec spec) {
    expect_vertex(spec, Vertex::v5);
    return Network(std::move(spec));
}

Network build_v6(NetworkSpec spec) {
    expect_vertex(spec, Vertex::v6);
    return Network(std::move(spec));
}

Network build_v7(NetworkSpec spec) {
    expect_vertex(spec, Vertex::v7);
    return Network(std::move(spec));
}

Network build_v8(NetworkSpec spec) {
    expect_vertex(spec, Vertex::v8);
    return Network(std::move(spec));
}

} // namespace streamnet
