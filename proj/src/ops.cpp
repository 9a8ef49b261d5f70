#include "streamnet/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace streamnet {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

struct ConvGeometry {
    std::size_t in_c, in_h, in_w;
    std::size_t out_c, kh, kw, pad;
    std::size_t out_h, out_w;

    std::size_t patch() const { return in_c * kh * kw; }
    std::size_t pixels() const { return out_h * out_w; }
    bool pointwise() const { return kh == 1 && kw == 1 && pad == 0; }
};

ConvGeometry conv_geometry(const Shape& in, const Shape& weight, std::size_t padding) {
    if (weight.c != in.c) {
        throw ShapeError("conv2d input channels", std::to_string(weight.c) + " (weight inC)",
                         std::to_string(in.c) + " in input " + in.str());
    }
    if (in.h + 2 * padding < weight.h || in.w + 2 * padding < weight.w) {
        throw ShapeError("conv2d kernel",
                         "kernel no larger than padded input " + std::to_string(in.h + 2 * padding) +
                             "x" + std::to_string(in.w + 2 * padding),
                         std::to_string(weight.h) + "x" + std::to_string(weight.w));
    }
    return ConvGeometry{in.c,     in.h,     in.w,
                        weight.n, weight.h, weight.w,
                        padding,  in.h + 2 * padding - weight.h + 1,
                        in.w + 2 * padding - weight.w + 1};
}

// Row (ci, ky, kx), column (oy, ox) of the patch matrix.
void im2col(std::span<const double> image, const ConvGeometry& g, double* cols) {
    const auto pad = static_cast<std::ptrdiff_t>(g.pad);
    const auto ih = static_cast<std::ptrdiff_t>(g.in_h);
    const auto iw = static_cast<std::ptrdiff_t>(g.in_w);
    const auto ow = static_cast<std::ptrdiff_t>(g.out_w);
    for (std::size_t ci = 0; ci < g.in_c; ++ci) {
        const double* plane = image.data() + ci * g.in_h * g.in_w;
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
            for (std::size_t kx = 0; kx < g.kw; ++kx) {
                const auto dx = static_cast<std::ptrdiff_t>(kx) - pad;
                const std::ptrdiff_t x_lo = std::clamp<std::ptrdiff_t>(-dx, 0, ow);
                const std::ptrdiff_t x_hi = std::clamp<std::ptrdiff_t>(iw - dx, 0, ow);
                for (std::size_t oy = 0; oy < g.out_h; ++oy) {
                    const auto iy = static_cast<std::ptrdiff_t>(oy + ky) - pad;
                    double* row = cols + oy * g.out_w;
                    if (iy < 0 || iy >= ih) {
                        std::fill(row, row + g.out_w, 0.0);
                        continue;
                    }
                    const double* src = plane + iy * iw;
                    std::fill(row, row + x_lo, 0.0);
                    for (std::ptrdiff_t ox = x_lo; ox < x_hi; ++ox) row[ox] = src[ox + dx];
                    std::fill(row + std::max(x_hi, x_lo), row + ow, 0.0);
                }
                cols += g.pixels();
            }
        }
    }
}

void col2im_add(const double* cols, const ConvGeometry& g, std::span<double> image) {
    const auto pad = static_cast<std::ptrdiff_t>(g.pad);
    const auto ih = static_cast<std::ptrdiff_t>(g.in_h);
    const auto iw = static_cast<std::ptrdiff_t>(g.in_w);
    const auto ow = static_cast<std::ptrdiff_t>(g.out_w);
    for (std::size_t ci = 0; ci < g.in_c; ++ci) {
        double* plane = image.data() + ci * g.in_h * g.in_w;
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
            for (std::size_t kx = 0; kx < g.kw; ++kx) {
                const auto dx = static_cast<std::ptrdiff_t>(kx) - pad;
                const std::ptrdiff_t x_lo = std::clamp<std::ptrdiff_t>(-dx, 0, ow);
                const std::ptrdiff_t x_hi = std::clamp<std::ptrdiff_t>(iw - dx, 0, ow);
                for (std::size_t oy = 0; oy < g.out_h; ++oy) {
                    const auto iy = static_cast<std::ptrdiff_t>(oy + ky) - pad;
                    if (iy < 0 || iy >= ih) continue;
                    const double* row = cols + oy * g.out_w;
                    double* dst = plane + iy * iw;
                    for (std::ptrdiff_t ox = x_lo; ox < x_hi; ++ox) dst[ox + dx] += row[ox];
                }
                cols += g.pixels();
            }
        }
    }
}

void check_bias(const char* what, std::span<const double> bias, std::size_t expected) {
    if (bias.size() != expected) {
        throw ShapeError(what, std::to_string(expected) + " bias entries",
                         std::to_string(bias.size()));
    }
}

} // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight, std::span<const double> bias,
              std::size_t padding, Conv2dContext* ctx) {
    const ConvGeometry g = conv_geometry(input.shape(), weight.shape(), padding);
    check_bias("conv2d bias", bias, g.out_c);
    const std::size_t n = input.shape().n;
    Tensor out(Shape{n, g.out_c, g.out_h, g.out_w});

    const ConstMatMap w(weight.data().data(), static_cast<Eigen::Index>(g.out_c),
                        static_cast<Eigen::Index>(g.patch()));
    const auto P = static_cast<Eigen::Index>(g.pixels());
    const auto K = static_cast<Eigen::Index>(g.patch());
    RowMat cols(g.pointwise() ? 0 : K, g.pointwise() ? 0 : P);
    for (std::size_t b = 0; b < n; ++b) {
        MatMap o(out.item(b).data(), static_cast<Eigen::Index>(g.out_c), P);
        if (g.pointwise()) {
            o.noalias() = w * ConstMatMap(input.item(b).data(), K, P);
        } else {
            im2col(input.item(b), g, cols.data());
            o.noalias() = w * cols;
        }
        for (std::size_t oc = 0; oc < g.out_c; ++oc) o.row(static_cast<Eigen::Index>(oc)).array() += bias[oc];
    }
    if (ctx != nullptr) {
        ctx->input = input;
        ctx->weight = weight;
        ctx->padding = padding;
        ctx->valid = true;
    }
    return out;
}

Conv2dGrads conv2d_backward(const Conv2dContext& ctx, const Tensor& grad_out, bool input_grad) {
    if (!ctx.valid) throw Error("conv2d_backward: missing forward context");
    const ConvGeometry g = conv_geometry(ctx.input.shape(), ctx.weight.shape(), ctx.padding);
    const std::size_t n = ctx.input.shape().n;
    require_shape("conv2d_backward grad_out", Shape{n, g.out_c, g.out_h, g.out_w}, grad_out.shape());

    Conv2dGrads grads{input_grad ? Tensor::zeros_like(ctx.input) : Tensor{}, Tensor::zeros_like(ctx.weight),
                      std::vector<double>(g.out_c, 0.0)};
    const auto P = static_cast<Eigen::Index>(g.pixels());
    const auto K = static_cast<Eigen::Index>(g.patch());
    const auto OC = static_cast<Eigen::Index>(g.out_c);
    const ConstMatMap w(ctx.weight.data().data(), OC, K);
    MatMap gw(grads.weight.data().data(), OC, K);
    RowMat cols(K, P);
    RowMat gcols(K, P);
    for (std::size_t b = 0; b < n; ++b) {
        const ConstMatMap go(grad_out.item(b).data(), OC, P);
        if (g.pointwise()) {
            const ConstMatMap x(ctx.input.item(b).data(), K, P);
            gw.noalias() += go * x.transpose();
            if (input_grad) MatMap(grads.input.item(b).data(), K, P).noalias() = w.transpose() * go;
        } else {
            im2col(ctx.input.item(b), g, cols.data());
            gw.noalias() += go * cols.transpose();
            if (input_grad) {
                gcols.noalias() = w.transpose() * go;
                col2im_add(gcols.data(), g, grads.input.item(b));
            }
        }
        // Plain loop: Eigen's vectorized sum depends on buffer alignment, which would make
        // gradients differ by an ulp between otherwise identical runs.
        const double* gp = grad_out.item(b).data();
        for (std::size_t oc = 0; oc < g.out_c; ++oc) {
            double acc = 0.0;
            for (Eigen::Index q = 0; q < P; ++q) acc += gp[oc * static_cast<std::size_t>(P) + static_cast<std::size_t>(q)];
            grads.bias[oc] += acc;
        }
    }
    return grads;
}

Tensor conv2d_direct(const Tensor& input, const Tensor& weight, std::span<const double> bias,
                     std::size_t padding) {
    const ConvGeometry g = conv_geometry(input.shape(), weight.shape(), padding);
    check_bias("conv2d bias", bias, g.out_c);
    const std::size_t n = input.shape().n;
    Tensor out(Shape{n, g.out_c, g.out_h, g.out_w});
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t oc = 0; oc < g.out_c; ++oc)
            for (std::size_t oy = 0; oy < g.out_h; ++oy)
                for (std::size_t ox = 0; ox < g.out_w; ++ox) {
                    double acc = bias[oc];
                    for (std::size_t ci = 0; ci < g.in_c; ++ci)
                        for (std::size_t ky = 0; ky < g.kh; ++ky)
                            for (std::size_t kx = 0; kx < g.kw; ++kx) {
                                const auto iy = static_cast<std::ptrdiff_t>(oy + ky) -
                                                static_cast<std::ptrdiff_t>(padding);
                                const auto ix = static_cast<std::ptrdiff_t>(ox + kx) -
                                                static_cast<std::ptrdiff_t>(padding);
                                if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(g.in_h) ||
                                    ix >= static_cast<std::ptrdiff_t>(g.in_w))
                                    continue;
                                acc += input.at(b, ci, static_cast<std::size_t>(iy),
                                                static_cast<std::size_t>(ix)) *
                                       weight.at(oc, ci, ky, kx);
                            }
                    out.at(b, oc, oy, ox) = acc;
                }
    return out;
}

Tensor relu(const Tensor& input) {
    Tensor out = Tensor::zeros_like(input);
    auto src = input.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] > 0.0 ? src[i] : 0.0;
    return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& grad_out) {
    require_shape("relu_backward grad_out", input.shape(), grad_out.shape());
    Tensor out = Tensor::zeros_like(input);
    auto x = input.data();
    auto g = grad_out.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < x.size(); ++i) dst[i] = x[i] > 0.0 ? g[i] : 0.0;
    return out;
}

Tensor maxpool2x2(const Tensor& input, MaxPoolContext* ctx) {
    const Shape& s = input.shape();
    const Shape os{s.n, s.c, (s.h + 1) / 2, (s.w + 1) / 2};
    Tensor out(os);
    std::vector<std::size_t> argmax(ctx != nullptr ? os.size() : 0);
    std::size_t o = 0;
    for (std::size_t b = 0; b < s.n; ++b)
        for (std::size_t c = 0; c < s.c; ++c)
            for (std::size_t oy = 0; oy < os.h; ++oy)
                for (std::size_t ox = 0; ox < os.w; ++ox, ++o) {
                    double best = std::numeric_limits<double>::lowest();
                    std::size_t best_idx = input.index(b, c, 2 * oy, 2 * ox);
                    bool first = true;
                    for (std::size_t dy = 0; dy < 2; ++dy)
                        for (std::size_t dx = 0; dx < 2; ++dx) {
                            const std::size_t y = 2 * oy + dy;
                            const std::size_t x = 2 * ox + dx;
                            // Padded positions hold the lowest value and never beat a real entry.
                            if (y >= s.h || x >= s.w) continue;
                            const std::size_t idx = input.index(b, c, y, x);
                            if (first || input[idx] > best) {
                                best = input[idx];
                                best_idx = idx;
                                first = false;
                            }
                        }
                    out[o] = best;
                    if (ctx != nullptr) argmax[o] = best_idx;
                }
    if (ctx != nullptr) {
        ctx->input_shape = s;
        ctx->argmax = std::move(argmax);
        ctx->valid = true;
    }
    return out;
}

Tensor maxpool2x2_backward(const MaxPoolContext& ctx, const Tensor& grad_out) {
    if (!ctx.valid) throw Error("maxpool2x2_backward: missing forward context");
    const Shape& s = ctx.input_shape;
    require_shape("maxpool2x2_backward grad_out", Shape{s.n, s.c, (s.h + 1) / 2, (s.w + 1) / 2},
                  grad_out.shape());
    Tensor grad_in(s);
    for (std::size_t o = 0; o < ctx.argmax.size(); ++o) grad_in[ctx.argmax[o]] += grad_out[o];
    return grad_in;
}

Tensor linear(const Tensor& input, const Tensor& weight, std::span<const double> bias,
              LinearContext* ctx) {
    const std::size_t n = input.shape().n;
    const std::size_t d = input.shape().item_size();
    const Shape& ws = weight.shape();
    if (ws.n != d || ws.h != 1 || ws.w != 1) {
        throw ShapeError("linear weight", "(" + std::to_string(d) + ", m, 1, 1)", ws.str());
    }
    const std::size_t m = ws.c;
    check_bias("linear bias", bias, m);
    Tensor out(Shape{n, m, 1, 1});
    const ConstMatMap x(input.data().data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    const ConstMatMap w(weight.data().data(), static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(m));
    MatMap y(out.data().data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
    y.noalias() = x * w;
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t j = 0; j < m; ++j) y(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(j)) += bias[j];
    if (ctx != nullptr) {
        ctx->input = input;
        ctx->weight = weight;
        ctx->valid = true;
    }
    return out;
}

LinearGrads linear_backward(const LinearContext& ctx, const Tensor& grad_out) {
    if (!ctx.valid) throw Error("linear_backward: missing forward context");
    const auto n = static_cast<Eigen::Index>(ctx.input.shape().n);
    const auto d = static_cast<Eigen::Index>(ctx.input.shape().item_size());
    const auto m = static_cast<Eigen::Index>(ctx.weight.shape().c);
    require_shape("linear_backward grad_out",
                  Shape{ctx.input.shape().n, static_cast<std::size_t>(m), 1, 1}, grad_out.shape());
    LinearGrads grads{Tensor::zeros_like(ctx.input), Tensor::zeros_like(ctx.weight),
                      std::vector<double>(static_cast<std::size_t>(m), 0.0)};
    const ConstMatMap x(ctx.input.data().data(), n, d);
    const ConstMatMap w(ctx.weight.data().data(), d, m);
    const ConstMatMap go(grad_out.data().data(), n, m);
    MatMap(grads.weight.data().data(), d, m).noalias() = x.transpose() * go;
    MatMap(grads.input.data().data(), n, d).noalias() = go * w.transpose();
    for (Eigen::Index b = 0; b < n; ++b)
        for (Eigen::Index j = 0; j < m; ++j) grads.bias[static_cast<std::size_t>(j)] += go(b, j);
    return grads;
}

SoftmaxCrossEntropy softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
    const std::size_t n = logits.shape().n;
    const std::size_t k = logits.shape().item_size();
    if (labels.size() != n) {
        throw ShapeError("softmax_cross_entropy labels", std::to_string(n),
                         std::to_string(labels.size()));
    }
    SoftmaxCrossEntropy r{0.0, Tensor::zeros_like(logits), Tensor::zeros_like(logits)};
    for (std::size_t b = 0; b < n; ++b) {
        const int label = labels[b];
        if (label < 0 || static_cast<std::size_t>(label) >= k) {
            throw Error("softmax_cross_entropy: label " + std::to_string(label) +
                        " outside [0, " + std::to_string(k) + ")");
        }
        auto z = logits.item(b);
        auto p = r.probs.item(b);
        const double zmax = *std::max_element(z.begin(), z.end());
        double denom = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            p[j] = std::exp(z[j] - zmax);
            denom += p[j];
        }
        for (std::size_t j = 0; j < k; ++j) p[j] /= denom;
        // log p_label computed from the shifted logits avoids log(0) on saturation.
        r.loss += -((z[static_cast<std::size_t>(label)] - zmax) - std::log(denom));
        auto g = r.grad_logits.item(b);
        for (std::size_t j = 0; j < k; ++j) {
            g[j] = (p[j] - (j == static_cast<std::size_t>(label) ? 1.0 : 0.0)) / static_cast<double>(n);
        }
    }
    r.loss /= static_cast<double>(n);
    return r;
}

Tensor concat_features(std::span<const Tensor> parts) {
    if (parts.empty()) throw Error("concat_features: no parts");
    const std::size_t n = parts.front().shape().n;
    std::size_t total = 0;
    for (const Tensor& p : parts) {
        if (p.shape().n != n) {
            throw ShapeError("concat_features batch", std::to_string(n), std::to_string(p.shape().n));
        }
        total += p.shape().item_size();
    }
    Tensor out(Shape{n, total, 1, 1});
    for (std::size_t b = 0; b < n; ++b) {
        auto dst = out.item(b).begin();
        for (const Tensor& p : parts) dst = std::copy(p.item(b).begin(), p.item(b).end(), dst);
    }
    return out;
}

std::vector<Tensor> split_features(const Tensor& joined, std::span<const Shape> shapes) {
    const std::size_t n = joined.shape().n;
    std::size_t total = 0;
    for (const Shape& s : shapes) total += s.item_size();
    require_shape("split_features", Shape{n, total, 1, 1}, joined.shape());
    std::vector<Tensor> out;
    out.reserve(shapes.size());
    for (const Shape& s : shapes) out.emplace_back(s);
    for (std::size_t b = 0; b < n; ++b) {
        auto src = joined.item(b).begin();
        for (Tensor& t : out) {
            auto dst = t.item(b);
            std::copy(src, src + static_cast<std::ptrdiff_t>(dst.size()), dst.begin());
            src += static_cast<std::ptrdiff_t>(dst.size());
        }
    }
    return out;
}

Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x,
                                  double step) {
    Tensor grad = Tensor::zeros_like(x);
    Tensor probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = x[i];
        probe[i] = orig + step;
        const double up = f(probe);
        probe[i] = orig - step;
        const double down = f(probe);
        probe[i] = orig;
        grad[i] = (up - down) / (2.0 * step);
    }
    return grad;
}

} // namespace streamnet
