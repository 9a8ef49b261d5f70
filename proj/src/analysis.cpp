#include "streamnet/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "streamnet/training_log.hpp"

namespace streamnet {

namespace {

void append_channel(const ConvLayer& conv, std::size_t channel, std::vector<double>& out) {
    const Shape& s = conv.weight.value.shape();
    const std::size_t plane = s.h * s.w;
    for (std::size_t o = 0; o < s.n; ++o) {
        const auto src = conv.weight.value.data().subspan((o * s.c + channel) * plane, plane);
        out.insert(out.end(), src.begin(), src.end());
    }
}

std::vector<std::size_t> stream_channels(const Network& net, std::size_t channel) {
    const NetworkSpec& spec = net.spec();
    if (channel >= spec.in_channels) {
        throw Error("channel " + std::to_string(channel) + " out of range for " + std::to_string(spec.in_channels) +
                    "-channel input");
    }
    if (spec.vertex != Vertex::v7) return {channel};
    std::vector<std::size_t> out;
    const std::size_t blocks = spec.stream_in_channels() / spec.in_channels;
    for (std::size_t b = 0; b < blocks; ++b) out.push_back(b * spec.in_channels + channel);
    return out;
}

} // namespace

std::vector<double> collect_stream_weights(const Network& net, std::size_t stream, std::size_t channel) {
    const auto channels = stream_channels(net, channel);
    if (stream >= net.streams().size()) throw Error("stream " + std::to_string(stream) + " out of range");
    std::vector<double> out;
    for (std::size_t ch : channels) append_channel(net.streams()[stream].convs.front(), ch, out);
    return out;
}

std::vector<double> collect_first_layer_weights(const Network& net, std::size_t channel) {
    std::vector<double> out;
    for (std::size_t s = 0; s < net.streams().size(); ++s) {
        const auto part = collect_stream_weights(net, s, channel);
        out.insert(out.end(), part.begin(), part.end());
    }
    return out;
}

std::vector<double> collect_all_first_layer_weights(const Network& net) {
    std::vector<double> out;
    for (const Stream& s : net.streams()) {
        const auto w = s.convs.front().weight.value.data();
        out.insert(out.end(), w.begin(), w.end());
    }
    return out;
}

Histogram histogram(std::span<const double> values, std::size_t bins, double lo, double hi) {
    if (bins < 2) throw Error("histogram needs at least 2 bins");
    if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) throw Error("histogram range must satisfy lo < hi");
    if (values.empty()) throw Error("histogram of an empty value list");
    Histogram h;
    h.edges.resize(bins + 1);
    const double width = (hi - lo) / static_cast<double>(bins);
    for (std::size_t i = 0; i <= bins; ++i) h.edges[i] = lo + width * static_cast<double>(i);
    h.edges.back() = hi;
    h.counts.assign(bins, 0);
    for (double v : values) {
        if (!std::isfinite(v) || v < lo || v > hi) {
            throw Error("value " + format_double(v) + " outside histogram range [" + format_double(lo) + ", " +
                        format_double(hi) + "]");
        }
        auto b = static_cast<std::size_t>((v - lo) / width);
        // Float division can land one bin off near an edge; settle it against the stored edges.
        if (b >= bins) b = bins - 1;
        while (b > 0 && v < h.edges[b]) --b;
        while (b + 1 < bins && v >= h.edges[b + 1]) ++b;
        ++h.counts[b];
    }
    h.total = values.size();
    return h;
}

double kl_divergence(const Histogram& p, std::size_t q_bins, double alpha) {
    if (p.bins() != q_bins) {
        throw Error("kl_divergence: histogram has " + std::to_string(p.bins()) + " bins, reference has " +
                    std::to_string(q_bins));
    }
    if (!(alpha >= 0.0)) throw Error("kl_divergence: smoothing must be non-negative");
    const double b = static_cast<double>(q_bins);
    const double denom = static_cast<double>(p.total) + alpha * b;
    if (!(denom > 0.0)) throw Error("kl_divergence: empty histogram without smoothing");
    double kl = 0.0;
    for (std::size_t c : p.counts) {
        const double pi = (static_cast<double>(c) + alpha) / denom;
        if (pi > 0.0) kl += pi * std::log(pi * b);
    }
    return std::max(kl, 0.0);
}

std::string channel_label(std::size_t channel, std::size_t channels) {
    if (channels == 3) return std::string(1, "rgb"[channel]);
    return std::to_string(channel);
}

const KLRow& KLReport::find(const std::string& tag, const std::string& channel) const {
    for (const KLRow& r : rows)
        if (r.tag == tag && r.channel == channel) return r;
    throw Error("no KL row for tag '" + tag + "', channel '" + channel + "'");
}

KLReport diversity_report(const std::vector<std::pair<std::string, const Network*>>& nets,
                          const DiversityOptions& options) {
    if (nets.empty()) throw Error("diversity_report: no networks");
    const std::size_t channels = nets.front().second->spec().in_channels;
    for (const auto& [tag, net] : nets) {
        if (net->spec().in_channels != channels) {
            throw Error("diversity_report: '" + tag + "' has " + std::to_string(net->spec().in_channels) +
                        " input channels, '" + nets.front().first + "' has " + std::to_string(channels) +
                        "; histograms would not align");
        }
    }
    double a = 0.0;
    if (options.range) {
        a = *options.range;
    } else {
        for (const auto& [tag, net] : nets)
            for (double w : collect_all_first_layer_weights(*net)) a = std::max(a, std::abs(w));
    }
    if (!(a > 0.0)) throw Error("diversity_report: histogram range collapsed to zero");

    KLReport report;
    auto add = [&](const std::string& tag, const std::string& channel, const std::vector<double>& values) {
        Histogram h = histogram(values, options.bins, -a, a);
        report.rows.push_back(
            KLRow{tag, channel, options.bins, options.alpha, kl_divergence(h, options.bins, options.alpha), h.total, -a, a});
        report.histograms.emplace_back(tag + "/" + channel, std::move(h));
    };
    for (const auto& [tag, net] : nets) {
        for (std::size_t c = 0; c < channels; ++c) add(tag, channel_label(c, channels), collect_first_layer_weights(*net, c));
        add(tag, "all", collect_all_first_layer_weights(*net));
        if (options.per_stream && net->streams().size() > 1) {
            for (std::size_t s = 0; s < net->streams().size(); ++s) {
                std::vector<double> pooled;
                for (std::size_t c = 0; c < channels; ++c) {
                    const auto part = collect_stream_weights(*net, s, c);
                    add(tag, "stream" + std::to_string(s) + ":" + channel_label(c, channels), part);
                    pooled.insert(pooled.end(), part.begin(), part.end());
                }
                add(tag, "stream" + std::to_string(s) + ":all", pooled);
            }
        }
    }
    return report;
}

std::string kl_report_csv(const KLReport& report) {
    std::ostringstream os;
    os << kKLHeader << '\n';
    for (const KLRow& r : report.rows) {
        os << r.tag << ',' << r.channel << ',' << r.bins << ',' << format_double(r.alpha) << ',' << format_double(r.kl)
           << '\n';
    }
    return os.str();
}

std::string histogram_csv(const Histogram& h) {
    std::ostringstream os;
    os << "bin,lo,hi,count\n";
    for (std::size_t i = 0; i < h.bins(); ++i) {
        os << i << ',' << format_double(h.edges[i]) << ',' << format_double(h.edges[i + 1]) << ',' << h.counts[i]
           << '\n';
    }
    return os.str();
}

} // namespace streamnet
