#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "streamnet/network.hpp"

namespace streamnet {

/// First-conv weights reading input channel `channel`, gathered over every stream.
/// For v7 (slice-packed input) the channel's copy in every slice block is included.
std::vector<double> collect_first_layer_weights(const Network& net, std::size_t channel);
/// Same for a single stream.
std::vector<double> collect_stream_weights(const Network& net, std::size_t stream, std::size_t channel);
/// All first-conv weights of the network (every input channel).
std::vector<double> collect_all_first_layer_weights(const Network& net);

struct Histogram {
    std::vector<double> edges;  // bins + 1, strictly increasing
    std::vector<std::size_t> counts;
    std::size_t total = 0;

    std::size_t bins() const noexcept { return counts.size(); }
    double lo() const { return edges.front(); }
    double hi() const { return edges.back(); }
};

/// Equal-width bins over [lo, hi]; bins are left-closed, the last is also right-closed.
/// Values outside [lo, hi] are an error.
Histogram histogram(std::span<const double> values, std::size_t bins, double lo, double hi);

/// D_KL(p || uniform) with natural log; p_i = (count_i + alpha) / (total + alpha * B).
/// alpha = 0 is allowed when every bin is occupied or as a limit (empty bins contribute 0).
double kl_divergence(const Histogram& p, std::size_t q_bins, double alpha);

struct KLRow {
    std::string tag;
    std::string channel;  // "r"/"g"/"b" or index, "all", or "stream{i}:{channel}"
    std::size_t bins = 0;
    double alpha = 0.0;
    double kl = 0.0;
    std::size_t weights = 0;
    double lo = 0.0;
    double hi = 0.0;
};

struct KLReport {
    std::vector<KLRow> rows;
    std::vector<std::pair<std::string, Histogram>> histograms;  // keyed "{tag}/{channel}"

    /// Row lookup; throws when absent.
    const KLRow& find(const std::string& tag, const std::string& channel) const;
};

struct DiversityOptions {
    std::size_t bins = 50;
    double alpha = 1.0;
    /// Shared symmetric range [-a, a]; computed as max |w| over every network when unset.
    std::optional<double> range;
    bool per_stream = true;
};

/// Per-channel and pooled ("all") KL against uniform for each network, using one
/// histogram range for every network so bins align. Networks must agree on input channels.
KLReport diversity_report(const std::vector<std::pair<std::string, const Network*>>& nets,
                          const DiversityOptions& options = {});

inline constexpr const char* kKLHeader = "tag,channel,bins,alpha,kl";

std::string kl_report_csv(const KLReport& report);
/// `bin,lo,hi,count` for one histogram.
std::string histogram_csv(const Histogram& h);

/// Channel label used in reports: r/g/b for 3-channel input, else the index.
std::string channel_label(std::size_t channel, std::size_t channels);

} // namespace streamnet
