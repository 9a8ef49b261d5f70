#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>

#include "streamnet/network.hpp"
#include "streamnet/tensor.hpp"

namespace streamnet {

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.99;
    double beta2 = 0.9;
    double epsilon = 1e-8;

    /// Conventional defaults (0.9, 0.999) with the same lr and epsilon.
    static AdamConfig conventional() { return AdamConfig{1e-4, 0.9, 0.999, 1e-8}; }
};

struct AdamMoments {
    Tensor m;
    Tensor v;
};

struct AdamState {
    AdamConfig config;
    std::uint64_t t = 0;
    std::map<std::string, AdamMoments> moments;  // keyed by ParamTensor id
};

AdamState adam_init(const Network& net, const AdamConfig& config = {});

/// One bias-corrected Adam update of every parameter from its accumulated gradient.
void adam_step(AdamState& state, Network& net);

/// Same update on an explicit parameter list; used for small problems outside a Network.
void adam_step(AdamState& state, std::span<ParamTensor* const> params);
AdamState adam_init(std::span<const ParamTensor* const> params, const AdamConfig& config = {});

} // namespace streamnet
