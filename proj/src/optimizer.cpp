#include "streamnet/optimizer.hpp"

#include <cmath>

namespace streamnet {

AdamState adam_init(std::span<const ParamTensor* const> params, const AdamConfig& config) {
    AdamState state;
    state.config = config;
    for (const ParamTensor* p : params) {
        if (!state.moments.emplace(p->id, AdamMoments{Tensor::zeros_like(p->value), Tensor::zeros_like(p->value)})
                 .second) {
            throw Error("adam_init: duplicate parameter id '" + p->id + "'");
        }
    }
    return state;
}

AdamState adam_init(const Network& net, const AdamConfig& config) {
    const auto params = net.params();
    return adam_init(std::span<const ParamTensor* const>(params), config);
}

void adam_step(AdamState& state, std::span<ParamTensor* const> params) {
    if (params.size() != state.moments.size()) {
        throw Error("adam_step: state tracks " + std::to_string(state.moments.size()) + " parameters, got " +
                    std::to_string(params.size()));
    }
    for (const ParamTensor* p : params) {
        auto it = state.moments.find(p->id);
        if (it == state.moments.end()) throw Error("adam_step: no optimizer state for '" + p->id + "'");
        if (p->grad.shape() != p->value.shape()) throw Error("adam_step: missing gradient for '" + p->id + "'");
    }
    const AdamConfig& c = state.config;
    state.t += 1;
    const auto t = static_cast<double>(state.t);
    const double correction1 = 1.0 - std::pow(c.beta1, t);
    const double correction2 = 1.0 - std::pow(c.beta2, t);
    for (ParamTensor* p : params) {
        AdamMoments& mo = state.moments.at(p->id);
        auto theta = p->value.data();
        auto g = p->grad.data();
        auto m = mo.m.data();
        auto v = mo.v.data();
        for (std::size_t i = 0; i < theta.size(); ++i) {
            m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
            v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
            const double m_hat = m[i] / correction1;
            const double v_hat = v[i] / correction2;
            theta[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.epsilon);
        }
    }
}

void adam_step(AdamState& state, Network& net) {
    const auto params = net.params();
    adam_step(state, std::span<ParamTensor* const>(params));
}

} // namespace streamnet
