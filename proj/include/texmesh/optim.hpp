#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace texmesh {

struct AdamConfig {
    double lr = 0.002;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// First and second moments for one parameter tensor.
struct AdamState {
    std::vector<double> m, v;
    long step = 0;
};

/// One bias-corrected Adam update, in place.
inline void adam_update(std::span<double> params, std::span<const double> grads, AdamState& st, const AdamConfig& cfg)
{
    if (params.size() != grads.size()) throw std::invalid_argument("adam: parameter/gradient size mismatch");
    if (st.m.size() != params.size()) {
        st.m.assign(params.size(), 0.0);
        st.v.assign(params.size(), 0.0);
        st.step = 0;
    }
    ++st.step;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        st.m[i] = cfg.beta1 * st.m[i] + (1.0 - cfg.beta1) * grads[i];
        st.v[i] = cfg.beta2 * st.v[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
        params[i] -= cfg.lr * (st.m[i] / c1) / (std::sqrt(st.v[i] / c2) + cfg.eps);
    }
}

} // namespace texmesh
