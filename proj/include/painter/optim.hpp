#pragma once

#include <cmath>

#include "painter/model.hpp"

namespace painter {

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.05;
};

// First/second moments per parameter tensor plus the step counter.
struct OptimizerState {
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    long step = 0;

    static OptimizerState init(const ParamStore& params) {
        OptimizerState st;
        for (const auto& [_, t] : params.items) {
            st.m.emplace_back(t.shape);
            st.v.emplace_back(t.shape);
        }
        return st;
    }
};

using Grads = std::vector<Tensor>;  // aligned with ParamStore order

// Decoupled-weight-decay Adam with bias correction. Decay skips norm
// affines, biases, positional embeddings and the mask token.
inline void adamw_step(ParamStore& params, const Grads& grads, OptimizerState& state, double lr,
                       const AdamWConfig& cfg = {}) {
    require(grads.size() == params.items.size(), "adamw: gradient count mismatch");
    state.step += 1;
    double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.items.size(); ++i) {
        auto& [name, p] = params.items[i];
        const Tensor& g = grads[i];
        require(g.shape == p.shape, "adamw: gradient shape mismatch for " + name);
        require(all_finite(g), "adamw: non-finite gradient for " + name);
        bool decay = !decay_exempt(name) && cfg.weight_decay > 0.0;
        Tensor& m = state.m[i];
        Tensor& v = state.v[i];
        for (std::size_t k = 0; k < p.data.size(); ++k) {
            double gk = g.data[k];
            double mk = cfg.beta1 * m.data[k] + (1.0 - cfg.beta1) * gk;
            double vk = cfg.beta2 * v.data[k] + (1.0 - cfg.beta2) * gk * gk;
            m.data[k] = static_cast<float>(mk);
            v.data[k] = static_cast<float>(vk);
            double update = (mk / bc1) / (std::sqrt(vk / bc2) + cfg.eps);
            double w = p.data[k];
            if (decay) w -= lr * cfg.weight_decay * w;
            p.data[k] = static_cast<float>(w - lr * update);
        }
    }
}

// Linear warmup to base_lr over warmup_fraction * total steps, then a cosine
// decay to zero.
inline double cosine_lr(long step, long total, double base_lr, double warmup_fraction) {
    require(step >= 0 && step <= total, "cosine_lr: step outside [0, total]");
    require(warmup_fraction >= 0.0 && warmup_fraction < 1.0, "cosine_lr: bad warmup fraction");
    double warmup = warmup_fraction * static_cast<double>(total);
    if (warmup > 0 && step <= warmup) return base_lr * static_cast<double>(step) / warmup;
    if (total == 0) return base_lr;
    double progress = (static_cast<double>(step) - warmup) / (static_cast<double>(total) - warmup);
    return base_lr * 0.5 * (1.0 + std::cos(M_PI * progress));
}

}  // namespace painter
