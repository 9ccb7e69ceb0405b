#include "sgm/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace sgm {

OptimizerConfig OptimizerConfig::sgd(float lr, float momentum) {
    OptimizerConfig c;
    c.kind = Kind::sgd_momentum;
    c.lr = lr;
    c.momentum = momentum;
    return c;
}

OptimizerConfig OptimizerConfig::adam(float lr) {
    OptimizerConfig c;
    c.kind = Kind::adam;
    c.lr = lr;
    return c;
}

void sgd_momentum_step(std::span<float> params, std::span<const float> grads,
                       std::span<float> velocity, float lr, float momentum) {
    if (params.size() != grads.size() || params.size() != velocity.size()) {
        throw std::invalid_argument("sgd_momentum_step: size mismatch");
    }
    if (!(lr > 0.0f)) {
        throw std::invalid_argument("sgd_momentum_step: lr must be positive");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        velocity[i] = momentum * velocity[i] + grads[i];
        params[i] -= lr * velocity[i];
    }
}

void adam_step(std::span<float> params, std::span<const float> grads,
               std::span<float> m, std::span<float> v, std::int64_t t,
               float lr, float beta1, float beta2, float epsilon) {
    if (params.size() != grads.size() || params.size() != m.size() || params.size() != v.size()) {
        throw std::invalid_argument("adam_step: size mismatch");
    }
    if (t < 1) {
        throw std::invalid_argument("adam_step: step count must be >= 1");
    }
    const float bc1 = 1.0f - std::pow(beta1, float(t));
    const float bc2 = 1.0f - std::pow(beta2, float(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        m[i] = beta1 * m[i] + (1.0f - beta1) * grads[i];
        v[i] = beta2 * v[i] + (1.0f - beta2) * grads[i] * grads[i];
        const float mhat = m[i] / bc1;
        const float vhat = v[i] / bc2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + epsilon);
    }
}

void Optimizer::step(std::int64_t slot, std::span<float> params, std::span<const float> grads) {
    Slot& s = slots_[slot];
    if (s.v.empty()) {
        s.v.assign(params.size(), 0.0f);
        if (cfg_.kind == OptimizerConfig::Kind::adam) {
            s.m.assign(params.size(), 0.0f);
        }
    }
    if (s.v.size() != params.size()) {
        throw std::invalid_argument("Optimizer::step: slot state does not match parameter size");
    }
    s.t += 1;
    if (cfg_.kind == OptimizerConfig::Kind::sgd_momentum) {
        sgd_momentum_step(params, grads, s.v, cfg_.lr, cfg_.momentum);
    } else {
        adam_step(params, grads, s.m, s.v, s.t, cfg_.lr, cfg_.beta1, cfg_.beta2, cfg_.epsilon);
    }
}

}  // namespace sgm
