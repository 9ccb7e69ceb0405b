#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace sgm {

struct OptimizerConfig {
    enum class Kind { sgd_momentum, adam };
    Kind kind = Kind::sgd_momentum;
    float lr = 0.1f;
    float momentum = 0.9f;  // sgd-momentum
    float beta1 = 0.9f;     // adam
    float beta2 = 0.999f;
    float epsilon = 1e-8f;

    static OptimizerConfig sgd(float lr, float momentum = 0.9f);
    static OptimizerConfig adam(float lr);
};

/// v <- mu*v + g;  w <- w - lr*v
void sgd_momentum_step(std::span<float> params, std::span<const float> grads,
                       std::span<float> velocity, float lr, float momentum);

/// Bias-corrected Adam update; t is the 1-based step count for this state.
void adam_step(std::span<float> params, std::span<const float> grads,
               std::span<float> m, std::span<float> v, std::int64_t t,
               float lr, float beta1, float beta2, float epsilon);

/// Per-slot optimizer state. A slot identifies one parameter array; its state
/// buffers are created on first use and its step count advances per call, so
/// slots may be stepped in any order without affecting each other.
class Optimizer {
  public:
    explicit Optimizer(OptimizerConfig cfg) : cfg_(cfg) {}

    void step(std::int64_t slot, std::span<float> params, std::span<const float> grads);
    void reset() { slots_.clear(); }
    const OptimizerConfig& config() const { return cfg_; }

  private:
    struct Slot {
        std::vector<float> v;  // sgd velocity / adam second moment
        std::vector<float> m;  // adam first moment
        std::int64_t t = 0;
    };
    OptimizerConfig cfg_;
    std::unordered_map<std::int64_t, Slot> slots_;
};

}  // namespace sgm
