#pragma once

#include <cstdint>
#include <vector>

#include "sgm/kernels.hpp"
#include "sgm/model.hpp"
#include "sgm/optim.hpp"
#include "sgm/tensor.hpp"

namespace sgm {

/// Geometry of one Synthetic Gradient Module: conv(C+3 -> H_s, K_s) -> BN ->
/// ReLU -> conv(H_s -> C, K_s), same-padded so the output matches the
/// attached activation shape. The 3 extra input channels carry the label
/// (quality, sine, cosine) broadcast over the spatial extent.
struct SGMConfig {
    int attach_layer = 0;  // index of the conv-BN-ReLU block it serves
    int channels = 0;      // C of that block's activation
    int hidden = 0;        // H_s
    int kernel = 1;        // K_s, odd

    int padding() const { return kernel / 2; }
    std::int64_t param_count() const;

    /// One SGM per layer except the head (which takes its gradient straight
    /// from the loss): 3x3 for layers 1-3, 1x1 for layers 4-5, hidden = C.
    static std::vector<SGMConfig> reference(const ModelConfig& model);
};

struct SGModule {
    SGMConfig config;
    ConvParams conv1;
    BatchNormParams bn;  // zero channels after folding
    ConvParams conv2;
    bool is_static = true;

    std::int64_t param_count() const;
};

/// Deterministic seeded initialization, same fan-in scheme as the model.
SGModule build_sgm(const SGMConfig& config, std::uint64_t seed);

/// Activation with 3 constant label channels appended per sample.
Tensor concat_label_channels(const Tensor& activation, const std::vector<GraspLabel>& labels);

/// Synthetic gradient for the attached activation. Static modules run their
/// BN with eval semantics (a shift and scale); trainable ones use batch
/// statistics and update running stats.
Tensor sgm_forward(SGModule& sgm, const Tensor& activation, const std::vector<GraspLabel>& labels);

/// Forward no-op: downstream layers consume the unmodified activation.
inline const Tensor& sgm_noop_passthrough(const Tensor& activation) { return activation; }

enum class SGMLoss { l1, l2 };

/// One supervised optimizer step pulling sgm_forward toward true_grad under
/// the chosen loss (element mean). Returns the pre-step loss; optionally
/// hands back the pre-step synthetic gradient so callers can reuse it.
float sgm_supervise_step(SGModule& sgm, const Tensor& activation, const std::vector<GraspLabel>& labels,
                         const Tensor& true_grad, SGMLoss loss_kind, Optimizer& opt,
                         Tensor* synthetic_out = nullptr);

/// BN absorbed into conv1; only valid for static modules.
SGModule fold_static_sgm(const SGModule& sgm);

/// Parameter arrays of one SGM in declaration order (for optimizers and IO).
std::vector<ParamView> sgm_param_views(SGModule& sgm);

}  // namespace sgm
