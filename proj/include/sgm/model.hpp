#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sgm/kernels.hpp"
#include "sgm/tensor.hpp"

namespace sgm {

enum class Activation { none, relu };

struct LayerSpec {
    std::string name;
    int in_channels = 0;
    int out_channels = 0;
    int kernel = 1;
    int stride = 1;
    int padding = 0;
    bool has_bn = false;
    Activation activation = Activation::none;
};

/// The 6-layer fully-convolutional grasp network. Strides carry all
/// downsampling; a 3x128x128 crop reduces to a 3x1x1 head, larger frames
/// produce a lower-resolution heatmap.
struct ModelConfig {
    std::vector<LayerSpec> layers;
    int input_channels = 3;
    int crop_size = 128;

    static ModelConfig reference();

    void validate() const;
    std::string canonical_string() const;
    std::uint64_t digest() const;

    /// Spatial extent chain for a square input, index 0 = input extent.
    std::vector<int> extent_chain(int input_extent) const;
};

struct LayerParams {
    ConvParams conv;
    BatchNormParams bn;  // zero channels when the layer has no BN
};

struct Model {
    ModelConfig config;
    std::vector<LayerParams> layers;

    std::int64_t layer_param_count(int layer) const;
    std::int64_t param_count() const;
};

/// Deterministically initialized weights: He-style fan-in-scaled uniform from
/// a per-layer seed stream, zero biases, identity BN.
Model build_model(const ModelConfig& config, std::uint64_t seed);

/// Mutable view over one parameter array, in declaration order.
struct ParamView {
    float* data;
    std::size_t size;
};

/// Trainable parameters of one layer: conv weight, conv bias, [gamma, beta].
std::vector<ParamView> layer_param_views(Model& m, int layer);
/// Parameters plus BN running stats (checkpointing, snapshots, meta updates).
std::vector<ParamView> layer_state_views(Model& m, int layer);

// --------------------------------------------------------------------------
// Labels and angles. Bipodal gripper: angles live modulo pi, mapped to
// (-pi/2, pi/2]; quality 0 samples carry an angle the loss masks out.
// --------------------------------------------------------------------------

struct GraspLabel {
    float quality = 0.0f;  // 0 or 1
    float angle = 0.0f;    // radians in (-pi/2, pi/2]
};

float wrap_angle(float theta);
std::pair<float, float> encode_angle(float theta);
/// atan2 on (sin, cos); throws on the degenerate (0, 0) pair.
float decode_angle(float s, float c);

// --------------------------------------------------------------------------
// Forward pass
// --------------------------------------------------------------------------

enum class Capture {
    all,       // retain every layer output (BP mode)
    streaming  // retain only the live layer output
};

struct LayerTrace {
    Tensor activation;  // block output a_i (post-BN/ReLU); layer 6: raw head
    BatchStats stats;   // normalization stats used (empty when no BN)
    BNMode bn_mode = BNMode::eval;
};

struct ForwardResult {
    Tensor head_raw;
    std::vector<LayerTrace> trace;        // filled when capture == all
    std::int64_t peak_retained_bytes = 0; // completed layer outputs held at once
};

/// bn_modes selects train/eval semantics per layer (train-mode BN updates the
/// model's running stats, hence the mutable reference).
ForwardResult model_forward(Model& model, const Tensor& batch, Capture capture,
                            const std::vector<BNMode>& bn_modes);

/// Eval-semantics streaming forward; leaves model state untouched.
Tensor model_infer(Model& model, const Tensor& batch);

// --------------------------------------------------------------------------
// Head and loss
// --------------------------------------------------------------------------

/// Channel 0: sigmoid (quality), channel 1: tanh (sine), channel 2: sigmoid
/// (cosine). Works on heads of any spatial extent.
Tensor head_squash(const Tensor& head_raw);

struct LossResult {
    float total = 0.0f;       // batch mean, loss_q + loss_angle
    float loss_q = 0.0f;      // batch mean log loss on quality
    float loss_angle = 0.0f;  // batch mean masked l2 on (sine, cosine)
    Tensor grad_raw;          // gradient of `total` wrt head_raw
};

/// `squashed` must be an (N,3,1,1) crop-mode head.
LossResult grasp_loss(const Tensor& squashed, const std::vector<GraspLabel>& labels);

/// Scalar core of the head loss, shared with the gradient-check suite.
/// raw = (r_q, r_s, r_c); writes loss parts and d(loss_q+loss_angle)/d(raw).
template <typename T>
void head_loss_core(const T raw[3], T quality, T sin_t, T cos_t,
                    T& loss_q, T& loss_angle, T grad_raw[3]) {
    const T qhat = sigmoid_scalar(raw[0]);
    const T shat = std::tanh(raw[1]);
    const T chat = sigmoid_scalar(raw[2]);

    const T eps = T(1e-12);
    loss_q = -(quality * std::log(qhat > eps ? qhat : eps) +
               (T(1) - quality) * std::log(qhat < T(1) - eps ? T(1) - qhat : eps));
    const T ds = shat - sin_t;
    const T dc = chat - cos_t;
    loss_angle = quality * (ds * ds + dc * dc);

    grad_raw[0] = qhat - quality;
    grad_raw[1] = quality * T(2) * ds * (T(1) - shat * shat);
    grad_raw[2] = quality * T(2) * dc * chat * (T(1) - chat);
}

}  // namespace sgm
