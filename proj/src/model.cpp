#include "sgm/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "sgm/rng.hpp"

namespace sgm {

namespace {

constexpr float kPi = std::numbers::pi_v<float>;
constexpr float kHalfPi = kPi / 2.0f;

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace

ModelConfig ModelConfig::reference() {
    ModelConfig cfg;
    cfg.input_channels = 3;
    cfg.crop_size = 128;
    // Spatial chain on a 128 crop: 128 -> 62 -> 15 -> 7 -> 3 -> 1 -> 1.
    cfg.layers = {
        {"conv1", 3, 8, 5, 2, 0, true, Activation::relu},
        {"conv2", 8, 8, 5, 4, 0, true, Activation::relu},
        {"conv3", 8, 16, 3, 2, 0, true, Activation::relu},
        {"conv4", 16, 16, 3, 2, 0, true, Activation::relu},
        {"conv5", 16, 16, 3, 2, 0, true, Activation::relu},
        {"head", 16, 3, 1, 1, 0, false, Activation::none},
    };
    return cfg;
}

void ModelConfig::validate() const {
    if (layers.empty()) {
        throw std::invalid_argument("model config: no layers");
    }
    int ch = input_channels;
    for (const LayerSpec& l : layers) {
        if (l.in_channels != ch) {
            throw std::invalid_argument("model config: layer " + l.name + " expects " +
                                        std::to_string(l.in_channels) + " input channels, got " +
                                        std::to_string(ch));
        }
        if (l.kernel < 1 || l.stride < 1 || l.padding < 0 || l.out_channels < 1) {
            throw std::invalid_argument("model config: invalid geometry in layer " + l.name);
        }
        ch = l.out_channels;
    }
    const LayerSpec& last = layers.back();
    if (last.has_bn || last.activation != Activation::none) {
        throw std::invalid_argument("model config: the head layer must be raw (no BN, no activation)");
    }
    extent_chain(crop_size);  // throws when a kernel does not fit
}

std::vector<int> ModelConfig::extent_chain(int input_extent) const {
    std::vector<int> chain{input_extent};
    for (const LayerSpec& l : layers) {
        chain.push_back(conv_out_extent(chain.back(), l.kernel, l.stride, l.padding));
    }
    return chain;
}

std::string ModelConfig::canonical_string() const {
    std::string s = "in" + std::to_string(input_channels) + ",crop" + std::to_string(crop_size);
    for (const LayerSpec& l : layers) {
        s += ";" + l.name + ":" + std::to_string(l.in_channels) + ">" + std::to_string(l.out_channels) +
             "k" + std::to_string(l.kernel) + "s" + std::to_string(l.stride) + "p" + std::to_string(l.padding) +
             (l.has_bn ? "+bn" : "") + (l.activation == Activation::relu ? "+relu" : "");
    }
    return s;
}

std::uint64_t ModelConfig::digest() const { return fnv1a(canonical_string()); }

std::int64_t Model::layer_param_count(int layer) const {
    const LayerParams& lp = layers[std::size_t(layer)];
    return lp.conv.param_count() + lp.bn.param_count();
}

std::int64_t Model::param_count() const {
    std::int64_t total = 0;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        total += layer_param_count(int(i));
    }
    return total;
}

Model build_model(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    Model m;
    m.config = config;
    m.layers.reserve(config.layers.size());
    for (std::size_t i = 0; i < config.layers.size(); ++i) {
        const LayerSpec& spec = config.layers[i];
        Rng rng(mix_seed(seed, 0x6d6f64656cull, i));  // per-layer stream
        LayerParams lp;
        lp.conv.weight = Tensor(spec.out_channels, spec.in_channels, spec.kernel, spec.kernel);
        const float fan_in = float(spec.in_channels) * float(spec.kernel) * float(spec.kernel);
        const float bound = std::sqrt(6.0f / fan_in);
        for (float& w : lp.conv.weight.data) {
            w = rng.uniform(-bound, bound);
        }
        lp.conv.bias.assign(std::size_t(spec.out_channels), 0.0f);
        lp.conv.stride = spec.stride;
        lp.conv.padding = spec.padding;
        if (spec.has_bn) {
            lp.bn = BatchNormParams(spec.out_channels);
        }
        m.layers.push_back(std::move(lp));
    }
    return m;
}

std::vector<ParamView> layer_param_views(Model& m, int layer) {
    LayerParams& lp = m.layers[std::size_t(layer)];
    std::vector<ParamView> v;
    v.push_back({lp.conv.weight.data.data(), lp.conv.weight.data.size()});
    v.push_back({lp.conv.bias.data(), lp.conv.bias.size()});
    if (lp.bn.channels() > 0) {
        v.push_back({lp.bn.gamma.data(), lp.bn.gamma.size()});
        v.push_back({lp.bn.beta.data(), lp.bn.beta.size()});
    }
    return v;
}

std::vector<ParamView> layer_state_views(Model& m, int layer) {
    std::vector<ParamView> v = layer_param_views(m, layer);
    LayerParams& lp = m.layers[std::size_t(layer)];
    if (lp.bn.channels() > 0) {
        v.push_back({lp.bn.running_mean.data(), lp.bn.running_mean.size()});
        v.push_back({lp.bn.running_var.data(), lp.bn.running_var.size()});
    }
    return v;
}

float wrap_angle(float theta) {
    float w = std::fmod(theta + kHalfPi, kPi);
    if (w <= 0.0f) {
        w += kPi;
    }
    return w - kHalfPi;
}

std::pair<float, float> encode_angle(float theta) {
    return {std::sin(theta), std::cos(theta)};
}

float decode_angle(float s, float c) {
    if (s == 0.0f && c == 0.0f) {
        throw std::invalid_argument("decode_angle: degenerate (0, 0) input");
    }
    return std::atan2(s, c);
}

ForwardResult model_forward(Model& model, const Tensor& batch, Capture capture,
                            const std::vector<BNMode>& bn_modes) {
    if (batch.c != model.config.input_channels) {
        throw std::invalid_argument("model_forward: batch has " + std::to_string(batch.c) +
                                    " channels, config expects " + std::to_string(model.config.input_channels));
    }
    if (bn_modes.size() != model.layers.size()) {
        throw std::invalid_argument("model_forward: need one BN mode per layer");
    }

    ForwardResult result;
    if (capture == Capture::all) {
        result.trace.resize(model.layers.size());
    }

    std::int64_t retained = 0, peak = 0;
    Tensor current = batch;  // live value fed to the next layer
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        const LayerSpec& spec = model.config.layers[i];
        LayerParams& lp = model.layers[i];

        Tensor z = conv2d_forward(current, lp.conv);
        BatchStats stats;
        if (spec.has_bn) {
            auto [normed, st] = batchnorm_forward(z, lp.bn, bn_modes[i]);
            z = std::move(normed);
            stats = std::move(st);
        }
        if (spec.activation == Activation::relu) {
            z = pointwise(Pointwise::relu, z);
        }

        if (capture == Capture::all) {
            retained += z.bytes();
            peak = std::max(peak, retained);
            result.trace[i].stats = std::move(stats);
            result.trace[i].bn_mode = bn_modes[i];
            result.trace[i].activation = z;
        } else {
            // Streaming: the previous completed output is dropped before the
            // new one is registered.
            retained = z.bytes();
            peak = std::max(peak, retained);
        }
        current = std::move(z);
    }

    result.head_raw = std::move(current);
    result.peak_retained_bytes = peak;
    return result;
}

Tensor model_infer(Model& model, const Tensor& batch) {
    const std::vector<BNMode> modes(model.layers.size(), BNMode::eval);
    return model_forward(model, batch, Capture::streaming, modes).head_raw;
}

Tensor head_squash(const Tensor& head_raw) {
    if (head_raw.c != 3) {
        throw std::invalid_argument("head_squash: expected 3 channels, got " + std::to_string(head_raw.c));
    }
    Tensor out(head_raw.n, 3, head_raw.h, head_raw.w);
    const std::int64_t plane = std::int64_t(head_raw.h) * head_raw.w;
    for (int n = 0; n < head_raw.n; ++n) {
        for (int c = 0; c < 3; ++c) {
            const float* src = &head_raw.data[std::size_t(head_raw.index(n, c, 0, 0))];
            float* dst = &out.data[std::size_t(out.index(n, c, 0, 0))];
            for (std::int64_t i = 0; i < plane; ++i) {
                dst[i] = (c == 1) ? std::tanh(src[i]) : sigmoid_scalar(src[i]);
            }
        }
    }
    return out;
}

LossResult grasp_loss(const Tensor& squashed, const std::vector<GraspLabel>& labels) {
    if (squashed.c != 3 || squashed.h != 1 || squashed.w != 1) {
        throw std::invalid_argument("grasp_loss: expected an (N,3,1,1) head, got " + squashed.shape_str());
    }
    if (int(labels.size()) != squashed.n) {
        throw std::invalid_argument("grasp_loss: " + std::to_string(labels.size()) + " labels for batch " +
                                    std::to_string(squashed.n));
    }

    LossResult res;
    res.grad_raw = Tensor(squashed.n, 3, 1, 1);
    const float inv_n = 1.0f / float(squashed.n);

    for (int n = 0; n < squashed.n; ++n) {
        const GraspLabel& lab = labels[std::size_t(n)];
        if (lab.quality != 0.0f && lab.quality != 1.0f) {
            throw std::invalid_argument("grasp_loss: quality label must be 0 or 1");
        }
        if (lab.angle <= -kHalfPi || lab.angle > kHalfPi) {
            throw std::invalid_argument("grasp_loss: angle label outside (-pi/2, pi/2]");
        }
        const auto [sin_t, cos_t] = encode_angle(lab.angle);

        const float qhat = squashed.at(n, 0, 0, 0);
        const float shat = squashed.at(n, 1, 0, 0);
        const float chat = squashed.at(n, 2, 0, 0);

        const float eps = 1e-7f;
        const float qc = std::clamp(qhat, eps, 1.0f - eps);
        res.loss_q += -(lab.quality * std::log(qc) + (1.0f - lab.quality) * std::log(1.0f - qc));
        const float ds = shat - sin_t;
        const float dc = chat - cos_t;
        res.loss_angle += lab.quality * (ds * ds + dc * dc);

        res.grad_raw.at(n, 0, 0, 0) = (qhat - lab.quality) * inv_n;
        res.grad_raw.at(n, 1, 0, 0) = lab.quality * 2.0f * ds * (1.0f - shat * shat) * inv_n;
        res.grad_raw.at(n, 2, 0, 0) = lab.quality * 2.0f * dc * chat * (1.0f - chat) * inv_n;
    }
    res.loss_q *= inv_n;
    res.loss_angle *= inv_n;
    res.total = res.loss_q + res.loss_angle;
    ensure_finite(res.grad_raw, "grasp_loss");
    return res;
}

}  // namespace sgm
