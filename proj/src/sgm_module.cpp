#include "sgm/sgm_module.hpp"

#include <cmath>
#include <stdexcept>

#include "sgm/rng.hpp"

namespace sgm {

std::int64_t SGMConfig::param_count() const {
    const std::int64_t in_ch = channels + 3;
    const std::int64_t k2 = std::int64_t(kernel) * kernel;
    const std::int64_t conv1 = in_ch * hidden * k2 + hidden;
    const std::int64_t bn = 2 * std::int64_t(hidden);
    const std::int64_t conv2 = std::int64_t(hidden) * channels * k2 + channels;
    return conv1 + bn + conv2;
}

std::vector<SGMConfig> SGMConfig::reference(const ModelConfig& model) {
    std::vector<SGMConfig> configs;
    for (std::size_t i = 0; i + 1 < model.layers.size(); ++i) {
        SGMConfig c;
        c.attach_layer = int(i);
        c.channels = model.layers[i].out_channels;
        c.hidden = c.channels;
        c.kernel = (i < 3) ? 3 : 1;
        configs.push_back(c);
    }
    return configs;
}

std::int64_t SGModule::param_count() const {
    return conv1.param_count() + bn.param_count() + conv2.param_count();
}

SGModule build_sgm(const SGMConfig& config, std::uint64_t seed) {
    if (config.kernel % 2 == 0 || config.kernel < 1 || config.channels < 1 || config.hidden < 1) {
        throw std::invalid_argument("build_sgm: kernel must be odd and channel counts positive");
    }
    SGModule s;
    s.config = config;
    Rng rng(mix_seed(seed, 0x73676dull, std::uint64_t(config.attach_layer)));

    const int in_ch = config.channels + 3;
    s.conv1.weight = Tensor(config.hidden, in_ch, config.kernel, config.kernel);
    const float bound1 = std::sqrt(6.0f / (float(in_ch) * config.kernel * config.kernel));
    for (float& w : s.conv1.weight.data) {
        w = rng.uniform(-bound1, bound1);
    }
    s.conv1.bias.assign(std::size_t(config.hidden), 0.0f);
    s.conv1.stride = 1;
    s.conv1.padding = config.padding();

    s.bn = BatchNormParams(config.hidden);

    s.conv2.weight = Tensor(config.channels, config.hidden, config.kernel, config.kernel);
    const float bound2 = std::sqrt(6.0f / (float(config.hidden) * config.kernel * config.kernel));
    for (float& w : s.conv2.weight.data) {
        w = rng.uniform(-bound2, bound2);
    }
    s.conv2.bias.assign(std::size_t(config.channels), 0.0f);
    s.conv2.stride = 1;
    s.conv2.padding = config.padding();

    s.is_static = true;
    return s;
}

Tensor concat_label_channels(const Tensor& activation, const std::vector<GraspLabel>& labels) {
    if (int(labels.size()) != activation.n) {
        throw std::invalid_argument("concat_label_channels: " + std::to_string(labels.size()) +
                                    " labels for batch " + std::to_string(activation.n));
    }
    Tensor out(activation.n, activation.c + 3, activation.h, activation.w);
    const std::int64_t plane = std::int64_t(activation.h) * activation.w;
    for (int n = 0; n < activation.n; ++n) {
        for (int c = 0; c < activation.c; ++c) {
            const float* src = &activation.data[std::size_t(activation.index(n, c, 0, 0))];
            float* dst = &out.data[std::size_t(out.index(n, c, 0, 0))];
            for (std::int64_t i = 0; i < plane; ++i) dst[i] = src[i];
        }
        const GraspLabel& lab = labels[std::size_t(n)];
        const auto [sin_t, cos_t] = encode_angle(lab.angle);
        const float fill[3] = {lab.quality, sin_t, cos_t};
        for (int c = 0; c < 3; ++c) {
            float* dst = &out.data[std::size_t(out.index(n, activation.c + c, 0, 0))];
            for (std::int64_t i = 0; i < plane; ++i) dst[i] = fill[c];
        }
    }
    return out;
}

Tensor sgm_forward(SGModule& sgm, const Tensor& activation, const std::vector<GraspLabel>& labels) {
    if (activation.c != sgm.config.channels) {
        throw std::invalid_argument("sgm_forward: activation has " + std::to_string(activation.c) +
                                    " channels, module expects " + std::to_string(sgm.config.channels));
    }
    Tensor z = conv2d_forward(concat_label_channels(activation, labels), sgm.conv1);
    if (sgm.bn.channels() > 0) {
        z = batchnorm_forward(z, sgm.bn, sgm.is_static ? BNMode::eval : BNMode::train).first;
    }
    z = pointwise(Pointwise::relu, z);
    Tensor g = conv2d_forward(z, sgm.conv2);
    if (!g.same_shape(activation)) {
        throw std::logic_error("sgm_forward: output shape " + g.shape_str() +
                               " does not match activation " + activation.shape_str());
    }
    return g;
}

float sgm_supervise_step(SGModule& sgm, const Tensor& activation, const std::vector<GraspLabel>& labels,
                         const Tensor& true_grad, SGMLoss loss_kind, Optimizer& opt,
                         Tensor* synthetic_out) {
    if (sgm.is_static) {
        throw std::invalid_argument("sgm_supervise_step: module is static");
    }
    if (!true_grad.same_shape(activation)) {
        throw std::invalid_argument("sgm_supervise_step: true_grad shape " + true_grad.shape_str() +
                                    " != activation " + activation.shape_str());
    }

    // Forward with captured intermediates.
    const Tensor concat = concat_label_channels(activation, labels);
    const Tensor conv1_out = conv2d_forward(concat, sgm.conv1);
    auto [bn_out, stats] = batchnorm_forward(conv1_out, sgm.bn, BNMode::train);
    const Tensor hidden = pointwise(Pointwise::relu, bn_out);
    const Tensor pred = conv2d_forward(hidden, sgm.conv2);

    // Supervision loss (element mean) and its gradient on the prediction.
    const std::int64_t numel = pred.size();
    const float inv = 1.0f / float(numel);
    float loss = 0.0f;
    Tensor grad_pred(pred.n, pred.c, pred.h, pred.w);
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        const float d = pred.data[i] - true_grad.data[i];
        if (loss_kind == SGMLoss::l2) {
            loss += d * d;
            grad_pred.data[i] = 2.0f * d * inv;
        } else {
            loss += std::abs(d);
            grad_pred.data[i] = (d > 0.0f ? 1.0f : (d < 0.0f ? -1.0f : 0.0f)) * inv;
        }
    }
    loss *= inv;

    // Backward through conv2 - ReLU - BN - conv1.
    ConvGradsT<float> g2 = conv2d_backward(hidden, sgm.conv2, grad_pred, true);
    Tensor grad_bn_out = pointwise_backward(Pointwise::relu, bn_out, g2.input);
    BNGradsT<float> gb = batchnorm_backward(conv1_out, sgm.bn, stats, grad_bn_out);
    ConvGradsT<float> g1 = conv2d_backward(concat, sgm.conv1, gb.input, false);

    const std::int64_t base = std::int64_t(sgm.config.attach_layer) * 8;
    opt.step(base + 0, {sgm.conv1.weight.data.data(), sgm.conv1.weight.data.size()},
             {g1.weight.data.data(), g1.weight.data.size()});
    opt.step(base + 1, {sgm.conv1.bias.data(), sgm.conv1.bias.size()}, {g1.bias.data(), g1.bias.size()});
    opt.step(base + 2, {sgm.bn.gamma.data(), sgm.bn.gamma.size()}, {gb.gamma.data(), gb.gamma.size()});
    opt.step(base + 3, {sgm.bn.beta.data(), sgm.bn.beta.size()}, {gb.beta.data(), gb.beta.size()});
    opt.step(base + 4, {sgm.conv2.weight.data.data(), sgm.conv2.weight.data.size()},
             {g2.weight.data.data(), g2.weight.data.size()});
    opt.step(base + 5, {sgm.conv2.bias.data(), sgm.conv2.bias.size()}, {g2.bias.data(), g2.bias.size()});

    if (synthetic_out != nullptr) {
        *synthetic_out = pred;
    }
    return loss;
}

SGModule fold_static_sgm(const SGModule& sgm) {
    if (!sgm.is_static) {
        throw std::invalid_argument("fold_static_sgm: module is not static");
    }
    SGModule folded = sgm;
    if (sgm.bn.channels() > 0) {
        folded.conv1 = fold_batchnorm(sgm.conv1, sgm.bn);
        folded.bn = BatchNormParams(0);
    }
    return folded;
}

std::vector<ParamView> sgm_param_views(SGModule& sgm) {
    std::vector<ParamView> v;
    v.push_back({sgm.conv1.weight.data.data(), sgm.conv1.weight.data.size()});
    v.push_back({sgm.conv1.bias.data(), sgm.conv1.bias.size()});
    if (sgm.bn.channels() > 0) {
        v.push_back({sgm.bn.gamma.data(), sgm.bn.gamma.size()});
        v.push_back({sgm.bn.beta.data(), sgm.bn.beta.size()});
        v.push_back({sgm.bn.running_mean.data(), sgm.bn.running_mean.size()});
        v.push_back({sgm.bn.running_var.data(), sgm.bn.running_var.size()});
    }
    v.push_back({sgm.conv2.weight.data.data(), sgm.conv2.weight.data.size()});
    v.push_back({sgm.conv2.bias.data(), sgm.conv2.bias.size()});
    return v;
}

}  // namespace sgm
