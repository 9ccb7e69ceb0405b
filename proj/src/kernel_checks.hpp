#pragma once

// Shared precondition checks for the production and reference kernels.

#include <stdexcept>
#include <string>

#include "sgm/kernels.hpp"
#include "sgm/tensor.hpp"

namespace sgm::detail {

template <typename T>
inline void check_conv_forward(const TensorT<T>& x, const ConvParamsT<T>& p) {
    if (p.weight.h != p.weight.w) {
        throw std::invalid_argument("conv2d: only square kernels are supported, got " + p.weight.shape_str());
    }
    if (p.kernel() < 1 || p.out_channels() < 1) {
        throw std::invalid_argument("conv2d: kernel and output channels must be >= 1");
    }
    if (p.stride < 1 || p.padding < 0) {
        throw std::invalid_argument("conv2d: stride must be >= 1 and padding >= 0");
    }
    if (x.c != p.in_channels()) {
        throw std::invalid_argument("conv2d: input has " + std::to_string(x.c) +
                                    " channels, weight expects " + std::to_string(p.in_channels()));
    }
    if (int(p.bias.size()) != p.out_channels()) {
        throw std::invalid_argument("conv2d: bias length " + std::to_string(p.bias.size()) +
                                    " != output channels " + std::to_string(p.out_channels()));
    }
}

template <typename T>
inline void check_conv_backward(const TensorT<T>& x, const ConvParamsT<T>& p, const TensorT<T>& g) {
    check_conv_forward(x, p);
    const int oh = conv_out_extent(x.h, p.kernel(), p.stride, p.padding);
    const int ow = conv_out_extent(x.w, p.kernel(), p.stride, p.padding);
    if (g.n != x.n || g.c != p.out_channels() || g.h != oh || g.w != ow) {
        throw std::invalid_argument("conv2d_backward: grad_out shape " + g.shape_str() + " != forward output " +
                                    std::to_string(x.n) + "x" + std::to_string(p.out_channels()) + "x" +
                                    std::to_string(oh) + "x" + std::to_string(ow));
    }
}

template <typename T>
inline void check_bn_channels(const TensorT<T>& x, const BatchNormParamsT<T>& p) {
    if (x.c != p.channels()) {
        throw std::invalid_argument("batchnorm: input has " + std::to_string(x.c) +
                                    " channels, params have " + std::to_string(p.channels()));
    }
    if (int(p.beta.size()) != p.channels() || int(p.running_mean.size()) != p.channels() ||
        int(p.running_var.size()) != p.channels()) {
        throw std::invalid_argument("batchnorm: inconsistent parameter lengths");
    }
    if (!(p.epsilon > T(0))) {
        throw std::invalid_argument("batchnorm: epsilon must be positive");
    }
    for (const T& v : p.running_var) {
        if (v < T(0)) {
            throw std::invalid_argument("batchnorm: negative running variance");
        }
    }
}

template <typename T>
inline void check_same_shape(const TensorT<T>& a, const TensorT<T>& b, const char* what) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument(std::string(what) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    }
}

}  // namespace sgm::detail
