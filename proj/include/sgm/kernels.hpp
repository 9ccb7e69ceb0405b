#pragma once

#include <utility>
#include <vector>

#include "sgm/tensor.hpp"

namespace sgm {

template <typename T>
struct ConvParamsT {
    TensorT<T> weight;    // (C_out, C_in, K, K)
    std::vector<T> bias;  // C_out
    int stride = 1;
    int padding = 0;

    int out_channels() const { return weight.n; }
    int in_channels() const { return weight.c; }
    int kernel() const { return weight.h; }
    std::int64_t param_count() const { return weight.size() + std::int64_t(bias.size()); }
};
using ConvParams = ConvParamsT<float>;

template <typename T>
struct BatchNormParamsT {
    std::vector<T> gamma, beta, running_mean, running_var;
    T epsilon = T(1e-5);
    T momentum = T(0.1);

    BatchNormParamsT() = default;
    explicit BatchNormParamsT(int channels)
        : gamma(std::size_t(channels), T(1)),
          beta(std::size_t(channels), T(0)),
          running_mean(std::size_t(channels), T(0)),
          running_var(std::size_t(channels), T(1)) {}

    int channels() const { return int(gamma.size()); }
    std::int64_t param_count() const { return 2 * std::int64_t(gamma.size()); }
};
using BatchNormParams = BatchNormParamsT<float>;

enum class BNMode { train, eval };
enum class Pointwise { relu, sigmoid, tanh };

/// Batch statistics captured by a train-mode batchnorm_forward; variance is
/// the biased (1/m) estimate actually used for normalization.
template <typename T>
struct BatchStatsT {
    std::vector<T> mean, var;
};
using BatchStats = BatchStatsT<float>;

template <typename T>
struct ConvGradsT {
    TensorT<T> input;     // empty when grad_input was not requested
    TensorT<T> weight;
    std::vector<T> bias;
};

template <typename T>
struct BNGradsT {
    TensorT<T> input;
    std::vector<T> gamma, beta;
};

/// Output extent of a convolution along one axis, floor arithmetic.
/// Throws when the kernel does not fit (extent would be < 1).
int conv_out_extent(int in, int kernel, int stride, int padding);

/// Overflow-stable logistic function.
template <typename T>
inline T sigmoid_scalar(T x) {
    if (x >= T(0)) {
        const T e = std::exp(-x);
        return T(1) / (T(1) + e);
    }
    const T e = std::exp(x);
    return e / (T(1) + e);
}

// ---------------------------------------------------------------------------
// Production kernels: data-parallel over independent output elements.
// Per-element accumulation order is fixed, so results are bit-identical to
// the serial reference code and across thread counts.
// ---------------------------------------------------------------------------

template <typename T>
TensorT<T> conv2d_forward(const TensorT<T>& input, const ConvParamsT<T>& p);

/// Gradients of <grad_out, conv2d_forward(input, p)> wrt input, weight, bias.
template <typename T>
ConvGradsT<T> conv2d_backward(const TensorT<T>& input, const ConvParamsT<T>& p,
                              const TensorT<T>& grad_out, bool need_grad_input = true);

/// Train mode normalizes with batch statistics and updates running stats by
/// momentum; eval mode normalizes with running stats (and returns them).
template <typename T>
std::pair<TensorT<T>, BatchStatsT<T>> batchnorm_forward(const TensorT<T>& input,
                                                        BatchNormParamsT<T>& p, BNMode mode);

/// Backward of the train-mode normalization.
template <typename T>
BNGradsT<T> batchnorm_backward(const TensorT<T>& input, const BatchNormParamsT<T>& p,
                               const BatchStatsT<T>& stats, const TensorT<T>& grad_out);

template <typename T>
TensorT<T> pointwise(Pointwise kind, const TensorT<T>& input);

/// Derivative is taken at `input` (the forward op's input), not its output.
template <typename T>
TensorT<T> pointwise_backward(Pointwise kind, const TensorT<T>& input, const TensorT<T>& grad_out);

/// Eval-semantics BN absorbed into the convolution:
/// returned conv satisfies conv'(x) == bn(conv(x)) within float tolerance.
template <typename T>
ConvParamsT<T> fold_batchnorm(const ConvParamsT<T>& conv, const BatchNormParamsT<T>& bn);

// ---------------------------------------------------------------------------
// Serial reference implementations, kept for testing and benchmarking.
// Same contracts and same per-element accumulation order as above.
// ---------------------------------------------------------------------------
namespace serial {

template <typename T>
TensorT<T> conv2d_forward(const TensorT<T>& input, const ConvParamsT<T>& p);

template <typename T>
ConvGradsT<T> conv2d_backward(const TensorT<T>& input, const ConvParamsT<T>& p,
                              const TensorT<T>& grad_out, bool need_grad_input = true);

template <typename T>
std::pair<TensorT<T>, BatchStatsT<T>> batchnorm_forward(const TensorT<T>& input,
                                                        BatchNormParamsT<T>& p, BNMode mode);

template <typename T>
BNGradsT<T> batchnorm_backward(const TensorT<T>& input, const BatchNormParamsT<T>& p,
                               const BatchStatsT<T>& stats, const TensorT<T>& grad_out);

template <typename T>
TensorT<T> pointwise(Pointwise kind, const TensorT<T>& input);

template <typename T>
TensorT<T> pointwise_backward(Pointwise kind, const TensorT<T>& input, const TensorT<T>& grad_out);

}  // namespace serial

}  // namespace sgm
