// Production kernels. Parallelism is over independent output elements only;
// every accumulation runs in a fixed order inside one thread, so outputs are
// bit-identical to the serial reference regardless of thread count.

#include <algorithm>
#include <cmath>

#include "kernel_checks.hpp"
#include "sgm/kernels.hpp"

namespace sgm {

int conv_out_extent(int in, int kernel, int stride, int padding) {
    if (kernel < 1 || stride < 1 || padding < 0) {
        throw std::invalid_argument("conv_out_extent: kernel >= 1, stride >= 1, padding >= 0 required");
    }
    const int span = in + 2 * padding - kernel;
    if (span < 0) {
        throw std::invalid_argument("conv_out_extent: kernel " + std::to_string(kernel) +
                                    " does not fit input extent " + std::to_string(in) +
                                    " with padding " + std::to_string(padding));
    }
    return span / stride + 1;
}

template <typename T>
TensorT<T> conv2d_forward(const TensorT<T>& x, const ConvParamsT<T>& p) {
    detail::check_conv_forward(x, p);
    const int N = x.n, C = x.c, H = x.h, W = x.w;
    const int OC = p.out_channels(), K = p.kernel(), S = p.stride, P = p.padding;
    const int OH = conv_out_extent(H, K, S, P);
    const int OW = conv_out_extent(W, K, S, P);
    TensorT<T> out(N, OC, OH, OW);

#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < N; ++n) {
        for (int oc = 0; oc < OC; ++oc) {
            const T b = p.bias[std::size_t(oc)];
            for (int oy = 0; oy < OH; ++oy) {
                const int iy0 = oy * S - P;
                const int ky_lo = std::max(0, -iy0);
                const int ky_hi = std::min(K, H - iy0);
                for (int ox = 0; ox < OW; ++ox) {
                    const int ix0 = ox * S - P;
                    const int kx_lo = std::max(0, -ix0);
                    const int kx_hi = std::min(K, W - ix0);
                    T acc = b;
                    for (int ic = 0; ic < C; ++ic) {
                        const T* xch = &x.data[std::size_t(x.index(n, ic, 0, 0))];
                        const T* wch = &p.weight.data[std::size_t(p.weight.index(oc, ic, 0, 0))];
                        for (int ky = ky_lo; ky < ky_hi; ++ky) {
                            const T* xrow = xch + std::int64_t(iy0 + ky) * W + ix0;
                            const T* wrow = wch + std::int64_t(ky) * K;
                            for (int kx = kx_lo; kx < kx_hi; ++kx) {
                                acc += wrow[kx] * xrow[kx];
                            }
                        }
                    }
                    out.at(n, oc, oy, ox) = acc;
                }
            }
        }
    }
    ensure_finite(out, "conv2d_forward");
    return out;
}

template <typename T>
ConvGradsT<T> conv2d_backward(const TensorT<T>& x, const ConvParamsT<T>& p,
                              const TensorT<T>& g, bool need_grad_input) {
    detail::check_conv_backward(x, p, g);
    const int N = x.n, C = x.c, H = x.h, W = x.w;
    const int OC = p.out_channels(), K = p.kernel(), S = p.stride, P = p.padding;
    const int OH = g.h, OW = g.w;

    ConvGradsT<T> out;
    out.weight = TensorT<T>(OC, C, K, K);
    out.bias.assign(std::size_t(OC), T(0));

#pragma omp parallel for schedule(static)
    for (int oc = 0; oc < OC; ++oc) {
        T acc = T(0);
        for (int n = 0; n < N; ++n) {
            const T* grow = &g.data[std::size_t(g.index(n, oc, 0, 0))];
            for (std::int64_t i = 0; i < std::int64_t(OH) * OW; ++i) {
                acc += grow[i];
            }
        }
        out.bias[std::size_t(oc)] = acc;
    }

#pragma omp parallel for collapse(2) schedule(static)
    for (int oc = 0; oc < OC; ++oc) {
        for (int ic = 0; ic < C; ++ic) {
            for (int ky = 0; ky < K; ++ky) {
                for (int kx = 0; kx < K; ++kx) {
                    T acc = T(0);
                    for (int n = 0; n < N; ++n) {
                        const T* xch = &x.data[std::size_t(x.index(n, ic, 0, 0))];
                        const T* gch = &g.data[std::size_t(g.index(n, oc, 0, 0))];
                        for (int oy = 0; oy < OH; ++oy) {
                            const int iy = oy * S + ky - P;
                            if (iy < 0 || iy >= H) continue;
                            const T* xrow = xch + std::int64_t(iy) * W;
                            const T* grow = gch + std::int64_t(oy) * OW;
                            for (int ox = 0; ox < OW; ++ox) {
                                const int ix = ox * S + kx - P;
                                if (ix < 0 || ix >= W) continue;
                                acc += grow[ox] * xrow[ix];
                            }
                        }
                    }
                    out.weight.at(oc, ic, ky, kx) = acc;
                }
            }
        }
    }

    if (need_grad_input) {
        out.input = TensorT<T>(N, C, H, W);
#pragma omp parallel for collapse(2) schedule(static)
        for (int n = 0; n < N; ++n) {
            for (int ic = 0; ic < C; ++ic) {
                for (int iy = 0; iy < H; ++iy) {
                    for (int ix = 0; ix < W; ++ix) {
                        T acc = T(0);
                        for (int oc = 0; oc < OC; ++oc) {
                            const T* wch = &p.weight.data[std::size_t(p.weight.index(oc, ic, 0, 0))];
                            const T* gch = &g.data[std::size_t(g.index(n, oc, 0, 0))];
                            for (int ky = 0; ky < K; ++ky) {
                                const int num_y = iy + P - ky;
                                if (num_y < 0 || num_y % S != 0) continue;
                                const int oy = num_y / S;
                                if (oy >= OH) continue;
                                for (int kx = 0; kx < K; ++kx) {
                                    const int num_x = ix + P - kx;
                                    if (num_x < 0 || num_x % S != 0) continue;
                                    const int ox = num_x / S;
                                    if (ox >= OW) continue;
                                    acc += wch[std::int64_t(ky) * K + kx] * gch[std::int64_t(oy) * OW + ox];
                                }
                            }
                        }
                        out.input.at(n, ic, iy, ix) = acc;
                    }
                }
            }
        }
        ensure_finite(out.input, "conv2d_backward/input");
    }
    ensure_finite(out.weight, "conv2d_backward/weight");
    return out;
}

template <typename T>
std::pair<TensorT<T>, BatchStatsT<T>> batchnorm_forward(const TensorT<T>& x,
                                                        BatchNormParamsT<T>& p, BNMode mode) {
    detail::check_bn_channels(x, p);
    const int N = x.n, C = x.c;
    const std::int64_t plane = std::int64_t(x.h) * x.w;
    const std::int64_t m = std::int64_t(N) * plane;
    if (mode == BNMode::train && m == 0) {
        throw std::invalid_argument("batchnorm_forward: empty batch in train mode");
    }

    TensorT<T> out(x.n, x.c, x.h, x.w);
    BatchStatsT<T> stats;
    stats.mean.resize(std::size_t(C));
    stats.var.resize(std::size_t(C));

#pragma omp parallel for schedule(static)
    for (int c = 0; c < C; ++c) {
        T mean, var;
        if (mode == BNMode::train) {
            T sum = T(0);
            for (int n = 0; n < N; ++n) {
                const T* ch = &x.data[std::size_t(x.index(n, c, 0, 0))];
                for (std::int64_t i = 0; i < plane; ++i) sum += ch[i];
            }
            mean = sum / T(m);
            T sq = T(0);
            for (int n = 0; n < N; ++n) {
                const T* ch = &x.data[std::size_t(x.index(n, c, 0, 0))];
                for (std::int64_t i = 0; i < plane; ++i) {
                    const T d = ch[i] - mean;
                    sq += d * d;
                }
            }
            var = sq / T(m);
        } else {
            mean = p.running_mean[std::size_t(c)];
            var = p.running_var[std::size_t(c)];
        }
        stats.mean[std::size_t(c)] = mean;
        stats.var[std::size_t(c)] = var;

        const T inv = T(1) / std::sqrt(var + p.epsilon);
        const T gamma = p.gamma[std::size_t(c)];
        const T beta = p.beta[std::size_t(c)];
        for (int n = 0; n < N; ++n) {
            const T* src = &x.data[std::size_t(x.index(n, c, 0, 0))];
            T* dst = &out.data[std::size_t(out.index(n, c, 0, 0))];
            for (std::int64_t i = 0; i < plane; ++i) {
                dst[i] = gamma * (src[i] - mean) * inv + beta;
            }
        }
        if (mode == BNMode::train) {
            p.running_mean[std::size_t(c)] = (T(1) - p.momentum) * p.running_mean[std::size_t(c)] + p.momentum * mean;
            p.running_var[std::size_t(c)] = (T(1) - p.momentum) * p.running_var[std::size_t(c)] + p.momentum * var;
        }
    }
    ensure_finite(out, "batchnorm_forward");
    return {std::move(out), std::move(stats)};
}

template <typename T>
BNGradsT<T> batchnorm_backward(const TensorT<T>& x, const BatchNormParamsT<T>& p,
                               const BatchStatsT<T>& stats, const TensorT<T>& g) {
    detail::check_bn_channels(x, p);
    detail::check_same_shape(x, g, "batchnorm_backward");
    if (int(stats.mean.size()) != x.c || int(stats.var.size()) != x.c) {
        throw std::invalid_argument("batchnorm_backward: stats channel mismatch");
    }
    const int N = x.n, C = x.c;
    const std::int64_t plane = std::int64_t(x.h) * x.w;
    const T m = T(std::int64_t(N) * plane);

    BNGradsT<T> out;
    out.input = TensorT<T>(x.n, x.c, x.h, x.w);
    out.gamma.assign(std::size_t(C), T(0));
    out.beta.assign(std::size_t(C), T(0));

#pragma omp parallel for schedule(static)
    for (int c = 0; c < C; ++c) {
        const T mean = stats.mean[std::size_t(c)];
        const T var = stats.var[std::size_t(c)];
        if (var < T(0)) {
            continue;  // flagged below, outside the parallel region
        }
        const T inv = T(1) / std::sqrt(var + p.epsilon);
        const T gamma = p.gamma[std::size_t(c)];

        T sum_g = T(0), sum_gx = T(0);
        for (int n = 0; n < N; ++n) {
            const T* xch = &x.data[std::size_t(x.index(n, c, 0, 0))];
            const T* gch = &g.data[std::size_t(g.index(n, c, 0, 0))];
            for (std::int64_t i = 0; i < plane; ++i) {
                sum_g += gch[i];
                sum_gx += gch[i] * (xch[i] - mean) * inv;
            }
        }
        out.beta[std::size_t(c)] = sum_g;
        out.gamma[std::size_t(c)] = sum_gx;

        const T k = gamma * inv;
        const T mg = sum_g / m;
        const T mgx = sum_gx / m;
        for (int n = 0; n < N; ++n) {
            const T* xch = &x.data[std::size_t(x.index(n, c, 0, 0))];
            const T* gch = &g.data[std::size_t(g.index(n, c, 0, 0))];
            T* dch = &out.input.data[std::size_t(out.input.index(n, c, 0, 0))];
            for (std::int64_t i = 0; i < plane; ++i) {
                const T xhat = (xch[i] - mean) * inv;
                dch[i] = k * (gch[i] - mg - xhat * mgx);
            }
        }
    }
    for (const T& v : stats.var) {
        if (v < T(0)) {
            throw std::invalid_argument("batchnorm_backward: negative batch variance");
        }
    }
    ensure_finite(out.input, "batchnorm_backward");
    return out;
}

template <typename T>
TensorT<T> pointwise(Pointwise kind, const TensorT<T>& x) {
    TensorT<T> out(x.n, x.c, x.h, x.w);
    const std::int64_t sz = x.size();
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < sz; ++i) {
        const T v = x.data[std::size_t(i)];
        switch (kind) {
            case Pointwise::relu: out.data[std::size_t(i)] = v > T(0) ? v : T(0); break;
            case Pointwise::sigmoid: out.data[std::size_t(i)] = sigmoid_scalar(v); break;
            case Pointwise::tanh: out.data[std::size_t(i)] = std::tanh(v); break;
        }
    }
    ensure_finite(out, "pointwise");
    return out;
}

template <typename T>
TensorT<T> pointwise_backward(Pointwise kind, const TensorT<T>& x, const TensorT<T>& g) {
    detail::check_same_shape(x, g, "pointwise_backward");
    TensorT<T> out(x.n, x.c, x.h, x.w);
    const std::int64_t sz = x.size();
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < sz; ++i) {
        const T v = x.data[std::size_t(i)];
        T d = T(0);
        switch (kind) {
            case Pointwise::relu: d = v > T(0) ? T(1) : T(0); break;
            case Pointwise::sigmoid: {
                const T s = sigmoid_scalar(v);
                d = s * (T(1) - s);
                break;
            }
            case Pointwise::tanh: {
                const T t = std::tanh(v);
                d = T(1) - t * t;
                break;
            }
        }
        out.data[std::size_t(i)] = d * g.data[std::size_t(i)];
    }
    ensure_finite(out, "pointwise_backward");
    return out;
}

template <typename T>
ConvParamsT<T> fold_batchnorm(const ConvParamsT<T>& conv, const BatchNormParamsT<T>& bn) {
    if (bn.channels() != conv.out_channels()) {
        throw std::invalid_argument("fold_batchnorm: BN channels " + std::to_string(bn.channels()) +
                                    " != conv output channels " + std::to_string(conv.out_channels()));
    }
    ConvParamsT<T> folded = conv;
    const int OC = conv.out_channels();
    const std::int64_t per_oc = conv.weight.size() / OC;
    for (int oc = 0; oc < OC; ++oc) {
        const T denom = bn.running_var[std::size_t(oc)] + bn.epsilon;
        if (!(denom > T(0))) {
            throw std::invalid_argument("fold_batchnorm: running_var + epsilon must be positive");
        }
        const T scale = bn.gamma[std::size_t(oc)] / std::sqrt(denom);
        T* w = &folded.weight.data[std::size_t(oc * per_oc)];
        for (std::int64_t i = 0; i < per_oc; ++i) {
            w[i] *= scale;
        }
        folded.bias[std::size_t(oc)] =
            (conv.bias[std::size_t(oc)] - bn.running_mean[std::size_t(oc)]) * scale + bn.beta[std::size_t(oc)];
    }
    return folded;
}

template TensorT<float> conv2d_forward<float>(const TensorT<float>&, const ConvParamsT<float>&);
template TensorT<double> conv2d_forward<double>(const TensorT<double>&, const ConvParamsT<double>&);
template ConvGradsT<float> conv2d_backward<float>(const TensorT<float>&, const ConvParamsT<float>&, const TensorT<float>&, bool);
template ConvGradsT<double> conv2d_backward<double>(const TensorT<double>&, const ConvParamsT<double>&, const TensorT<double>&, bool);
template std::pair<TensorT<float>, BatchStatsT<float>> batchnorm_forward<float>(const TensorT<float>&, BatchNormParamsT<float>&, BNMode);
template std::pair<TensorT<double>, BatchStatsT<double>> batchnorm_forward<double>(const TensorT<double>&, BatchNormParamsT<double>&, BNMode);
template BNGradsT<float> batchnorm_backward<float>(const TensorT<float>&, const BatchNormParamsT<float>&, const BatchStatsT<float>&, const TensorT<float>&);
template BNGradsT<double> batchnorm_backward<double>(const TensorT<double>&, const BatchNormParamsT<double>&, const BatchStatsT<double>&, const TensorT<double>&);
template TensorT<float> pointwise<float>(Pointwise, const TensorT<float>&);
template TensorT<double> pointwise<double>(Pointwise, const TensorT<double>&);
template TensorT<float> pointwise_backward<float>(Pointwise, const TensorT<float>&, const TensorT<float>&);
template TensorT<double> pointwise_backward<double>(Pointwise, const TensorT<double>&, const TensorT<double>&);
template ConvParamsT<float> fold_batchnorm<float>(const ConvParamsT<float>&, const BatchNormParamsT<float>&);
template ConvParamsT<double> fold_batchnorm<double>(const ConvParamsT<double>&, const BatchNormParamsT<double>&);

}  // namespace sgm
