// Straight-line reference kernels. No parallelism, no pointer tricks; the
// test suite asserts the production kernels match these bit for bit.

#include <algorithm>
#include <cmath>

#include "kernel_checks.hpp"
#include "sgm/kernels.hpp"

namespace sgm::serial {

template <typename T>
TensorT<T> conv2d_forward(const TensorT<T>& x, const ConvParamsT<T>& p) {
    detail::check_conv_forward(x, p);
    const int K = p.kernel(), S = p.stride, P = p.padding;
    const int OH = conv_out_extent(x.h, K, S, P);
    const int OW = conv_out_extent(x.w, K, S, P);
    TensorT<T> out(x.n, p.out_channels(), OH, OW);

    for (int n = 0; n < x.n; ++n) {
        for (int oc = 0; oc < p.out_channels(); ++oc) {
            for (int oy = 0; oy < OH; ++oy) {
                for (int ox = 0; ox < OW; ++ox) {
                    T acc = p.bias[std::size_t(oc)];
                    for (int ic = 0; ic < x.c; ++ic) {
                        for (int ky = 0; ky < K; ++ky) {
                            for (int kx = 0; kx < K; ++kx) {
                                const int iy = oy * S + ky - P;
                                const int ix = ox * S + kx - P;
                                if (iy < 0 || iy >= x.h || ix < 0 || ix >= x.w) continue;
                                acc += p.weight.at(oc, ic, ky, kx) * x.at(n, ic, iy, ix);
                            }
                        }
                    }
                    out.at(n, oc, oy, ox) = acc;
                }
            }
        }
    }
    ensure_finite(out, "serial::conv2d_forward");
    return out;
}

template <typename T>
ConvGradsT<T> conv2d_backward(const TensorT<T>& x, const ConvParamsT<T>& p,
                              const TensorT<T>& g, bool need_grad_input) {
    detail::check_conv_backward(x, p, g);
    const int K = p.kernel(), S = p.stride, P = p.padding;
    const int OH = g.h, OW = g.w;

    ConvGradsT<T> out;
    out.weight = TensorT<T>(p.out_channels(), x.c, K, K);
    out.bias.assign(std::size_t(p.out_channels()), T(0));

    for (int oc = 0; oc < p.out_channels(); ++oc) {
        T acc = T(0);
        for (int n = 0; n < x.n; ++n) {
            for (int oy = 0; oy < OH; ++oy) {
                for (int ox = 0; ox < OW; ++ox) {
                    acc += g.at(n, oc, oy, ox);
                }
            }
        }
        out.bias[std::size_t(oc)] = acc;
    }

    for (int oc = 0; oc < p.out_channels(); ++oc) {
        for (int ic = 0; ic < x.c; ++ic) {
            for (int ky = 0; ky < K; ++ky) {
                for (int kx = 0; kx < K; ++kx) {
                    T acc = T(0);
                    for (int n = 0; n < x.n; ++n) {
                        for (int oy = 0; oy < OH; ++oy) {
                            for (int ox = 0; ox < OW; ++ox) {
                                const int iy = oy * S + ky - P;
                                const int ix = ox * S + kx - P;
                                if (iy < 0 || iy >= x.h || ix < 0 || ix >= x.w) continue;
                                acc += g.at(n, oc, oy, ox) * x.at(n, ic, iy, ix);
                            }
                        }
                    }
                    out.weight.at(oc, ic, ky, kx) = acc;
                }
            }
        }
    }

    if (need_grad_input) {
        out.input = TensorT<T>(x.n, x.c, x.h, x.w);
        for (int n = 0; n < x.n; ++n) {
            for (int ic = 0; ic < x.c; ++ic) {
                for (int iy = 0; iy < x.h; ++iy) {
                    for (int ix = 0; ix < x.w; ++ix) {
                        T acc = T(0);
                        for (int oc = 0; oc < p.out_channels(); ++oc) {
                            for (int ky = 0; ky < K; ++ky) {
                                for (int kx = 0; kx < K; ++kx) {
                                    const int num_y = iy + P - ky;
                                    const int num_x = ix + P - kx;
                                    if (num_y < 0 || num_y % S != 0 || num_x < 0 || num_x % S != 0) continue;
                                    const int oy = num_y / S;
                                    const int ox = num_x / S;
                                    if (oy >= OH || ox >= OW) continue;
                                    acc += p.weight.at(oc, ic, ky, kx) * g.at(n, oc, oy, ox);
                                }
                            }
                        }
                        out.input.at(n, ic, iy, ix) = acc;
                    }
                }
            }
        }
        ensure_finite(out.input, "serial::conv2d_backward/input");
    }
    ensure_finite(out.weight, "serial::conv2d_backward/weight");
    return out;
}

template <typename T>
std::pair<TensorT<T>, BatchStatsT<T>> batchnorm_forward(const TensorT<T>& x,
                                                        BatchNormParamsT<T>& p, BNMode mode) {
    detail::check_bn_channels(x, p);
    const std::int64_t plane = std::int64_t(x.h) * x.w;
    const std::int64_t m = std::int64_t(x.n) * plane;
    if (mode == BNMode::train && m == 0) {
        throw std::invalid_argument("batchnorm_forward: empty batch in train mode");
    }

    TensorT<T> out(x.n, x.c, x.h, x.w);
    BatchStatsT<T> stats;
    stats.mean.resize(std::size_t(x.c));
    stats.var.resize(std::size_t(x.c));

    for (int c = 0; c < x.c; ++c) {
        T mean, var;
        if (mode == BNMode::train) {
            T sum = T(0);
            for (int n = 0; n < x.n; ++n) {
                for (int y = 0; y < x.h; ++y) {
                    for (int xx = 0; xx < x.w; ++xx) sum += x.at(n, c, y, xx);
                }
            }
            mean = sum / T(m);
            T sq = T(0);
            for (int n = 0; n < x.n; ++n) {
                for (int y = 0; y < x.h; ++y) {
                    for (int xx = 0; xx < x.w; ++xx) {
                        const T d = x.at(n, c, y, xx) - mean;
                        sq += d * d;
                    }
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
        for (int n = 0; n < x.n; ++n) {
            for (int y = 0; y < x.h; ++y) {
                for (int xx = 0; xx < x.w; ++xx) {
                    out.at(n, c, y, xx) =
                        p.gamma[std::size_t(c)] * (x.at(n, c, y, xx) - mean) * inv + p.beta[std::size_t(c)];
                }
            }
        }
        if (mode == BNMode::train) {
            p.running_mean[std::size_t(c)] = (T(1) - p.momentum) * p.running_mean[std::size_t(c)] + p.momentum * mean;
            p.running_var[std::size_t(c)] = (T(1) - p.momentum) * p.running_var[std::size_t(c)] + p.momentum * var;
        }
    }
    ensure_finite(out, "serial::batchnorm_forward");
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
    for (const T& v : stats.var) {
        if (v < T(0)) {
            throw std::invalid_argument("batchnorm_backward: negative batch variance");
        }
    }
    const T m = T(std::int64_t(x.n) * x.h * x.w);

    BNGradsT<T> out;
    out.input = TensorT<T>(x.n, x.c, x.h, x.w);
    out.gamma.assign(std::size_t(x.c), T(0));
    out.beta.assign(std::size_t(x.c), T(0));

    for (int c = 0; c < x.c; ++c) {
        const T mean = stats.mean[std::size_t(c)];
        const T inv = T(1) / std::sqrt(stats.var[std::size_t(c)] + p.epsilon);

        T sum_g = T(0), sum_gx = T(0);
        for (int n = 0; n < x.n; ++n) {
            for (int y = 0; y < x.h; ++y) {
                for (int xx = 0; xx < x.w; ++xx) {
                    sum_g += g.at(n, c, y, xx);
                    sum_gx += g.at(n, c, y, xx) * (x.at(n, c, y, xx) - mean) * inv;
                }
            }
        }
        out.beta[std::size_t(c)] = sum_g;
        out.gamma[std::size_t(c)] = sum_gx;

        const T k = p.gamma[std::size_t(c)] * inv;
        for (int n = 0; n < x.n; ++n) {
            for (int y = 0; y < x.h; ++y) {
                for (int xx = 0; xx < x.w; ++xx) {
                    const T xhat = (x.at(n, c, y, xx) - mean) * inv;
                    out.input.at(n, c, y, xx) = k * (g.at(n, c, y, xx) - sum_g / m - xhat * sum_gx / m);
                }
            }
        }
    }
    ensure_finite(out.input, "serial::batchnorm_backward");
    return out;
}

template <typename T>
TensorT<T> pointwise(Pointwise kind, const TensorT<T>& x) {
    TensorT<T> out(x.n, x.c, x.h, x.w);
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        const T v = x.data[i];
        switch (kind) {
            case Pointwise::relu: out.data[i] = v > T(0) ? v : T(0); break;
            case Pointwise::sigmoid: out.data[i] = sigmoid_scalar(v); break;
            case Pointwise::tanh: out.data[i] = std::tanh(v); break;
        }
    }
    ensure_finite(out, "serial::pointwise");
    return out;
}

template <typename T>
TensorT<T> pointwise_backward(Pointwise kind, const TensorT<T>& x, const TensorT<T>& g) {
    detail::check_same_shape(x, g, "pointwise_backward");
    TensorT<T> out(x.n, x.c, x.h, x.w);
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        const T v = x.data[i];
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
        out.data[i] = d * g.data[i];
    }
    ensure_finite(out, "serial::pointwise_backward");
    return out;
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

}  // namespace sgm::serial
