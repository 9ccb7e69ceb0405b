#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace sgm {

/// Dense row-major rank-4 tensor (batch, channel, height, width).
/// The single value currency of the engine; float by default, double
/// instantiations exist for gradient-check builds.
template <typename T>
struct TensorT {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<T> data;

    TensorT() = default;
    TensorT(int n_, int c_, int h_, int w_, T fill = T(0))
        : n(n_), c(c_), h(h_), w(w_),
          data(checked_size(n_, c_, h_, w_), fill) {}

    static std::size_t checked_size(int n, int c, int h, int w) {
        if (n < 0 || c < 0 || h < 0 || w < 0) {
            throw std::invalid_argument("tensor extents must be non-negative");
        }
        return std::size_t(std::int64_t(n) * c * h * w);
    }

    std::int64_t size() const { return std::int64_t(n) * c * h * w; }
    std::int64_t bytes() const { return size() * std::int64_t(sizeof(T)); }

    std::int64_t index(int in, int ic, int iy, int ix) const {
        return ((std::int64_t(in) * c + ic) * h + iy) * w + ix;
    }
    T& at(int in, int ic, int iy, int ix) { return data[std::size_t(index(in, ic, iy, ix))]; }
    const T& at(int in, int ic, int iy, int ix) const { return data[std::size_t(index(in, ic, iy, ix))]; }

    bool same_shape(const TensorT& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }

    std::string shape_str() const {
        return std::to_string(n) + "x" + std::to_string(c) + "x" +
               std::to_string(h) + "x" + std::to_string(w);
    }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }
};

using Tensor = TensorT<float>;

/// NaN/Inf anywhere is an error state; `what` names the producing operation.
template <typename T>
inline void ensure_finite(const TensorT<T>& t, const char* what) {
    for (const T& v : t.data) {
        if (!std::isfinite(v)) {
            throw std::runtime_error(std::string(what) + ": non-finite value in " + t.shape_str() + " tensor");
        }
    }
}

template <typename T>
inline bool bit_equal(const TensorT<T>& a, const TensorT<T>& b) {
    return a.same_shape(b) && a.data == b.data;
}

template <typename T>
inline double max_abs_diff(const TensorT<T>& a, const TensorT<T>& b) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument("max_abs_diff: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    }
    double m = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        m = std::max(m, std::abs(double(a.data[i]) - double(b.data[i])));
    }
    return m;
}

}  // namespace sgm
