#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "ecgbeatnet/errors.hpp"
#include "ecgbeatnet/rng.hpp"

namespace ecg::nn {

// Dense row-major tensor. Production paths run float; the gradient checker
// instantiates everything with double.
template <typename T>
struct Tensor {
    std::vector<int> shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
        data.assign(static_cast<size_t>(numel_of(shape)), T(0));
    }
    Tensor(std::vector<int> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
        if (static_cast<int64_t>(data.size()) != numel_of(shape)) {
            throw ShapeMismatch("tensor data length does not match its shape");
        }
    }

    static int64_t numel_of(std::span<const int> s) {
        int64_t n = 1;
        for (int d : s) {
            if (d <= 0) throw ShapeMismatch("tensor dimensions must be positive");
            n *= d;
        }
        return n;
    }

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    int dim(size_t i) const { return shape[i]; }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out;
        out.shape = shape;
        out.data.assign(data.begin(), data.end());
        return out;
    }
};

template <typename T>
void check_finite(const Tensor<T> &t, const char *what) {
    for (T v : t.data) {
        if (!std::isfinite(static_cast<double>(v))) {
            throw NonFiniteValue(std::string(what) + " contains a non-finite value");
        }
    }
}

template <typename T>
void require_shape(const Tensor<T> &t, std::initializer_list<int> expected, const char *what) {
    if (!std::equal(t.shape.begin(), t.shape.end(), expected.begin(), expected.end()) ||
        t.shape.size() != expected.size()) {
        std::string got;
        for (int d : t.shape) got += (got.empty() ? "" : "x") + std::to_string(d);
        std::string want;
        for (int d : expected) want += (want.empty() ? "" : "x") + std::to_string(d);
        throw ShapeMismatch(std::string(what) + ": shape " + got + ", expected " + want);
    }
}

// --- 1-D convolution, stride 1, odd kernel, "same" zero padding ------------
// Cross-correlation convention: y[o,t] = b[o] + sum_{c,k} x[c,t+k-P] w[o,c,k].

template <typename T>
Tensor<T> conv1d_forward(const Tensor<T> &x, const Tensor<T> &w, const Tensor<T> &b) {
    if (x.shape.size() != 2 || w.shape.size() != 3 || b.shape.size() != 1) {
        throw ShapeMismatch("conv1d expects x[C_in,L], w[C_out,C_in,K], b[C_out]");
    }
    const int c_in = x.dim(0), len = x.dim(1);
    const int c_out = w.dim(0), k_size = w.dim(2);
    if (w.dim(1) != c_in || b.dim(0) != c_out) {
        throw ShapeMismatch("conv1d parameter shapes do not match the input");
    }
    if (k_size % 2 == 0) throw ShapeMismatch("conv1d kernel width must be odd");
    const int pad = (k_size - 1) / 2;

    Tensor<T> y({c_out, len});
    for (int o = 0; o < c_out; ++o) {
        T *yo = y.data.data() + static_cast<size_t>(o) * len;
        std::fill(yo, yo + len, b.data[static_cast<size_t>(o)]);
        for (int c = 0; c < c_in; ++c) {
            const T *xc = x.data.data() + static_cast<size_t>(c) * len;
            const T *wk = w.data.data() + (static_cast<size_t>(o) * c_in + c) * k_size;
            for (int k = 0; k < k_size; ++k) {
                const T weight = wk[k];
                const int shift = k - pad;
                const int t0 = std::max(0, -shift);
                const int t1 = std::min(len, len - shift);
                for (int t = t0; t < t1; ++t) yo[t] += weight * xc[t + shift];
            }
        }
    }
    return y;
}

// Returns dx; accumulates into dw and db.
template <typename T>
Tensor<T> conv1d_backward(const Tensor<T> &x, const Tensor<T> &w, const Tensor<T> &dy,
                          Tensor<T> &dw, Tensor<T> &db) {
    const int c_in = x.dim(0), len = x.dim(1);
    const int c_out = w.dim(0), k_size = w.dim(2);
    require_shape(dy, {c_out, len}, "conv1d upstream gradient");
    require_shape(dw, {c_out, c_in, k_size}, "conv1d weight gradient");
    require_shape(db, {c_out}, "conv1d bias gradient");
    const int pad = (k_size - 1) / 2;

    Tensor<T> dx({c_in, len});
    for (int o = 0; o < c_out; ++o) {
        const T *dyo = dy.data.data() + static_cast<size_t>(o) * len;
        T acc = 0;
        for (int t = 0; t < len; ++t) acc += dyo[t];
        db.data[static_cast<size_t>(o)] += acc;

        for (int c = 0; c < c_in; ++c) {
            const T *xc = x.data.data() + static_cast<size_t>(c) * len;
            T *dxc = dx.data.data() + static_cast<size_t>(c) * len;
            const size_t w_base = (static_cast<size_t>(o) * c_in + c) * k_size;
            for (int k = 0; k < k_size; ++k) {
                const int shift = k - pad;
                const int t0 = std::max(0, -shift);
                const int t1 = std::min(len, len - shift);
                T dot = 0;
                const T weight = w.data[w_base + static_cast<size_t>(k)];
                for (int t = t0; t < t1; ++t) {
                    dot += dyo[t] * xc[t + shift];
                    dxc[t + shift] += weight * dyo[t];
                }
                dw.data[w_base + static_cast<size_t>(k)] += dot;
            }
        }
    }
    return dx;
}

// --- ReLU -------------------------------------------------------------------

template <typename T>
Tensor<T> relu_forward(const Tensor<T> &x) {
    Tensor<T> y;
    y.shape = x.shape;
    y.data.resize(x.data.size());
    for (size_t i = 0; i < x.data.size(); ++i) y.data[i] = x.data[i] > T(0) ? x.data[i] : T(0);
    return y;
}

// Gradient at exactly zero is defined as zero.
template <typename T>
Tensor<T> relu_backward(const Tensor<T> &x, const Tensor<T> &dy) {
    if (x.shape != dy.shape) throw ShapeMismatch("relu backward shape mismatch");
    Tensor<T> dx;
    dx.shape = x.shape;
    dx.data.resize(x.data.size());
    for (size_t i = 0; i < x.data.size(); ++i) {
        dx.data[i] = x.data[i] > T(0) ? dy.data[i] : T(0);
    }
    return dx;
}

// --- max pooling, window 2, stride 2 -----------------------------------------
// Ties resolve to the lower index so backward routing is deterministic.

template <typename T>
struct PoolResult {
    Tensor<T> y;
    std::vector<int32_t> argmax; // flat indices into the input, one per output
};

template <typename T>
PoolResult<T> maxpool1d_forward(const Tensor<T> &x) {
    if (x.shape.size() != 2) throw ShapeMismatch("maxpool1d expects x[C,L]");
    const int channels = x.dim(0), len = x.dim(1);
    if (len % 2 != 0) {
        throw OddLength("maxpool1d needs an even length, got " + std::to_string(len));
    }
    PoolResult<T> result;
    result.y = Tensor<T>({channels, len / 2});
    result.argmax.resize(static_cast<size_t>(channels) * (len / 2));
    for (int c = 0; c < channels; ++c) {
        const T *xc = x.data.data() + static_cast<size_t>(c) * len;
        T *yc = result.y.data.data() + static_cast<size_t>(c) * (len / 2);
        int32_t *am = result.argmax.data() + static_cast<size_t>(c) * (len / 2);
        for (int j = 0; j < len / 2; ++j) {
            const int left = 2 * j;
            if (xc[left] >= xc[left + 1]) {
                yc[j] = xc[left];
                am[j] = static_cast<int32_t>(c) * len + left;
            } else {
                yc[j] = xc[left + 1];
                am[j] = static_cast<int32_t>(c) * len + left + 1;
            }
        }
    }
    return result;
}

template <typename T>
Tensor<T> maxpool1d_backward(const PoolResult<T> &pooled, const Tensor<T> &dy, int input_len) {
    if (dy.shape != pooled.y.shape) throw ShapeMismatch("maxpool1d backward shape mismatch");
    Tensor<T> dx({pooled.y.dim(0), input_len});
    for (size_t i = 0; i < pooled.argmax.size(); ++i) {
        dx.data[static_cast<size_t>(pooled.argmax[i])] += dy.data[i];
    }
    return dx;
}

// --- global average pooling ---------------------------------------------------

template <typename T>
Tensor<T> global_avg_pool_forward(const Tensor<T> &x) {
    if (x.shape.size() != 2) throw ShapeMismatch("global_avg_pool expects x[C,L]");
    const int channels = x.dim(0), len = x.dim(1);
    Tensor<T> y({channels});
    for (int c = 0; c < channels; ++c) {
        const T *xc = x.data.data() + static_cast<size_t>(c) * len;
        T acc = 0;
        for (int t = 0; t < len; ++t) acc += xc[t];
        y.data[static_cast<size_t>(c)] = acc / static_cast<T>(len);
    }
    return y;
}

template <typename T>
Tensor<T> global_avg_pool_backward(const Tensor<T> &dy, int input_len) {
    Tensor<T> dx({dy.dim(0), input_len});
    for (int c = 0; c < dy.dim(0); ++c) {
        const T g = dy.data[static_cast<size_t>(c)] / static_cast<T>(input_len);
        T *dxc = dx.data.data() + static_cast<size_t>(c) * input_len;
        std::fill(dxc, dxc + input_len, g);
    }
    return dx;
}

// --- dense (fully connected) ---------------------------------------------------

template <typename T>
Tensor<T> dense_forward(const Tensor<T> &x, const Tensor<T> &w, const Tensor<T> &b) {
    if (x.shape.size() != 1 || w.shape.size() != 2 || b.shape.size() != 1) {
        throw ShapeMismatch("dense expects x[D_in], w[D_out,D_in], b[D_out]");
    }
    const int d_in = x.dim(0), d_out = w.dim(0);
    if (w.dim(1) != d_in || b.dim(0) != d_out) {
        throw ShapeMismatch("dense parameter shapes do not match the input");
    }
    Tensor<T> y({d_out});
    for (int o = 0; o < d_out; ++o) {
        const T *wo = w.data.data() + static_cast<size_t>(o) * d_in;
        T acc = b.data[static_cast<size_t>(o)];
        for (int i = 0; i < d_in; ++i) acc += wo[i] * x.data[static_cast<size_t>(i)];
        y.data[static_cast<size_t>(o)] = acc;
    }
    return y;
}

template <typename T>
Tensor<T> dense_backward(const Tensor<T> &x, const Tensor<T> &w, const Tensor<T> &dy,
                         Tensor<T> &dw, Tensor<T> &db) {
    const int d_in = x.dim(0), d_out = w.dim(0);
    require_shape(dy, {d_out}, "dense upstream gradient");
    require_shape(dw, {d_out, d_in}, "dense weight gradient");
    require_shape(db, {d_out}, "dense bias gradient");
    Tensor<T> dx({d_in});
    for (int o = 0; o < d_out; ++o) {
        const T g = dy.data[static_cast<size_t>(o)];
        const T *wo = w.data.data() + static_cast<size_t>(o) * d_in;
        T *dwo = dw.data.data() + static_cast<size_t>(o) * d_in;
        db.data[static_cast<size_t>(o)] += g;
        for (int i = 0; i < d_in; ++i) {
            dwo[i] += g * x.data[static_cast<size_t>(i)];
            dx.data[static_cast<size_t>(i)] += g * wo[i];
        }
    }
    return dx;
}

// --- weighted softmax cross-entropy ------------------------------------------

template <typename T>
Tensor<T> softmax(const Tensor<T> &logits) {
    Tensor<T> p;
    p.shape = logits.shape;
    p.data.resize(logits.data.size());
    const T max_logit = *std::max_element(logits.data.begin(), logits.data.end());
    T total = 0;
    for (size_t i = 0; i < logits.data.size(); ++i) {
        p.data[i] = std::exp(logits.data[i] - max_logit);
        total += p.data[i];
    }
    for (T &v : p.data) v /= total;
    return p;
}

template <typename T>
struct XentResult {
    T loss;
    Tensor<T> dlogits;
};

// loss = -weight * ln p[target]; dlogits = weight * (p - onehot(target)).
template <typename T>
XentResult<T> softmax_xent(const Tensor<T> &logits, int target, T weight) {
    if (logits.shape.size() != 1) throw ShapeMismatch("softmax_xent expects a logit vector");
    if (target < 0 || target >= logits.dim(0)) {
        throw ShapeMismatch("softmax_xent target out of range");
    }
    XentResult<T> result;
    Tensor<T> p = softmax(logits);
    result.loss = -weight * std::log(p.data[static_cast<size_t>(target)]);
    result.dlogits = std::move(p);
    for (T &v : result.dlogits.data) v *= weight;
    result.dlogits.data[static_cast<size_t>(target)] -= weight;
    return result;
}

// --- finite-difference gradient checker ---------------------------------------

// Central differences on up to max_coords sampled coordinates. coords are
// pointers to live scalars the loss function reads; analytic holds the
// already-computed gradient in the same order. Runs in double only.
double grad_check(const std::function<double()> &loss_fn, std::span<double *const> coords,
                  std::span<const double> analytic, rng::Generator &gen, int max_coords = 200,
                  double epsilon = 1e-5);

} // namespace ecg::nn
