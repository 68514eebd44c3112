#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "wpad/errors.hpp"
#include "wpad/tensor.hpp"

namespace wpad {

enum class LayerKind { Conv2d, BatchNorm, ReLU, MaxPool2d, FullyConnected, SoftmaxCE };

// Parameters and hyperparameters of a single layer. Which tensors are
// populated depends on the kind:
//   Conv2d:         weight (Cout,Cin,k,k), bias (Cout)
//   BatchNorm:      weight = gamma (C), bias = beta (C), running_mean/var (C)
//   FullyConnected: weight (Dout,Din), bias (Dout)
//   ReLU/MaxPool2d: no tensors
template <typename T>
struct LayerParams {
    LayerKind kind = LayerKind::ReLU;
    Tensor<T> weight;
    Tensor<T> bias;
    Tensor<T> running_mean;
    Tensor<T> running_var;
    int kernel = 0;
    int stride = 1;
    int padding = 0;
    int pool_window = 2;
    int pool_stride = 2;
    double bn_eps = 1e-5;
    double bn_momentum = 0.1;

    static LayerParams conv2d(std::size_t cin, std::size_t cout, int k, int stride = 1,
                              int padding = 0) {
        LayerParams p;
        p.kind = LayerKind::Conv2d;
        p.weight = Tensor<T>({cout, cin, static_cast<std::size_t>(k), static_cast<std::size_t>(k)});
        p.bias = Tensor<T>({cout});
        p.kernel = k;
        p.stride = stride;
        p.padding = padding;
        return p;
    }

    static LayerParams batchnorm(std::size_t c) {
        LayerParams p;
        p.kind = LayerKind::BatchNorm;
        p.weight = Tensor<T>::full({c}, T(1));  // gamma
        p.bias = Tensor<T>({c});                // beta
        p.running_mean = Tensor<T>({c});
        p.running_var = Tensor<T>::full({c}, T(1));
        return p;
    }

    static LayerParams relu() {
        LayerParams p;
        p.kind = LayerKind::ReLU;
        return p;
    }

    static LayerParams maxpool(int window = 2, int stride = 2) {
        LayerParams p;
        p.kind = LayerKind::MaxPool2d;
        p.pool_window = window;
        p.pool_stride = stride;
        return p;
    }

    static LayerParams fully_connected(std::size_t din, std::size_t dout) {
        LayerParams p;
        p.kind = LayerKind::FullyConnected;
        p.weight = Tensor<T>({dout, din});
        p.bias = Tensor<T>({dout});
        return p;
    }
};

// Gradients of the trainable tensors, shape-identical to the params.
template <typename T>
struct LayerGrads {
    Tensor<T> weight;
    Tensor<T> bias;
};

namespace detail {

// Unpacks x(n) into columns: col(Cin*k*k, Hout*Wout), zero-padded borders.
template <typename T>
void im2col(const Tensor<T>& x, std::size_t n, int k, int stride, int pad, std::size_t hout,
            std::size_t wout, T* col) {
    const std::size_t cin = x.dim(1), h = x.dim(2), w = x.dim(3);
    const std::size_t cols = hout * wout;
    const T* base = x.raw() + n * cin * h * w;
    std::size_t row = 0;
    for (std::size_t c = 0; c < cin; ++c) {
        const T* plane = base + c * h * w;
        for (int kh = 0; kh < k; ++kh) {
            for (int kw = 0; kw < k; ++kw, ++row) {
                T* out = col + row * cols;
                for (std::size_t oh = 0; oh < hout; ++oh) {
                    const long ih = static_cast<long>(oh) * stride + kh - pad;
                    if (ih < 0 || ih >= static_cast<long>(h)) {
                        for (std::size_t ow = 0; ow < wout; ++ow) out[oh * wout + ow] = 0;
                        continue;
                    }
                    const T* src = plane + ih * w;
                    for (std::size_t ow = 0; ow < wout; ++ow) {
                        const long iw = static_cast<long>(ow) * stride + kw - pad;
                        out[oh * wout + ow] =
                            (iw < 0 || iw >= static_cast<long>(w)) ? T(0) : src[iw];
                    }
                }
            }
        }
    }
}

// Scatter-add of a column matrix back into the image gradient, inverse of im2col.
template <typename T>
void col2im_add(const T* col, std::size_t cin, std::size_t h, std::size_t w, int k, int stride,
                int pad, std::size_t hout, std::size_t wout, T* grad_plane_base) {
    const std::size_t cols = hout * wout;
    std::size_t row = 0;
    for (std::size_t c = 0; c < cin; ++c) {
        T* plane = grad_plane_base + c * h * w;
        for (int kh = 0; kh < k; ++kh) {
            for (int kw = 0; kw < k; ++kw, ++row) {
                const T* src = col + row * cols;
                for (std::size_t oh = 0; oh < hout; ++oh) {
                    const long ih = static_cast<long>(oh) * stride + kh - pad;
                    if (ih < 0 || ih >= static_cast<long>(h)) continue;
                    for (std::size_t ow = 0; ow < wout; ++ow) {
                        const long iw = static_cast<long>(ow) * stride + kw - pad;
                        if (iw < 0 || iw >= static_cast<long>(w)) continue;
                        plane[ih * w + iw] += src[oh * wout + ow];
                    }
                }
            }
        }
    }
}

template <typename T>
std::pair<std::size_t, std::size_t> conv_output_dims(const Tensor<T>& x, const LayerParams<T>& p) {
    if (x.rank() != 4) {
        throw ShapeError("conv2d: expected N,C,H,W input, got " + shape_str(x.shape()));
    }
    if (p.stride < 1 || p.padding < 0) {
        throw ConfigError("conv2d: stride must be >= 1 and padding >= 0");
    }
    if (x.dim(1) != p.weight.dim(1)) {
        throw ShapeError("conv2d: input channels " + std::to_string(x.dim(1)) +
                         " do not match kernel " + shape_str(p.weight.shape()));
    }
    const long h = static_cast<long>(x.dim(2)) + 2 * p.padding - p.kernel;
    const long w = static_cast<long>(x.dim(3)) + 2 * p.padding - p.kernel;
    if (h < 0 || w < 0 || h % p.stride != 0 || w % p.stride != 0) {
        throw ConfigError("conv2d: output size (H+2p-k)/s+1 is not exact for input " +
                          shape_str(x.shape()) + " with k=" + std::to_string(p.kernel) +
                          " s=" + std::to_string(p.stride) + " p=" + std::to_string(p.padding));
    }
    return {static_cast<std::size_t>(h / p.stride) + 1, static_cast<std::size_t>(w / p.stride) + 1};
}

}  // namespace detail

// 2D convolution in the cross-correlation convention (no kernel flip).
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const LayerParams<T>& p) {
    const auto [hout, wout] = detail::conv_output_dims(x, p);
    const std::size_t n = x.dim(0), cout = p.weight.dim(0), cin = x.dim(1);
    const std::size_t ckk = cin * p.kernel * p.kernel, cols = hout * wout;

    Tensor<T> out({n, cout, hout, wout});
    std::vector<T> col(ckk * cols);
    for (std::size_t i = 0; i < n; ++i) {
        detail::im2col(x, i, p.kernel, p.stride, p.padding, hout, wout, col.data());
        T* dst = out.raw() + i * cout * cols;
        for (std::size_t c = 0; c < cout; ++c) {
            const T b = p.bias(c);
            for (std::size_t j = 0; j < cols; ++j) dst[c * cols + j] = b;
        }
        detail::gemm_nn(p.weight.raw(), col.data(), dst, cout, ckk, cols);
    }
    return out;
}

template <typename T>
std::pair<Tensor<T>, LayerGrads<T>> conv2d_backward(const Tensor<T>& x, const LayerParams<T>& p,
                                                    const Tensor<T>& grad_out) {
    const auto [hout, wout] = detail::conv_output_dims(x, p);
    const std::size_t n = x.dim(0), cout = p.weight.dim(0), cin = x.dim(1);
    if (grad_out.shape() != Shape{n, cout, hout, wout}) {
        throw ShapeError("conv2d_backward: grad_out " + shape_str(grad_out.shape()) +
                         " does not match forward output (" + std::to_string(n) + "," +
                         std::to_string(cout) + "," + std::to_string(hout) + "," +
                         std::to_string(wout) + ")");
    }
    const std::size_t ckk = cin * p.kernel * p.kernel, cols = hout * wout;

    LayerGrads<T> grads;
    grads.weight = Tensor<T>(p.weight.shape());
    grads.bias = Tensor<T>(p.bias.shape());
    Tensor<T> grad_x(x.shape());

    std::vector<T> col(ckk * cols), colgrad(ckk * cols);
    for (std::size_t i = 0; i < n; ++i) {
        const T* g = grad_out.raw() + i * cout * cols;
        for (std::size_t c = 0; c < cout; ++c) {
            T acc = 0;
            for (std::size_t j = 0; j < cols; ++j) acc += g[c * cols + j];
            grads.bias(c) += acc;
        }
        detail::im2col(x, i, p.kernel, p.stride, p.padding, hout, wout, col.data());
        // dW += G * col^T, dcol = W^T * G
        detail::gemm_nt(g, col.data(), grads.weight.raw(), cout, cols, ckk);
        std::fill(colgrad.begin(), colgrad.end(), T(0));
        detail::gemm_tn(p.weight.raw(), g, colgrad.data(), ckk, cout, cols);
        detail::col2im_add(colgrad.data(), cin, x.dim(2), x.dim(3), p.kernel, p.stride, p.padding,
                           hout, wout, grad_x.raw() + i * cin * x.dim(2) * x.dim(3));
    }
    return {std::move(grad_x), std::move(grads)};
}

// Batch normalization over N,H,W per channel. Training mode normalizes with
// batch statistics and updates the running estimates (new = momentum * batch
// + (1-momentum) * old, unbiased variance); inference mode uses the stored
// running statistics and leaves the params untouched.
template <typename T>
Tensor<T> batchnorm_forward(const Tensor<T>& x, LayerParams<T>& p, bool training,
                            bool update_running = true) {
    if (x.rank() != 4 || x.dim(1) != p.weight.dim(0)) {
        throw ShapeError("batchnorm: input " + shape_str(x.shape()) +
                         " does not match channel count " + std::to_string(p.weight.dim(0)));
    }
    const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const std::size_t plane = h * w, m = n * plane;
    if (training && n < 2) {
        throw Error("batchnorm: training mode requires batch size >= 2, got " + std::to_string(n));
    }

    Tensor<T> out(x.shape());
    for (std::size_t ch = 0; ch < c; ++ch) {
        T mean, var;
        if (training) {
            T sum = 0;
            for (std::size_t i = 0; i < n; ++i) {
                const T* src = x.raw() + (i * c + ch) * plane;
                for (std::size_t j = 0; j < plane; ++j) sum += src[j];
            }
            mean = sum / static_cast<T>(m);
            T sq = 0;
            for (std::size_t i = 0; i < n; ++i) {
                const T* src = x.raw() + (i * c + ch) * plane;
                for (std::size_t j = 0; j < plane; ++j) {
                    const T d = src[j] - mean;
                    sq += d * d;
                }
            }
            var = sq / static_cast<T>(m);
            if (update_running) {
                const T mom = static_cast<T>(p.bn_momentum);
                const T unbiased = sq / static_cast<T>(m - 1);
                p.running_mean(ch) = (T(1) - mom) * p.running_mean(ch) + mom * mean;
                p.running_var(ch) = (T(1) - mom) * p.running_var(ch) + mom * unbiased;
            }
        } else {
            mean = p.running_mean(ch);
            var = p.running_var(ch);
        }
        const T inv = T(1) / std::sqrt(var + static_cast<T>(p.bn_eps));
        const T gamma = p.weight(ch), beta = p.bias(ch);
        for (std::size_t i = 0; i < n; ++i) {
            const T* src = x.raw() + (i * c + ch) * plane;
            T* dst = out.raw() + (i * c + ch) * plane;
            for (std::size_t j = 0; j < plane; ++j) {
                dst[j] = gamma * (src[j] - mean) * inv + beta;
            }
        }
    }
    return out;
}

// Training-mode gradient; batch statistics are recomputed from x.
template <typename T>
std::pair<Tensor<T>, LayerGrads<T>> batchnorm_backward(const Tensor<T>& x,
                                                       const LayerParams<T>& p,
                                                       const Tensor<T>& grad_out) {
    detail::require_same_shape(x, grad_out, "batchnorm_backward");
    const std::size_t n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
    const std::size_t m = n * plane;

    LayerGrads<T> grads;
    grads.weight = Tensor<T>({c});
    grads.bias = Tensor<T>({c});
    Tensor<T> grad_x(x.shape());

    for (std::size_t ch = 0; ch < c; ++ch) {
        T sum = 0, sq = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const T* src = x.raw() + (i * c + ch) * plane;
            for (std::size_t j = 0; j < plane; ++j) sum += src[j];
        }
        const T mean = sum / static_cast<T>(m);
        for (std::size_t i = 0; i < n; ++i) {
            const T* src = x.raw() + (i * c + ch) * plane;
            for (std::size_t j = 0; j < plane; ++j) {
                const T d = src[j] - mean;
                sq += d * d;
            }
        }
        const T var = sq / static_cast<T>(m);
        const T inv = T(1) / std::sqrt(var + static_cast<T>(p.bn_eps));
        const T gamma = p.weight(ch);

        // Accumulate dbeta, dgamma, and the two reduction terms of dx.
        T dbeta = 0, dgamma = 0, dxhat_sum = 0, dxhat_dot = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const T* src = x.raw() + (i * c + ch) * plane;
            const T* g = grad_out.raw() + (i * c + ch) * plane;
            for (std::size_t j = 0; j < plane; ++j) {
                const T xhat = (src[j] - mean) * inv;
                dbeta += g[j];
                dgamma += g[j] * xhat;
                dxhat_sum += g[j] * gamma;
                dxhat_dot += g[j] * gamma * xhat;
            }
        }
        grads.bias(ch) = dbeta;
        grads.weight(ch) = dgamma;

        const T invm = T(1) / static_cast<T>(m);
        for (std::size_t i = 0; i < n; ++i) {
            const T* src = x.raw() + (i * c + ch) * plane;
            const T* g = grad_out.raw() + (i * c + ch) * plane;
            T* dst = grad_x.raw() + (i * c + ch) * plane;
            for (std::size_t j = 0; j < plane; ++j) {
                const T xhat = (src[j] - mean) * inv;
                dst[j] = inv * (g[j] * gamma - invm * dxhat_sum - invm * xhat * dxhat_dot);
            }
        }
    }
    return {std::move(grad_x), std::move(grads)};
}

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& x) {
    Tensor<T> out(x.shape());
    auto src = x.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] > T(0) ? src[i] : T(0);
    return out;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& grad_out) {
    detail::require_same_shape(x, grad_out, "relu_backward");
    Tensor<T> out(x.shape());
    auto src = x.data();
    auto g = grad_out.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] > T(0) ? g[i] : T(0);
    return out;
}

template <typename T>
Tensor<T> maxpool2d_forward(const Tensor<T>& x, const LayerParams<T>& p) {
    if (x.rank() != 4) {
        throw ShapeError("maxpool2d: expected N,C,H,W input, got " + shape_str(x.shape()));
    }
    const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const std::size_t win = static_cast<std::size_t>(p.pool_window);
    const std::size_t st = static_cast<std::size_t>(p.pool_stride);
    if (win < 1 || st < 1 || (h - win) % st != 0 || (w - win) % st != 0 || h < win || w < win) {
        throw ConfigError("maxpool2d: window " + std::to_string(win) + "/stride " +
                          std::to_string(st) + " does not tile input " + shape_str(x.shape()));
    }
    const std::size_t hout = (h - win) / st + 1, wout = (w - win) / st + 1;
    Tensor<T> out({n, c, hout, wout});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t ch = 0; ch < c; ++ch) {
            const T* plane = x.raw() + (i * c + ch) * h * w;
            T* dst = out.raw() + (i * c + ch) * hout * wout;
            for (std::size_t oh = 0; oh < hout; ++oh) {
                for (std::size_t ow = 0; ow < wout; ++ow) {
                    T best = plane[(oh * st) * w + ow * st];
                    for (std::size_t kh = 0; kh < win; ++kh) {
                        for (std::size_t kw = 0; kw < win; ++kw) {
                            const T v = plane[(oh * st + kh) * w + ow * st + kw];
                            if (v > best) best = v;
                        }
                    }
                    dst[oh * wout + ow] = best;
                }
            }
        }
    }
    return out;
}

// Routes the gradient to the argmax of each window; ties go to the first
// position in scan order so the backward pass is deterministic.
template <typename T>
Tensor<T> maxpool2d_backward(const Tensor<T>& x, const LayerParams<T>& p,
                             const Tensor<T>& grad_out) {
    const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const std::size_t win = static_cast<std::size_t>(p.pool_window);
    const std::size_t st = static_cast<std::size_t>(p.pool_stride);
    const std::size_t hout = (h - win) / st + 1, wout = (w - win) / st + 1;
    if (grad_out.shape() != Shape{n, c, hout, wout}) {
        throw ShapeError("maxpool2d_backward: grad_out " + shape_str(grad_out.shape()) +
                         " does not match pooled shape");
    }
    Tensor<T> grad_x(x.shape());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t ch = 0; ch < c; ++ch) {
            const T* plane = x.raw() + (i * c + ch) * h * w;
            T* gplane = grad_x.raw() + (i * c + ch) * h * w;
            const T* g = grad_out.raw() + (i * c + ch) * hout * wout;
            for (std::size_t oh = 0; oh < hout; ++oh) {
                for (std::size_t ow = 0; ow < wout; ++ow) {
                    std::size_t bh = oh * st, bw = ow * st;
                    T best = plane[bh * w + bw];
                    for (std::size_t kh = 0; kh < win; ++kh) {
                        for (std::size_t kw = 0; kw < win; ++kw) {
                            const T v = plane[(oh * st + kh) * w + ow * st + kw];
                            if (v > best) {
                                best = v;
                                bh = oh * st + kh;
                                bw = ow * st + kw;
                            }
                        }
                    }
                    gplane[bh * w + bw] += g[oh * wout + ow];
                }
            }
        }
    }
    return grad_x;
}

template <typename T>
Tensor<T> fc_forward(const Tensor<T>& x, const LayerParams<T>& p) {
    if (x.rank() != 2 || x.dim(1) != p.weight.dim(1)) {
        throw ShapeError("fc: input " + shape_str(x.shape()) + " does not match weights " +
                         shape_str(p.weight.shape()));
    }
    const std::size_t n = x.dim(0), dout = p.weight.dim(0), din = p.weight.dim(1);
    Tensor<T> out({n, dout});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < dout; ++j) out(i, j) = p.bias(j);
    }
    detail::gemm_nt(x.raw(), p.weight.raw(), out.raw(), n, din, dout);
    return out;
}

template <typename T>
std::pair<Tensor<T>, LayerGrads<T>> fc_backward(const Tensor<T>& x, const LayerParams<T>& p,
                                                const Tensor<T>& grad_out) {
    const std::size_t n = x.dim(0), dout = p.weight.dim(0), din = p.weight.dim(1);
    if (grad_out.shape() != Shape{n, dout}) {
        throw ShapeError("fc_backward: grad_out " + shape_str(grad_out.shape()) +
                         " does not match output shape");
    }
    LayerGrads<T> grads;
    grads.weight = Tensor<T>({dout, din});
    grads.bias = Tensor<T>({dout});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < dout; ++j) grads.bias(j) += grad_out(i, j);
    }
    detail::gemm_tn(grad_out.raw(), x.raw(), grads.weight.raw(), dout, n, din);
    Tensor<T> grad_x({n, din});
    detail::gemm_nn(grad_out.raw(), p.weight.raw(), grad_x.raw(), n, dout, din);
    return {std::move(grad_x), std::move(grads)};
}

// Row-wise softmax with max subtraction for overflow safety.
template <typename T>
Tensor<T> softmax(const Tensor<T>& logits) {
    if (logits.rank() != 2) {
        throw ShapeError("softmax: expected rank-2 logits, got " + shape_str(logits.shape()));
    }
    const std::size_t n = logits.dim(0), k = logits.dim(1);
    Tensor<T> out(logits.shape());
    for (std::size_t i = 0; i < n; ++i) {
        T mx = logits(i, 0);
        for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, logits(i, j));
        T denom = 0;
        for (std::size_t j = 0; j < k; ++j) {
            const T e = std::exp(logits(i, j) - mx);
            out(i, j) = e;
            denom += e;
        }
        for (std::size_t j = 0; j < k; ++j) out(i, j) /= denom;
    }
    return out;
}

// Mean cross-entropy over the batch plus its gradient w.r.t. the logits:
// grad = (softmax - onehot) / N.
template <typename T>
std::pair<T, Tensor<T>> softmax_ce(const Tensor<T>& logits, std::span<const int> labels) {
    if (logits.rank() != 2 || logits.dim(0) != labels.size()) {
        throw ShapeError("softmax_ce: logits " + shape_str(logits.shape()) + " vs " +
                         std::to_string(labels.size()) + " labels");
    }
    const std::size_t n = logits.dim(0), k = logits.dim(1);
    for (int y : labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= k) {
            throw Error("softmax_ce: label " + std::to_string(y) + " out of range [0," +
                        std::to_string(k) + ")");
        }
    }
    Tensor<T> grad = softmax(logits);
    T loss = 0;
    for (std::size_t i = 0; i < n; ++i) {
        // -log p[label], computed from the shifted logits to avoid log(0).
        T mx = logits(i, 0);
        for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, logits(i, j));
        T denom = 0;
        for (std::size_t j = 0; j < k; ++j) denom += std::exp(logits(i, j) - mx);
        const std::size_t y = static_cast<std::size_t>(labels[i]);
        loss += std::log(denom) - (logits(i, y) - mx);
        grad(i, y) -= T(1);
    }
    const T invn = T(1) / static_cast<T>(n);
    for (auto& g : grad.data()) g *= invn;
    return {loss * invn, std::move(grad)};
}

}  // namespace wpad
