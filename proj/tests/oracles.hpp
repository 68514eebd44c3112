// Test-only reference implementations, deliberately written as direct
// brute-force loops so they stay independent of the library's optimized
// paths (im2col/gemm, grouped ROC sweeps, ...).
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "wpad/metrics.hpp"
#include "wpad/tensor.hpp"
#include "wpad/wavelet.hpp"

namespace oracle {

inline wpad::Tensor<double> naive_matmul(const wpad::Tensor<double>& a,
                                         const wpad::Tensor<double>& b) {
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    wpad::Tensor<double> c({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0;
            for (std::size_t p = 0; p < k; ++p) acc += a(i, p) * b(p, j);
            c(i, j) = acc;
        }
    }
    return c;
}

// Sliding-window convolution (cross-correlation), four explicit loops.
inline wpad::Tensor<double> naive_conv2d(const wpad::Tensor<double>& x,
                                         const wpad::Tensor<double>& w,
                                         const wpad::Tensor<double>& bias, int stride, int pad) {
    const std::size_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), ww = x.dim(3);
    const std::size_t cout = w.dim(0), k = w.dim(2);
    const std::size_t hout = (h + 2 * pad - k) / stride + 1;
    const std::size_t wout = (ww + 2 * pad - k) / stride + 1;
    wpad::Tensor<double> out({n, cout, hout, wout});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t co = 0; co < cout; ++co) {
            for (std::size_t oh = 0; oh < hout; ++oh) {
                for (std::size_t ow = 0; ow < wout; ++ow) {
                    double acc = bias(co);
                    for (std::size_t ci = 0; ci < cin; ++ci) {
                        for (std::size_t kh = 0; kh < k; ++kh) {
                            for (std::size_t kw = 0; kw < k; ++kw) {
                                const long ih = static_cast<long>(oh * stride + kh) - pad;
                                const long iw = static_cast<long>(ow * stride + kw) - pad;
                                if (ih < 0 || iw < 0 || ih >= static_cast<long>(h) ||
                                    iw >= static_cast<long>(ww)) {
                                    continue;
                                }
                                acc += w(co, ci, kh, kw) * x(i, ci, ih, iw);
                            }
                        }
                    }
                    out(i, co, oh, ow) = acc;
                }
            }
        }
    }
    return out;
}

// Full periodic correlation followed by keep-every-second-sample.
inline std::pair<std::vector<double>, std::vector<double>> naive_dwt1d(
    const std::vector<double>& x, const wpad::FilterPair& f) {
    const std::size_t n = x.size();
    auto correlate = [&](const std::vector<double>& taps) {
        std::vector<double> full(n, 0.0);
        for (std::size_t m = 0; m < n; ++m) {
            for (std::size_t j = 0; j < taps.size(); ++j) {
                full[m] += taps[j] * x[(m + j) % n];
            }
        }
        std::vector<double> down;
        for (std::size_t m = 0; m < n; m += 2) down.push_back(full[m]);
        return down;
    };
    return {correlate(f.analysis_low), correlate(f.analysis_high)};
}

// AUC by the Mann-Whitney pair count: every positive/negative pair scores
// 1 for concordance and 0.5 for a tie.
inline double mann_whitney_auc(std::span<const wpad::ScoredSample> samples) {
    double num = 0;
    std::size_t pairs = 0;
    for (const auto& p : samples) {
        if (p.label != 1) continue;
        for (const auto& q : samples) {
            if (q.label != 0) continue;
            ++pairs;
            if (p.score > q.score) {
                num += 1.0;
            } else if (p.score == q.score) {
                num += 0.5;
            }
        }
    }
    return num / static_cast<double>(pairs);
}

// Central-difference gradient check. `loss` must be a pure function of the
// current values behind `params`; `analytic` holds the gradient to verify.
// Returns the worst relative error over all coordinates.
inline double finite_diff_max_rel_err(const std::function<double()>& loss,
                                      std::span<double> params, std::span<const double> analytic,
                                      double h = 1e-5) {
    double worst = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double saved = params[i];
        params[i] = saved + h;
        const double lp = loss();
        params[i] = saved - h;
        const double lm = loss();
        params[i] = saved;
        const double fd = (lp - lm) / (2.0 * h);
        const double rel = std::abs(fd - analytic[i]) / (std::abs(fd) + std::abs(analytic[i]) + 1e-8);
        worst = std::max(worst, rel);
    }
    return worst;
}

}  // namespace oracle
