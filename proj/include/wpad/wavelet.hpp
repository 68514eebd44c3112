#pragma once

#include <cmath>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "wpad/errors.hpp"
#include "wpad/tensor.hpp"

namespace wpad {

// How a grayscale image is turned into the classifier's input tensor.
//   StackedSubbands: all four level-1 subbands as channels [LL, LH, HL, HH].
//   ApproxOnly:      the LL subband alone.
//   Raw:             no transform, the image itself as a single channel
//                    (baseline for wavelet-on/off comparisons).
enum class FeatureMode { StackedSubbands, ApproxOnly, Raw };

// Analysis/synthesis taps of one two-channel filter bank. The 1/sqrt(N)
// normalization is folded into the taps, and tap alignment is encoded by
// leading zeros, so the periodic transform below reconstructs exactly.
struct FilterPair {
    std::string name;
    std::vector<double> analysis_low;
    std::vector<double> analysis_high;
    std::vector<double> synthesis_low;
    std::vector<double> synthesis_high;

    static const FilterPair& haar() {
        static const FilterPair f = [] {
            const double s = 1.0 / std::sqrt(2.0);
            FilterPair p;
            p.name = "haar";
            p.analysis_low = {s, s};
            p.analysis_high = {s, -s};
            // Orthogonal pair: synthesis equals analysis.
            p.synthesis_low = p.analysis_low;
            p.synthesis_high = p.analysis_high;
            return p;
        }();
        return f;
    }

    static const FilterPair& bior22() {
        static const FilterPair f = [] {
            const double r = std::sqrt(2.0);
            FilterPair p;
            p.name = "bior2.2";
            p.analysis_low = {-0.125 * r, 0.25 * r, 0.75 * r, 0.25 * r, -0.125 * r};
            p.analysis_high = {0.0, 0.0, -0.5 / r, 1.0 / r, -0.5 / r};
            p.synthesis_low = {0.0, 0.5 / r, 1.0 / r, 0.5 / r};
            p.synthesis_high = {0.0, -0.125 * r, -0.25 * r, 0.75 * r, -0.25 * r, -0.125 * r};
            return p;
        }();
        return f;
    }

    static const FilterPair& by_name(std::string_view name) {
        if (name == "haar") return haar();
        if (name == "bior2.2") return bior22();
        throw ConfigError("unknown wavelet filter '" + std::string(name) +
                          "' (available: haar, bior2.2)");
    }
};

// The four level-1 subbands of one image plus the pre-padding source shape,
// so the inverse can crop back to the exact original dimensions.
template <typename T>
struct Subbands {
    Tensor<T> ll, lh, hl, hh;
    std::size_t source_h = 0, source_w = 0;
};

namespace detail {

// out[k] = sum_j taps[j] * x[(2k+j) mod n], n even.
template <typename T>
void analyze_periodic(const T* x, std::size_t n, const std::vector<double>& taps, T* out) {
    const std::size_t half = n / 2;
    for (std::size_t k = 0; k < half; ++k) {
        T acc = 0;
        for (std::size_t j = 0; j < taps.size(); ++j) {
            acc += static_cast<T>(taps[j]) * x[(2 * k + j) % n];
        }
        out[k] = acc;
    }
}

// x[(2k+j) mod n] += a[k]*g0[j] + d[k]*g1[j]
template <typename T>
void synthesize_periodic(const T* a, const T* d, std::size_t half,
                         const std::vector<double>& g0, const std::vector<double>& g1, T* x) {
    const std::size_t n = 2 * half;
    for (std::size_t i = 0; i < n; ++i) x[i] = 0;
    for (std::size_t k = 0; k < half; ++k) {
        for (std::size_t j = 0; j < g0.size(); ++j) {
            x[(2 * k + j) % n] += a[k] * static_cast<T>(g0[j]);
        }
        for (std::size_t j = 0; j < g1.size(); ++j) {
            x[(2 * k + j) % n] += d[k] * static_cast<T>(g1[j]);
        }
    }
}

}  // namespace detail

// Level-1 analysis of a 1D signal into approximation and detail halves.
// Periodic boundary extension; the signal length must be even.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> dwt1d(const Tensor<T>& signal, const FilterPair& f) {
    if (signal.rank() != 1) {
        throw ShapeError("dwt1d: expected rank-1 signal, got " + shape_str(signal.shape()));
    }
    const std::size_t n = signal.dim(0);
    if (n < 2 || n % 2 != 0) {
        throw Error("dwt1d: signal length must be even and >= 2, got " + std::to_string(n));
    }
    Tensor<T> approx({n / 2}), det({n / 2});
    detail::analyze_periodic(signal.raw(), n, f.analysis_low, approx.raw());
    detail::analyze_periodic(signal.raw(), n, f.analysis_high, det.raw());
    return {std::move(approx), std::move(det)};
}

template <typename T>
Tensor<T> idwt1d(const Tensor<T>& approx, const Tensor<T>& det, const FilterPair& f) {
    if (approx.rank() != 1 || det.rank() != 1 || approx.dim(0) != det.dim(0)) {
        throw ShapeError("idwt1d: approx " + shape_str(approx.shape()) + " and detail " +
                         shape_str(det.shape()) + " must be rank-1 of equal length");
    }
    Tensor<T> out({2 * approx.dim(0)});
    detail::synthesize_periodic(approx.raw(), det.raw(), approx.dim(0), f.synthesis_low,
                                f.synthesis_high, out.raw());
    return out;
}

// Separable level-1 2D transform: rows first, then columns of both halves.
// Odd dimensions are edge-padded by one row/column before the transform; the
// original shape is recorded in the result for exact inversion.
template <typename T>
Subbands<T> dwt2d(const Tensor<T>& image, const FilterPair& f) {
    if (image.rank() != 2) {
        throw ShapeError("dwt2d: expected rank-2 image, got " + shape_str(image.shape()));
    }
    const std::size_t src_h = image.dim(0), src_w = image.dim(1);
    if (src_h < 2 || src_w < 2) {
        throw Error("dwt2d: image must be at least 2x2, got " + shape_str(image.shape()));
    }
    const std::size_t h = src_h + (src_h % 2), w = src_w + (src_w % 2);

    // Padded working copy (duplicate last row/column when odd).
    std::vector<T> img(h * w);
    for (std::size_t r = 0; r < h; ++r) {
        const std::size_t sr = r < src_h ? r : src_h - 1;
        for (std::size_t c = 0; c < w; ++c) {
            const std::size_t sc = c < src_w ? c : src_w - 1;
            img[r * w + c] = image(sr, sc);
        }
    }

    const std::size_t hw = w / 2, hh = h / 2;
    std::vector<T> rows_low(h * hw), rows_high(h * hw);
    for (std::size_t r = 0; r < h; ++r) {
        detail::analyze_periodic(&img[r * w], w, f.analysis_low, &rows_low[r * hw]);
        detail::analyze_periodic(&img[r * w], w, f.analysis_high, &rows_high[r * hw]);
    }

    Subbands<T> sb;
    sb.source_h = src_h;
    sb.source_w = src_w;
    sb.ll = Tensor<T>({hh, hw});
    sb.lh = Tensor<T>({hh, hw});
    sb.hl = Tensor<T>({hh, hw});
    sb.hh = Tensor<T>({hh, hw});

    std::vector<T> col(h), a(hh), d(hh);
    for (std::size_t c = 0; c < hw; ++c) {
        for (std::size_t r = 0; r < h; ++r) col[r] = rows_low[r * hw + c];
        detail::analyze_periodic(col.data(), h, f.analysis_low, a.data());
        detail::analyze_periodic(col.data(), h, f.analysis_high, d.data());
        for (std::size_t r = 0; r < hh; ++r) {
            sb.ll(r, c) = a[r];
            sb.lh(r, c) = d[r];
        }
        for (std::size_t r = 0; r < h; ++r) col[r] = rows_high[r * hw + c];
        detail::analyze_periodic(col.data(), h, f.analysis_low, a.data());
        detail::analyze_periodic(col.data(), h, f.analysis_high, d.data());
        for (std::size_t r = 0; r < hh; ++r) {
            sb.hl(r, c) = a[r];
            sb.hh(r, c) = d[r];
        }
    }
    return sb;
}

template <typename T>
Tensor<T> idwt2d(const Subbands<T>& sb, const FilterPair& f) {
    const auto& shape = sb.ll.shape();
    if (sb.lh.shape() != shape || sb.hl.shape() != shape || sb.hh.shape() != shape) {
        throw ShapeError("idwt2d: subband shapes differ");
    }
    const std::size_t hh_ = shape[0], hw = shape[1];
    const std::size_t h = 2 * hh_, w = 2 * hw;
    if (sb.source_h == 0 || sb.source_h > h || sb.source_w == 0 || sb.source_w > w ||
        h - sb.source_h > 1 || w - sb.source_w > 1) {
        throw ShapeError("idwt2d: source_shape (" + std::to_string(sb.source_h) + "," +
                         std::to_string(sb.source_w) + ") inconsistent with subbands " +
                         shape_str(shape));
    }

    // Invert columns first, rebuilding the two row-filtered intermediates.
    std::vector<T> rows_low(h * hw), rows_high(h * hw);
    std::vector<T> a(hh_), d(hh_), col(h);
    for (std::size_t c = 0; c < hw; ++c) {
        for (std::size_t r = 0; r < hh_; ++r) {
            a[r] = sb.ll(r, c);
            d[r] = sb.lh(r, c);
        }
        detail::synthesize_periodic(a.data(), d.data(), hh_, f.synthesis_low, f.synthesis_high,
                                    col.data());
        for (std::size_t r = 0; r < h; ++r) rows_low[r * hw + c] = col[r];
        for (std::size_t r = 0; r < hh_; ++r) {
            a[r] = sb.hl(r, c);
            d[r] = sb.hh(r, c);
        }
        detail::synthesize_periodic(a.data(), d.data(), hh_, f.synthesis_low, f.synthesis_high,
                                    col.data());
        for (std::size_t r = 0; r < h; ++r) rows_high[r * hw + c] = col[r];
    }

    // Then invert rows and crop any padding.
    Tensor<T> out({sb.source_h, sb.source_w});
    std::vector<T> row(w);
    for (std::size_t r = 0; r < sb.source_h; ++r) {
        detail::synthesize_periodic(&rows_low[r * hw], &rows_high[r * hw], hw, f.synthesis_low,
                                    f.synthesis_high, row.data());
        for (std::size_t c = 0; c < sb.source_w; ++c) out(r, c) = row[c];
    }
    return out;
}

// DWT -> network hand-off: builds the rank-3 feature tensor fed to the model.
template <typename T>
Tensor<T> extract_features(const Tensor<T>& image, const FilterPair& f, FeatureMode mode) {
    if (mode == FeatureMode::Raw) {
        if (image.rank() != 2) {
            throw ShapeError("extract_features: expected rank-2 image, got " +
                             shape_str(image.shape()));
        }
        Tensor<T> out({1, image.dim(0), image.dim(1)});
        auto src = image.data();
        auto dst = out.data();
        for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i];
        return out;
    }

    const Subbands<T> sb = dwt2d(image, f);
    const std::size_t h = sb.ll.dim(0), w = sb.ll.dim(1);
    if (mode == FeatureMode::ApproxOnly) {
        Tensor<T> out({1, h, w});
        auto src = sb.ll.data();
        auto dst = out.data();
        for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i];
        return out;
    }

    Tensor<T> out({4, h, w});
    const Tensor<T>* bands[4] = {&sb.ll, &sb.lh, &sb.hl, &sb.hh};
    for (std::size_t b = 0; b < 4; ++b) {
        auto src = bands[b]->data();
        for (std::size_t i = 0; i < src.size(); ++i) out.data()[b * h * w + i] = src[i];
    }
    return out;
}

inline FeatureMode feature_mode_from_string(std::string_view s) {
    if (s == "stacked") return FeatureMode::StackedSubbands;
    if (s == "approx") return FeatureMode::ApproxOnly;
    if (s == "raw") return FeatureMode::Raw;
    throw ConfigError("unknown feature_mode '" + std::string(s) +
                      "' (expected stacked, approx or raw)");
}

inline std::string to_string(FeatureMode m) {
    switch (m) {
        case FeatureMode::StackedSubbands: return "stacked";
        case FeatureMode::ApproxOnly: return "approx";
        case FeatureMode::Raw: return "raw";
    }
    return "stacked";
}

}  // namespace wpad
