#pragma once

#include <cassert>
#include <cstddef>
#include <span>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "wpad/errors.hpp"

namespace wpad {

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << ',';
        os << s[i];
    }
    os << ')';
    return os.str();
}

// Dense real-valued array, rank 1-4, contiguous row-major storage.
// Rank-4 tensors use N,C,H,W layout: element (n,c,h,w) lives at
// ((n*C + c)*H + h)*W + w. Precision is fixed at construction by the
// template parameter; gradient checks must instantiate double.
//
// Thread safety: safe to share read-only; in-place mutation requires
// exclusive ownership.
template <typename T>
class Tensor {
    static_assert(std::is_floating_point_v<T>);

public:
    Tensor() = default;  // empty placeholder (e.g. "layer has no bias")

    explicit Tensor(Shape shape) : shape_(std::move(shape)) {
        data_.assign(checked_size(shape_), T(0));
    }

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

    static Tensor from_values(Shape shape, std::vector<T> values) {
        const std::size_t n = checked_size(shape);
        if (values.size() != n) {
            throw ShapeError("from_values: shape " + shape_str(shape) + " holds " +
                             std::to_string(n) + " elements, got " +
                             std::to_string(values.size()) + " values");
        }
        Tensor t;
        t.shape_ = std::move(shape);
        t.data_ = std::move(values);
        return t;
    }

    static Tensor full(Shape shape, T value) {
        Tensor t(std::move(shape));
        for (auto& v : t.data_) v = value;
        return t;
    }

    bool empty() const { return shape_.empty(); }
    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_[i]; }
    std::size_t size() const { return data_.size(); }

    std::span<T> data() { return data_; }
    std::span<const T> data() const { return data_; }
    T* raw() { return data_.data(); }
    const T* raw() const { return data_.data(); }

    T& operator()(std::size_t i) {
        assert(rank() == 1);
        return data_[i];
    }
    T operator()(std::size_t i) const {
        assert(rank() == 1);
        return data_[i];
    }
    T& operator()(std::size_t i, std::size_t j) {
        assert(rank() == 2);
        return data_[i * shape_[1] + j];
    }
    T operator()(std::size_t i, std::size_t j) const {
        assert(rank() == 2);
        return data_[i * shape_[1] + j];
    }
    T& operator()(std::size_t i, std::size_t j, std::size_t k) {
        assert(rank() == 3);
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }
    T operator()(std::size_t i, std::size_t j, std::size_t k) const {
        assert(rank() == 3);
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }
    T& operator()(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
        assert(rank() == 4);
        return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
    }
    T operator()(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
        assert(rank() == 4);
        return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
    }

    Tensor reshaped(Shape new_shape) const {
        const std::size_t n = checked_size(new_shape);
        if (n != size()) {
            throw ShapeError("reshape: " + shape_str(shape_) + " -> " + shape_str(new_shape) +
                             " changes element count");
        }
        Tensor t;
        t.shape_ = std::move(new_shape);
        t.data_ = data_;
        return t;
    }

    template <typename U>
    Tensor<U> astype() const {
        std::vector<U> out(data_.begin(), data_.end());
        return Tensor<U>::from_values(shape_, std::move(out));
    }

private:
    static std::size_t checked_size(const Shape& shape) {
        if (shape.empty() || shape.size() > 4) {
            throw ShapeError("tensor rank must be 1-4, got shape " + shape_str(shape));
        }
        std::size_t n = 1;
        for (std::size_t d : shape) {
            if (d == 0) {
                throw ShapeError("non-positive dimension in shape " + shape_str(shape));
            }
            n *= d;
        }
        return n;
    }

    Shape shape_;
    std::vector<T> data_;
};

namespace detail {

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
    }
}

// C(M,N) = A(M,K) * B(K,N), accumulating into C. The i-k-j loop order keeps
// B and C row accesses contiguous so the inner loop vectorizes.
template <typename T>
void gemm_nn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        T* crow = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const T aik = a[i * k + p];
            const T* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
        }
    }
}

// C(M,N) = A(M,K) * B(N,K)^T, accumulating.
template <typename T>
void gemm_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const T* arow = a + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            const T* brow = b + j * k;
            T acc = 0;
            for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
            c[i * n + j] += acc;
        }
    }
}

// C(M,N) = A(K,M)^T * B(K,N), accumulating.
template <typename T>
void gemm_tn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t p = 0; p < k; ++p) {
        const T* arow = a + p * m;
        const T* brow = b + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const T aki = arow[i];
            T* crow = c + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += aki * brow[j];
        }
    }
}

}  // namespace detail

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    detail::require_same_shape(a, b, "add");
    Tensor<T> out(a.shape());
    auto ad = a.data(), bd = b.data();
    auto od = out.data();
    for (std::size_t i = 0; i < od.size(); ++i) od[i] = ad[i] + bd[i];
    return out;
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    detail::require_same_shape(a, b, "sub");
    Tensor<T> out(a.shape());
    auto ad = a.data(), bd = b.data();
    auto od = out.data();
    for (std::size_t i = 0; i < od.size(); ++i) od[i] = ad[i] - bd[i];
    return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    detail::require_same_shape(a, b, "mul");
    Tensor<T> out(a.shape());
    auto ad = a.data(), bd = b.data();
    auto od = out.data();
    for (std::size_t i = 0; i < od.size(); ++i) od[i] = ad[i] * bd[i];
    return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s) {
    Tensor<T> out(a.shape());
    auto ad = a.data();
    auto od = out.data();
    for (std::size_t i = 0; i < od.size(); ++i) od[i] = ad[i] * s;
    return out;
}

template <typename T>
void add_inplace(Tensor<T>& a, const Tensor<T>& b) {
    detail::require_same_shape(a, b, "add_inplace");
    auto ad = a.data();
    auto bd = b.data();
    for (std::size_t i = 0; i < ad.size(); ++i) ad[i] += bd[i];
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() != 2 || b.rank() != 2) {
        throw ShapeError("matmul: operands must be rank-2, got " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()));
    }
    if (a.dim(1) != b.dim(0)) {
        throw ShapeError("matmul: inner dimensions differ, " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
    }
    Tensor<T> out({a.dim(0), b.dim(1)});
    detail::gemm_nn(a.raw(), b.raw(), out.raw(), a.dim(0), a.dim(1), b.dim(1));
    return out;
}

template <typename T>
T max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
    detail::require_same_shape(a, b, "max_abs_diff");
    T m = 0;
    auto ad = a.data(), bd = b.data();
    for (std::size_t i = 0; i < ad.size(); ++i) {
        const T d = ad[i] > bd[i] ? ad[i] - bd[i] : bd[i] - ad[i];
        if (d > m) m = d;
    }
    return m;
}

}  // namespace wpad
