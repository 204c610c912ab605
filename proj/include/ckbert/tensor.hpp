#pragma once
// Dense row-major 2-D arrays. Vectors are 1 x n.

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "ckbert/errors.hpp"

namespace ckbert {

template <typename T>
class Tensor {
public:
    Tensor() = default;
    Tensor(std::size_t rows, std::size_t cols, T fill = T{0}) : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return values_.size(); }
    bool same_shape(const Tensor& o) const noexcept { return rows_ == o.rows_ && cols_ == o.cols_; }

    T& operator()(std::size_t r, std::size_t c) noexcept { return values_[r * cols_ + c]; }
    const T& operator()(std::size_t r, std::size_t c) const noexcept { return values_[r * cols_ + c]; }
    T& operator[](std::size_t i) noexcept { return values_[i]; }
    const T& operator[](std::size_t i) const noexcept { return values_[i]; }

    std::span<T> row(std::size_t r) noexcept { return {values_.data() + r * cols_, cols_}; }
    std::span<const T> row(std::size_t r) const noexcept { return {values_.data() + r * cols_, cols_}; }
    std::span<T> values() noexcept { return values_; }
    std::span<const T> values() const noexcept { return values_; }

    void fill(T v) { std::fill(values_.begin(), values_.end(), v); }

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> values_;
};

// C += A * B
template <typename T>
void gemm_nn_acc(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& c) {
    if (a.cols() != b.rows() || c.rows() != a.rows() || c.cols() != b.cols()) {
        throw ContractViolation("gemm_nn: shape mismatch");
    }
    const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
    for (std::size_t i = 0; i < n; ++i) {
        T* ci = &c(i, 0);
        for (std::size_t p = 0; p < k; ++p) {
            const T aip = a(i, p);
            const T* bp = &b(p, 0);
            for (std::size_t j = 0; j < m; ++j) ci[j] += aip * bp[j];
        }
    }
}

// C += A * B^T
template <typename T>
void gemm_nt_acc(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& c) {
    if (a.cols() != b.cols() || c.rows() != a.rows() || c.cols() != b.rows()) {
        throw ContractViolation("gemm_nt: shape mismatch");
    }
    const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
    for (std::size_t i = 0; i < n; ++i) {
        const T* ai = &a(i, 0);
        for (std::size_t j = 0; j < m; ++j) {
            const T* bj = &b(j, 0);
            T s{0};
            for (std::size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
            c(i, j) += s;
        }
    }
}

// C += A^T * B
template <typename T>
void gemm_tn_acc(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& c) {
    if (a.rows() != b.rows() || c.rows() != a.cols() || c.cols() != b.cols()) {
        throw ContractViolation("gemm_tn: shape mismatch");
    }
    const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
    for (std::size_t r = 0; r < n; ++r) {
        const T* ar = &a(r, 0);
        const T* br = &b(r, 0);
        for (std::size_t i = 0; i < k; ++i) {
            const T ari = ar[i];
            T* ci = &c(i, 0);
            for (std::size_t j = 0; j < m; ++j) ci[j] += ari * br[j];
        }
    }
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    Tensor<T> c(a.rows(), b.cols());
    gemm_nn_acc(a, b, c);
    return c;
}

// Adds a 1 x cols bias to every row.
template <typename T>
void add_row_bias(Tensor<T>& x, const Tensor<T>& bias) {
    for (std::size_t i = 0; i < x.rows(); ++i) {
        auto r = x.row(i);
        for (std::size_t j = 0; j < x.cols(); ++j) r[j] += bias[j];
    }
}

// bias_grad += column sums of dy
template <typename T>
void accumulate_bias_grad(const Tensor<T>& dy, Tensor<T>& bias_grad) {
    for (std::size_t i = 0; i < dy.rows(); ++i) {
        auto r = dy.row(i);
        for (std::size_t j = 0; j < dy.cols(); ++j) bias_grad[j] += r[j];
    }
}

}  // namespace ckbert
