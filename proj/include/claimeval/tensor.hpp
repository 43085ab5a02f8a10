#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <span>
#include <vector>

#include "claimeval/error.hpp"

namespace claimeval {

// Row-major dense matrix. Vectors are 1×n matrices.
template <typename T>
class Matrix {
  public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, T fill = T(0)) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }

    T &operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    T operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    T *row(std::size_t r) { return data_.data() + r * cols_; }
    const T *row(std::size_t r) const { return data_.data() + r * cols_; }

    std::span<T> flat() { return data_; }
    std::span<const T> flat() const { return data_; }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
    void resize(std::size_t rows, std::size_t cols) {
        rows_ = rows;
        cols_ = cols;
        data_.assign(rows * cols, T(0));
    }

    bool same_shape(const Matrix &o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
    bool operator==(const Matrix &) const = default;

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

namespace kernels {

// c = a · b   (n×k · k×m)
template <typename T>
void matmul(const Matrix<T> &a, const Matrix<T> &b, Matrix<T> &c) {
    assert(a.cols() == b.rows());
    c.resize(a.rows(), b.cols());
    const std::size_t k = a.cols(), m = b.cols();
    if constexpr (sizeof(T) > sizeof(double)) {
        // Extended precision does not vectorize; keep four accumulators in
        // registers instead of streaming through c.
        for (std::size_t i = 0; i < a.rows(); ++i) {
            const T *ai = a.row(i);
            T *ci = c.row(i);
            std::size_t j = 0;
            for (; j + 4 <= m; j += 4) {
                T s0 = 0, s1 = 0, s2 = 0, s3 = 0;
                for (std::size_t p = 0; p < k; ++p) {
                    const T aip = ai[p];
                    const T *bp = b.row(p) + j;
                    s0 += aip * bp[0];
                    s1 += aip * bp[1];
                    s2 += aip * bp[2];
                    s3 += aip * bp[3];
                }
                ci[j] = s0;
                ci[j + 1] = s1;
                ci[j + 2] = s2;
                ci[j + 3] = s3;
            }
            for (; j < m; ++j) {
                T s = 0;
                for (std::size_t p = 0; p < k; ++p)
                    s += ai[p] * b(p, j);
                ci[j] = s;
            }
        }
        return;
    }
    for (std::size_t i = 0; i < a.rows(); ++i) {
        T *ci = c.row(i);
        const T *ai = a.row(i);
        for (std::size_t p = 0; p < k; ++p) {
            const T aip = ai[p];
            const T *bp = b.row(p);
            for (std::size_t j = 0; j < m; ++j)
                ci[j] += aip * bp[j];
        }
    }
}

// c += aᵀ · b   (a: n×k, b: n×m, c: k×m)
template <typename T>
void matmul_tn_acc(const Matrix<T> &a, const Matrix<T> &b, Matrix<T> &c) {
    assert(a.rows() == b.rows() && c.rows() == a.cols() && c.cols() == b.cols());
    const std::size_t m = b.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const T *ai = a.row(i);
        const T *bi = b.row(i);
        for (std::size_t p = 0; p < a.cols(); ++p) {
            const T aip = ai[p];
            if (aip == T(0))
                continue;
            T *cp = c.row(p);
            for (std::size_t j = 0; j < m; ++j)
                cp[j] += aip * bi[j];
        }
    }
}

// c += a · bᵀ   (a: n×m, b: k×m, c: n×k)
template <typename T>
void matmul_nt_acc(const Matrix<T> &a, const Matrix<T> &b, Matrix<T> &c) {
    assert(a.cols() == b.cols() && c.rows() == a.rows() && c.cols() == b.rows());
    const std::size_t m = a.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const T *ai = a.row(i);
        T *ci = c.row(i);
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const T *bj = b.row(j);
            T s = 0;
            for (std::size_t p = 0; p < m; ++p)
                s += ai[p] * bj[p];
            ci[j] += s;
        }
    }
}

// Adds a 1×m bias to every row.
template <typename T>
void add_bias(Matrix<T> &x, const Matrix<T> &bias) {
    for (std::size_t i = 0; i < x.rows(); ++i) {
        T *xi = x.row(i);
        for (std::size_t j = 0; j < x.cols(); ++j)
            xi[j] += bias(0, j);
    }
}

// bias_grad += column sums of g.
template <typename T>
void sum_rows_acc(const Matrix<T> &g, Matrix<T> &bias_grad) {
    for (std::size_t i = 0; i < g.rows(); ++i) {
        const T *gi = g.row(i);
        for (std::size_t j = 0; j < g.cols(); ++j)
            bias_grad(0, j) += gi[j];
    }
}

template <typename T>
void add_inplace(Matrix<T> &x, const Matrix<T> &y) {
    auto xf = x.flat();
    auto yf = y.flat();
    for (std::size_t i = 0; i < xf.size(); ++i)
        xf[i] += yf[i];
}

template <typename T>
T gelu(T x) {
    return T(0.5) * x * (T(1) + std::erf(x / std::sqrt(T(2))));
}

template <typename T>
T gelu_grad(T x) {
    const T cdf = T(0.5) * (T(1) + std::erf(x / std::sqrt(T(2))));
    const T pdf = std::exp(T(-0.5) * x * x) / std::sqrt(T(2) * T(3.14159265358979323846));
    return cdf + x * pdf;
}

template <typename T>
T sigmoid(T z) {
    if (z >= 0)
        return T(1) / (T(1) + std::exp(-z));
    const T e = std::exp(z);
    return e / (T(1) + e);
}

inline constexpr double kLayerNormEps = 1e-5;

// Row-wise layer norm. Keeps normalized rows and inverse std for backward.
template <typename T>
void layer_norm(const Matrix<T> &x, const Matrix<T> &gamma, const Matrix<T> &beta, Matrix<T> &y,
                Matrix<T> &xhat, std::vector<T> &rstd) {
    const std::size_t n = x.rows(), d = x.cols();
    y.resize(n, d);
    xhat.resize(n, d);
    rstd.assign(n, T(0));
    for (std::size_t i = 0; i < n; ++i) {
        const T *xi = x.row(i);
        T mean = 0;
        for (std::size_t j = 0; j < d; ++j)
            mean += xi[j];
        mean /= static_cast<T>(d);
        T var = 0;
        for (std::size_t j = 0; j < d; ++j)
            var += (xi[j] - mean) * (xi[j] - mean);
        var /= static_cast<T>(d);
        const T r = T(1) / std::sqrt(var + static_cast<T>(kLayerNormEps));
        rstd[i] = r;
        for (std::size_t j = 0; j < d; ++j) {
            const T h = (xi[j] - mean) * r;
            xhat(i, j) = h;
            y(i, j) = h * gamma(0, j) + beta(0, j);
        }
    }
}

template <typename T>
void layer_norm_backward(const Matrix<T> &dy, const Matrix<T> &xhat, const std::vector<T> &rstd,
                         const Matrix<T> &gamma, Matrix<T> &dx, Matrix<T> &dgamma, Matrix<T> &dbeta) {
    const std::size_t n = dy.rows(), d = dy.cols();
    dx.resize(n, d);
    std::vector<T> dxhat(d);
    for (std::size_t i = 0; i < n; ++i) {
        const T *dyi = dy.row(i);
        const T *hi = xhat.row(i);
        T mean_dxhat = 0, mean_dxhat_xhat = 0;
        bool any = false;
        for (std::size_t j = 0; j < d; ++j) {
            any = any || dyi[j] != T(0);
            dgamma(0, j) += dyi[j] * hi[j];
            dbeta(0, j) += dyi[j];
            dxhat[j] = dyi[j] * gamma(0, j);
            mean_dxhat += dxhat[j];
            mean_dxhat_xhat += dxhat[j] * hi[j];
        }
        if (!any)
            continue;
        mean_dxhat /= static_cast<T>(d);
        mean_dxhat_xhat /= static_cast<T>(d);
        T *dxi = dx.row(i);
        for (std::size_t j = 0; j < d; ++j)
            dxi[j] = rstd[i] * (dxhat[j] - mean_dxhat - hi[j] * mean_dxhat_xhat);
    }
}

} // namespace kernels
} // namespace claimeval
