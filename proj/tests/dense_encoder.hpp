// Naive dense-attention encoder over the full padded sequence. Padding is
// excluded with an explicit key mask and pad queries attend only to
// themselves. Shares nothing with the library beyond the parameter layout.
#pragma once

#include <cmath>
#include <vector>

#include "claimeval/scorer.hpp"

namespace claimeval::testkit {

using Mat = std::vector<std::vector<double>>;

inline Mat dense_matmul(const Mat &a, const Matrix<double> &w) {
    Mat out(a.size(), std::vector<double>(w.cols(), 0.0));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < w.cols(); ++j)
            for (std::size_t k = 0; k < w.rows(); ++k)
                out[i][j] += a[i][k] * w(k, j);
    return out;
}

inline void dense_add_bias(Mat &a, const Matrix<double> &b) {
    for (auto &row : a)
        for (std::size_t j = 0; j < row.size(); ++j)
            row[j] += b(0, j);
}

inline void dense_layer_norm(Mat &a, const Matrix<double> &g, const Matrix<double> &b) {
    for (auto &row : a) {
        double mean = 0, var = 0;
        for (double x : row)
            mean += x;
        mean /= static_cast<double>(row.size());
        for (double x : row)
            var += (x - mean) * (x - mean);
        var /= static_cast<double>(row.size());
        for (std::size_t j = 0; j < row.size(); ++j)
            row[j] = (row[j] - mean) / std::sqrt(var + 1e-5) * g(0, j) + b(0, j);
    }
}

// Single-head dense attention; mask[j] == false removes key j. A query with
// no legal key attends to itself.
inline Mat dense_attention(const Mat &q, const Mat &k, const Mat &v, const std::vector<bool> &mask) {
    const std::size_t n = q.size();
    const double scale = 1.0 / std::sqrt(static_cast<double>(q[0].size()));
    Mat out(n, std::vector<double>(v[0].size(), 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> w(n, 0.0);
        double total = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (!mask[j])
                continue;
            double s = 0;
            for (std::size_t c = 0; c < q[i].size(); ++c)
                s += q[i][c] * k[j][c];
            w[j] = std::exp(s * scale);
            total += w[j];
        }
        if (total == 0) {
            out[i] = v[i];
            continue;
        }
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t c = 0; c < v[0].size(); ++c)
                out[i][c] += w[j] / total * v[j][c];
    }
    return out;
}

inline Mat columns(const Mat &a, std::size_t c0, std::size_t width) {
    Mat out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        out[i].assign(a[i].begin() + static_cast<std::ptrdiff_t>(c0),
                      a[i].begin() + static_cast<std::ptrdiff_t>(c0 + width));
    return out;
}

inline std::vector<double> dense_forward(const TokenSequence &seq, const ScorerParams<double> &p,
                                         const ScorerConfig &cfg) {
    const std::size_t n = seq.ids.size(), d = cfg.hidden, dh = cfg.head_dim();
    std::vector<bool> mask(n);
    for (std::size_t i = 0; i < n; ++i)
        mask[i] = i < seq.length;
    Mat x(n, std::vector<double>(d));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < d; ++c)
            x[i][c] = p.token_embedding(seq.ids[i], c) + p.position_embedding(i, c);
    for (const auto &L : p.layers) {
        Mat q = dense_matmul(x, L.wq), k = dense_matmul(x, L.wk), v = dense_matmul(x, L.wv);
        dense_add_bias(q, L.bq);
        dense_add_bias(v, L.bv);
        Mat attn(n, std::vector<double>(d));
        for (std::size_t h = 0; h < cfg.heads; ++h) {
            // Pad queries fall back to themselves.
            auto out = dense_attention(columns(q, h * dh, dh), columns(k, h * dh, dh), columns(v, h * dh, dh), mask);
            for (std::size_t i = 0; i < n; ++i) {
                if (!mask[i])
                    out[i] = columns(v, h * dh, dh)[i];
                for (std::size_t c = 0; c < dh; ++c)
                    attn[i][h * dh + c] = out[i][c];
            }
        }
        Mat o = dense_matmul(attn, L.wo);
        dense_add_bias(o, L.bo);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < d; ++c)
                o[i][c] += x[i][c];
        dense_layer_norm(o, L.ln1_gamma, L.ln1_beta);
        Mat f = dense_matmul(o, L.w1);
        dense_add_bias(f, L.b1);
        for (auto &row : f)
            for (auto &z : row)
                z = 0.5 * z * (1 + std::erf(z / std::sqrt(2.0)));
        Mat f2 = dense_matmul(f, L.w2);
        dense_add_bias(f2, L.b2);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < d; ++c)
                f2[i][c] += o[i][c];
        dense_layer_norm(f2, L.ln2_gamma, L.ln2_beta);
        x = std::move(f2);
    }
    return x[0];
}

} // namespace claimeval::testkit
