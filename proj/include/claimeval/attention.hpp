#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "claimeval/error.hpp"
#include "claimeval/tensor.hpp"

namespace claimeval {

/// Which keys each query may attend to, in compressed-row form.
///
/// A non-padding query i sees every non-padding key j with |i - j| <= window
/// plus every global key. A global query sees every non-padding key. Padding
/// is removed from both sides; a padding query has no legal key and falls
/// back to attending to itself with weight 1.
struct AttentionPattern {
    std::size_t length = 0;
    std::vector<std::size_t> offsets; // length + 1 entries
    std::vector<std::size_t> keys;

    std::span<const std::size_t> row(std::size_t i) const {
        return std::span<const std::size_t>(keys).subspan(offsets[i], offsets[i + 1] - offsets[i]);
    }
};

inline AttentionPattern build_attention_pattern(std::size_t length, std::size_t window,
                                                std::span<const std::size_t> global_positions,
                                                std::span<const bool> pad_mask) {
    if (window < 1)
        throw InputError("attention window must be >= 1");
    if (!pad_mask.empty() && pad_mask.size() != length)
        throw InputError("pad mask length does not match the sequence");
    auto is_pad = [&](std::size_t j) { return !pad_mask.empty() && pad_mask[j]; };
    std::vector<bool> global(length, false);
    for (std::size_t g : global_positions) {
        if (g >= length)
            throw InputError("global position outside the sequence");
        global[g] = true;
    }

    AttentionPattern p;
    p.length = length;
    p.offsets.reserve(length + 1);
    p.offsets.push_back(0);
    std::vector<std::size_t> row;
    for (std::size_t i = 0; i < length; ++i) {
        row.clear();
        if (is_pad(i)) {
            row.push_back(i);
        } else if (global[i]) {
            for (std::size_t j = 0; j < length; ++j)
                if (!is_pad(j))
                    row.push_back(j);
        } else {
            const std::size_t lo = i >= window ? i - window : 0;
            const std::size_t hi = std::min(length - 1, i + window);
            for (std::size_t g : global_positions)
                if ((g < lo || g > hi) && !is_pad(g))
                    row.push_back(g);
            for (std::size_t j = lo; j <= hi; ++j)
                if (!is_pad(j))
                    row.push_back(j);
            std::sort(row.begin(), row.end());
            row.erase(std::unique(row.begin(), row.end()), row.end());
        }
        p.keys.insert(p.keys.end(), row.begin(), row.end());
        p.offsets.push_back(p.keys.size());
    }
    return p;
}

// The same pattern with only the first `rows` query rows.
inline AttentionPattern leading_rows(const AttentionPattern &p, std::size_t rows) {
    AttentionPattern out;
    out.length = p.length;
    out.offsets.assign(p.offsets.begin(), p.offsets.begin() + static_cast<std::ptrdiff_t>(rows + 1));
    out.keys.assign(p.keys.begin(), p.keys.begin() + static_cast<std::ptrdiff_t>(p.offsets[rows]));
    return out;
}

/// Single-head scaled dot-product attention restricted to `pattern`.
/// q, k, v are length×dh. `probs` receives the softmax weights aligned with
/// pattern.keys.
template <typename T>
Matrix<T> pattern_attention(const Matrix<T> &q, const Matrix<T> &k, const Matrix<T> &v,
                            const AttentionPattern &pattern, std::vector<T> *probs = nullptr) {
    const std::size_t n = q.rows(), dh = q.cols();
    const T scale = T(1) / std::sqrt(static_cast<T>(dh));
    Matrix<T> out(n, v.cols());
    std::vector<T> local;
    if (probs)
        probs->assign(pattern.keys.size(), T(0));
    for (std::size_t i = 0; i < n; ++i) {
        const auto keys = pattern.row(i);
        local.assign(keys.size(), T(0));
        T max_logit = -std::numeric_limits<T>::infinity();
        for (std::size_t t = 0; t < keys.size(); ++t) {
            const T *qi = q.row(i);
            const T *kj = k.row(keys[t]);
            T s = 0;
            for (std::size_t c = 0; c < dh; ++c)
                s += qi[c] * kj[c];
            local[t] = s * scale;
            max_logit = std::max(max_logit, local[t]);
        }
        T denom = 0;
        for (auto &w : local) {
            w = std::exp(w - max_logit);
            denom += w;
        }
        T *oi = out.row(i);
        for (std::size_t t = 0; t < keys.size(); ++t) {
            local[t] /= denom;
            const T *vj = v.row(keys[t]);
            for (std::size_t c = 0; c < v.cols(); ++c)
                oi[c] += local[t] * vj[c];
        }
        if (probs)
            std::copy(local.begin(), local.end(), probs->begin() + static_cast<std::ptrdiff_t>(pattern.offsets[i]));
    }
    return out;
}

/// Backward of pattern_attention. Accumulates into dq, dk, dv (pre-sized).
template <typename T>
void pattern_attention_backward(const Matrix<T> &q, const Matrix<T> &k, const Matrix<T> &v,
                                const AttentionPattern &pattern, const std::vector<T> &probs,
                                const Matrix<T> &dout, Matrix<T> &dq, Matrix<T> &dk, Matrix<T> &dv) {
    const std::size_t n = q.rows(), dh = q.cols();
    const T scale = T(1) / std::sqrt(static_cast<T>(dh));
    std::vector<T> dp;
    for (std::size_t i = 0; i < n; ++i) {
        const T *gi = dout.row(i);
        bool any = false;
        for (std::size_t c = 0; c < dout.cols(); ++c)
            any = any || gi[c] != T(0);
        if (!any)
            continue;
        const auto keys = pattern.row(i);
        const T *pi = probs.data() + pattern.offsets[i];
        dp.assign(keys.size(), T(0));
        T weighted = 0;
        for (std::size_t t = 0; t < keys.size(); ++t) {
            const T *vj = v.row(keys[t]);
            T *dvj = dv.row(keys[t]);
            T s = 0;
            for (std::size_t c = 0; c < v.cols(); ++c) {
                s += gi[c] * vj[c];
                dvj[c] += pi[t] * gi[c];
            }
            dp[t] = s;
            weighted += pi[t] * s;
        }
        const T *qi = q.row(i);
        T *dqi = dq.row(i);
        for (std::size_t t = 0; t < keys.size(); ++t) {
            const T ds = pi[t] * (dp[t] - weighted) * scale;
            if (ds == T(0))
                continue;
            const T *kj = k.row(keys[t]);
            T *dkj = dk.row(keys[t]);
            for (std::size_t c = 0; c < dh; ++c) {
                dqi[c] += ds * kj[c];
                dkj[c] += ds * qi[c];
            }
        }
    }
}

/// Sliding-window self-attention for one head. `pad_mask[i]` marks padding.
template <typename T>
Matrix<T> sliding_window_attention(const Matrix<T> &q, const Matrix<T> &k, const Matrix<T> &v,
                                   std::size_t window, std::span<const std::size_t> global_positions,
                                   std::span<const bool> pad_mask = {}) {
    if (q.rows() != k.rows() || q.rows() != v.rows() || q.cols() != k.cols())
        throw InputError("sliding_window_attention: q, k, v shapes disagree");
    const auto pattern = build_attention_pattern(q.rows(), window, global_positions, pad_mask);
    return pattern_attention(q, k, v, pattern);
}

} // namespace claimeval
