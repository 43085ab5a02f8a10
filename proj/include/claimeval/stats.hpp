#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "claimeval/corpus.hpp"
#include "claimeval/error.hpp"

namespace claimeval::stats {

// A correlation that is undefined (an all-tied input) is std::nullopt.
using Correlation = std::optional<double>;

using LabelVector = std::vector<Label>;

inline std::vector<double> as_numbers(std::span<const Label> labels) {
    std::vector<double> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i)
        out[i] = to_int(labels[i]);
    return out;
}

namespace detail {

inline void require_pairs(std::size_t nx, std::size_t ny) {
    if (nx != ny)
        throw InputError("correlation inputs differ in length");
    if (nx < 2)
        throw InputError("correlation needs at least two observations");
}

// Sum of t(t-1)/2 over runs of equal adjacent values of a sorted sequence.
template <typename Eq>
std::int64_t tied_pairs(std::size_t n, Eq &&equal_to_prev) {
    std::int64_t pairs = 0, run = 1;
    for (std::size_t i = 1; i < n; ++i) {
        if (equal_to_prev(i)) {
            ++run;
        } else {
            pairs += run * (run - 1) / 2;
            run = 1;
        }
    }
    return pairs + run * (run - 1) / 2;
}

// Stable merge sort of `v` counting inversions (strictly greater before smaller).
inline std::int64_t count_swaps(std::vector<double> &v, std::vector<double> &buf, std::size_t lo,
                                std::size_t hi) {
    if (hi - lo < 2)
        return 0;
    const std::size_t mid = lo + (hi - lo) / 2;
    std::int64_t swaps = count_swaps(v, buf, lo, mid) + count_swaps(v, buf, mid, hi);
    std::size_t i = lo, j = mid, k = lo;
    while (i < mid && j < hi) {
        if (v[j] < v[i]) {
            swaps += static_cast<std::int64_t>(mid - i);
            buf[k++] = v[j++];
        } else {
            buf[k++] = v[i++];
        }
    }
    while (i < mid)
        buf[k++] = v[i++];
    while (j < hi)
        buf[k++] = v[j++];
    std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo), buf.begin() + static_cast<std::ptrdiff_t>(hi),
              v.begin() + static_cast<std::ptrdiff_t>(lo));
    return swaps;
}

} // namespace detail

// Pair counts behind tau-b; exposed so callers can inspect C - D directly.
struct KendallCounts {
    std::int64_t n0 = 0;           // n(n-1)/2
    std::int64_t ties_x = 0;       // n1
    std::int64_t ties_y = 0;       // n2
    std::int64_t concordant_minus_discordant = 0;
};

/// Knight's O(n log n) pair counting.
inline KendallCounts kendall_counts(std::span<const double> x, std::span<const double> y) {
    detail::require_pairs(x.size(), y.size());
    const std::size_t n = x.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
    });

    KendallCounts k;
    k.n0 = static_cast<std::int64_t>(n) * static_cast<std::int64_t>(n - 1) / 2;
    k.ties_x = detail::tied_pairs(n, [&](std::size_t i) { return x[order[i]] == x[order[i - 1]]; });
    const std::int64_t ties_xy = detail::tied_pairs(n, [&](std::size_t i) {
        return x[order[i]] == x[order[i - 1]] && y[order[i]] == y[order[i - 1]];
    });

    std::vector<double> ys(n), buf(n);
    for (std::size_t i = 0; i < n; ++i)
        ys[i] = y[order[i]];
    const std::int64_t swaps = detail::count_swaps(ys, buf, 0, n);
    k.ties_y = detail::tied_pairs(n, [&](std::size_t i) { return ys[i] == ys[i - 1]; });

    // Pairs untied in both: n0 - n1 - n2 + n3; each swap is a discordant pair.
    k.concordant_minus_discordant = k.n0 - k.ties_x - k.ties_y + ties_xy - 2 * swaps;
    return k;
}

inline Correlation tau_b_from_counts(const KendallCounts &k) {
    if (k.n0 == k.ties_x || k.n0 == k.ties_y)
        return std::nullopt;
    return static_cast<double>(k.concordant_minus_discordant) /
           std::sqrt(static_cast<double>(k.n0 - k.ties_x) * static_cast<double>(k.n0 - k.ties_y));
}

inline Correlation kendall_tau_b(std::span<const double> x, std::span<const double> y) {
    return tau_b_from_counts(kendall_counts(x, y));
}

/// 1-based ranks with ties sharing the mean of their positions.
inline std::vector<double> mid_ranks(std::span<const double> v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i + 1;
        while (j < n && v[order[j]] == v[order[i]])
            ++j;
        const double rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k)
            ranks[order[k]] = rank;
        i = j;
    }
    return ranks;
}

inline Correlation pearson(std::span<const double> a, std::span<const double> b) {
    detail::require_pairs(a.size(), b.size());
    // Decide degeneracy exactly; rounding in the mean can leave a constant
    // vector with a tiny nonzero spread.
    auto constant = [](std::span<const double> v) {
        return std::all_of(v.begin(), v.end(), [&](double x) { return x == v[0]; });
    };
    if (constant(a) || constant(b))
        return std::nullopt;
    const double n = static_cast<double>(a.size());
    const double mean_a = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mean_b = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - mean_a, db = b[i] - mean_b;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa == 0 || sbb == 0)
        return std::nullopt;
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

/// Pearson correlation of mid-ranks. Doubled ranks are integers, so the
/// centred sums are formed exactly and reversing both orders leaves the
/// result bit-identical.
inline Correlation spearman_rho(std::span<const double> x, std::span<const double> y) {
    detail::require_pairs(x.size(), y.size());
    const auto rx = mid_ranks(x);
    const auto ry = mid_ranks(y);
    __int128 sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        const auto a = static_cast<__int128>(std::llround(2 * rx[i]));
        const auto b = static_cast<__int128>(std::llround(2 * ry[i]));
        sx += a;
        sy += b;
        sxx += a * a;
        syy += b * b;
        sxy += a * b;
    }
    const auto n = static_cast<__int128>(rx.size());
    const __int128 cov = n * sxy - sx * sy, vx = n * sxx - sx * sx, vy = n * syy - sy * sy;
    if (vx == 0 || vy == 0)
        return std::nullopt;
    const long double r = static_cast<long double>(cov) /
                          std::sqrt(static_cast<long double>(vx) * static_cast<long double>(vy));
    return std::clamp(static_cast<double>(r), -1.0, 1.0);
}

/// |s_B - s_C| < epsilon is a tie; otherwise the larger score wins.
inline LabelVector three_way_labels(std::span<const double> scores_b, std::span<const double> scores_c,
                                    double epsilon = 1e-4) {
    if (scores_b.size() != scores_c.size())
        throw InputError("three_way_labels: score lists differ in length");
    if (!(epsilon >= 0))
        throw InputError("three_way_labels: epsilon must be >= 0");
    LabelVector out(scores_b.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double d = scores_b[i] - scores_c[i];
        out[i] = std::abs(d) < epsilon ? Label::equal : d > 0 ? Label::b_better : Label::c_better;
    }
    return out;
}

namespace detail {
inline void require_labels(std::size_t np, std::size_t ng) {
    if (np != ng)
        throw InputError("prediction and gold label vectors differ in length");
    if (np == 0)
        throw InputError("label vectors must be non-empty");
}
} // namespace detail

inline double accuracy(std::span<const Label> pred, std::span<const Label> gold) {
    detail::require_labels(pred.size(), gold.size());
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        hits += pred[i] == gold[i];
    return static_cast<double>(hits) / static_cast<double>(pred.size());
}

/// Unweighted mean of per-class F1 over {1, 0, -1}. A class with no true
/// positives, false positives or false negatives scores 0 and still counts.
inline double macro_f1(std::span<const Label> pred, std::span<const Label> gold) {
    detail::require_labels(pred.size(), gold.size());
    // Summed as (b + c) + equal so exchanging the two candidates is exact.
    double f1[3] = {};
    int slot = 0;
    for (Label cls : {Label::b_better, Label::c_better, Label::equal}) {
        std::size_t tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < pred.size(); ++i) {
            const bool p = pred[i] == cls, g = gold[i] == cls;
            tp += p && g;
            fp += p && !g;
            fn += !p && g;
        }
        const std::size_t denom = 2 * tp + fp + fn;
        f1[slot++] = denom ? 2.0 * static_cast<double>(tp) / static_cast<double>(denom) : 0.0;
    }
    return ((f1[0] + f1[1]) + f1[2]) / 3.0;
}

struct EvalScores {
    Correlation tau;
    Correlation rho;
    double accuracy = 0;
    double macro_f1 = 0;
};

} // namespace claimeval::stats
