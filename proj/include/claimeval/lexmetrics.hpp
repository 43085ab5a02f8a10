#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "claimeval/error.hpp"

namespace claimeval::lex {

using Tokens = std::vector<std::string>;
using Ngram = std::vector<std::string>;

// n-gram multiset for one order n.
struct NgramProfile {
    std::size_t n = 1;
    std::map<Ngram, std::size_t> counts;
    std::size_t total = 0; // max(0, len - n + 1)

    std::size_t count(const Ngram &g) const {
        auto it = counts.find(g);
        return it == counts.end() ? 0 : it->second;
    }
};

inline NgramProfile ngram_counts(const Tokens &tokens, std::size_t n) {
    if (n == 0)
        throw InputError("ngram order must be >= 1");
    NgramProfile p;
    p.n = n;
    if (tokens.size() < n)
        return p;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        ++p.counts[Ngram(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                         tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
        ++p.total;
    }
    return p;
}

// Sum over n-grams of min(count in a, count in b).
inline std::size_t clipped_overlap(const NgramProfile &a, const NgramProfile &b) {
    std::size_t overlap = 0;
    for (const auto &[g, c] : a.counts)
        overlap += std::min(c, b.count(g));
    return overlap;
}

struct PRF {
    double precision = 0;
    double recall = 0;
    double f1 = 0;
};

inline PRF make_prf(double p, double r) {
    return {p, r, p + r > 0 ? 2 * p * r / (p + r) : 0.0};
}

/// Sentence BLEU against a single reference. With `smoothing`, a zero
/// precision for n >= 2 becomes (0 + 1) / (total + 1).
inline double bleu(const Tokens &candidate, const Tokens &reference, std::size_t max_n = 4,
                   bool smoothing = true) {
    if (max_n < 1 || max_n > 4)
        throw InputError("bleu: max_n must be in 1..4");
    if (candidate.empty())
        return 0.0;
    double log_sum = 0;
    for (std::size_t n = 1; n <= max_n; ++n) {
        const auto cand = ngram_counts(candidate, n);
        const auto ref = ngram_counts(reference, n);
        auto matched = static_cast<double>(clipped_overlap(cand, ref));
        auto total = static_cast<double>(cand.total);
        if (matched == 0 && smoothing && n >= 2) {
            matched += 1;
            total += 1;
        }
        if (matched == 0)
            return 0.0;
        log_sum += std::log(matched / total);
    }
    const double c = static_cast<double>(candidate.size());
    const double r = static_cast<double>(reference.size());
    const double bp = c < r ? std::exp(1.0 - r / c) : 1.0;
    return bp * std::exp(log_sum / static_cast<double>(max_n));
}

inline PRF rouge_n(const Tokens &candidate, const Tokens &reference, std::size_t n) {
    const auto cand = ngram_counts(candidate, n);
    const auto ref = ngram_counts(reference, n);
    if (cand.total == 0 || ref.total == 0)
        return {};
    const auto overlap = static_cast<double>(clipped_overlap(cand, ref));
    return make_prf(overlap / static_cast<double>(cand.total), overlap / static_cast<double>(ref.total));
}

// Longest common subsequence length, O(|a|·|b|) time, O(|b|) memory.
inline std::size_t lcs_length(const Tokens &a, const Tokens &b) {
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j)
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

inline PRF rouge_l(const Tokens &candidate, const Tokens &reference) {
    if (candidate.empty() || reference.empty())
        return {};
    const auto lcs = static_cast<double>(lcs_length(candidate, reference));
    return make_prf(lcs / static_cast<double>(candidate.size()),
                    lcs / static_cast<double>(reference.size()));
}

struct MeteorConfig {
    double alpha = 0.9;
    double beta = 3.0;
    double gamma = 0.5;
    // Tried in order; the first suffix that leaves a stem of >= 3 bytes is stripped.
    std::vector<std::string> stem_suffixes = {"ing", "ed", "es", "s"};

    void validate() const {
        if (!(alpha >= 0 && alpha <= 1) || !(beta > 0) || !(gamma >= 0 && gamma <= 1))
            throw InputError("meteor: need alpha in [0,1], beta > 0, gamma in [0,1]");
    }
};

inline std::string stem(const std::string &token, const MeteorConfig &config) {
    for (const auto &suffix : config.stem_suffixes) {
        if (token.size() >= suffix.size() + 3 &&
            token.compare(token.size() - suffix.size(), suffix.size(), suffix) == 0)
            return token.substr(0, token.size() - suffix.size());
    }
    return token;
}

struct MeteorAlignment {
    std::size_t matches = 0;
    std::size_t chunks = 0;
};

// Greedy one-to-one alignment: exact matches first, then stem matches, each
// candidate token taking the leftmost free reference token.
inline MeteorAlignment meteor_align(const Tokens &candidate, const Tokens &reference,
                                    const MeteorConfig &config) {
    std::vector<std::optional<std::size_t>> link(candidate.size());
    std::vector<bool> used(reference.size(), false);
    auto pass = [&](auto &&key) {
        std::vector<std::string> ref_keys(reference.size());
        for (std::size_t j = 0; j < reference.size(); ++j)
            ref_keys[j] = key(reference[j]);
        for (std::size_t i = 0; i < candidate.size(); ++i) {
            if (link[i])
                continue;
            const auto k = key(candidate[i]);
            for (std::size_t j = 0; j < reference.size(); ++j) {
                if (!used[j] && ref_keys[j] == k) {
                    link[i] = j;
                    used[j] = true;
                    break;
                }
            }
        }
    };
    pass([](const std::string &t) { return t; });
    pass([&](const std::string &t) { return stem(t, config); });

    MeteorAlignment out;
    std::optional<std::size_t> prev_cand, prev_ref;
    for (std::size_t i = 0; i < candidate.size(); ++i) {
        if (!link[i])
            continue;
        ++out.matches;
        if (!prev_cand || *prev_cand + 1 != i || *prev_ref + 1 != *link[i])
            ++out.chunks;
        prev_cand = i;
        prev_ref = link[i];
    }
    return out;
}

inline double meteor_lite(const Tokens &candidate, const Tokens &reference,
                          const MeteorConfig &config = {}) {
    config.validate();
    const auto align = meteor_align(candidate, reference, config);
    if (align.matches == 0)
        return 0.0;
    const double m = static_cast<double>(align.matches);
    const double p = m / static_cast<double>(candidate.size());
    const double r = m / static_cast<double>(reference.size());
    const double f_mean = p * r / (config.alpha * p + (1 - config.alpha) * r);
    const double penalty = config.gamma * std::pow(static_cast<double>(align.chunks) / m, config.beta);
    return f_mean * (1 - penalty);
}

// Metric names used by the CLI and reports.
enum class Metric { bleu1, bleu4, rouge1, rouge2, rougeL, meteor };

inline constexpr std::string_view metric_name(Metric m) {
    switch (m) {
    case Metric::bleu1: return "bleu1";
    case Metric::bleu4: return "bleu4";
    case Metric::rouge1: return "rouge1";
    case Metric::rouge2: return "rouge2";
    case Metric::rougeL: return "rougeL";
    case Metric::meteor: return "meteor";
    }
    return "?";
}

inline std::optional<Metric> parse_metric(std::string_view name) {
    for (Metric m : {Metric::bleu1, Metric::bleu4, Metric::rouge1, Metric::rouge2, Metric::rougeL,
                     Metric::meteor})
        if (metric_name(m) == name)
            return m;
    return std::nullopt;
}

/// The scalar quality score s(candidate | reference) a metric contributes to
/// comparisons. ROUGE variants report F1.
inline double metric_score(Metric m, const Tokens &candidate, const Tokens &reference) {
    switch (m) {
    case Metric::bleu1: return bleu(candidate, reference, 1);
    case Metric::bleu4: return bleu(candidate, reference, 4);
    case Metric::rouge1: return rouge_n(candidate, reference, 1).f1;
    case Metric::rouge2: return rouge_n(candidate, reference, 2).f1;
    case Metric::rougeL: return rouge_l(candidate, reference).f1;
    case Metric::meteor: return meteor_lite(candidate, reference);
    }
    return 0.0;
}

} // namespace claimeval::lex
