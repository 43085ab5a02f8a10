#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "claimeval/corpus.hpp"
#include "claimeval/digest.hpp"
#include "claimeval/error.hpp"

namespace claimeval {

struct TokenizerConfig {
    bool lowercase = true;
};

/// Word + punctuation tokenizer. ASCII punctuation characters become single
/// tokens, whitespace separates, every other byte (letters, digits, UTF-8
/// continuation bytes) accumulates into words.
inline std::vector<std::string> tokenize(std::string_view text, const TokenizerConfig &config = {}) {
    std::vector<std::string> tokens;
    std::string word;
    auto flush = [&] {
        if (!word.empty()) {
            tokens.push_back(std::move(word));
            word.clear();
        }
    };
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (c < 0x80 && std::isspace(c)) {
            flush();
        } else if (c < 0x80 && std::ispunct(c)) {
            flush();
            tokens.emplace_back(1, ch);
        } else {
            word.push_back(config.lowercase && c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
        }
    }
    flush();
    return tokens;
}

inline std::string detokenize(const std::vector<std::string> &tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i)
            out.push_back(' ');
        out += tokens[i];
    }
    return out;
}

using TokenId = std::uint32_t;

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kUnkId = 1;
inline constexpr TokenId kClsId = 2;
inline constexpr TokenId kSepId = 3;
inline constexpr std::size_t kNumReserved = 4;

class Vocab {
  public:
    Vocab() : tokens_{"[PAD]", "[UNK]", "[CLS]", "[SEP]"} {
        for (TokenId i = 0; i < tokens_.size(); ++i)
            index_.emplace(tokens_[i], i);
    }

    // Builds from an id-ordered token list whose first four entries are the
    // reserved tokens.
    static Vocab from_tokens(const std::vector<std::string> &tokens) {
        Vocab v;
        if (tokens.size() < kNumReserved ||
            !std::equal(v.tokens_.begin(), v.tokens_.end(), tokens.begin()))
            throw DataError("vocab must start with [PAD], [UNK], [CLS], [SEP]");
        for (std::size_t i = kNumReserved; i < tokens.size(); ++i)
            v.add(tokens[i]);
        return v;
    }

    std::size_t size() const noexcept { return tokens_.size(); }

    TokenId id(std::string_view token) const {
        auto it = index_.find(std::string(token));
        return it == index_.end() ? kUnkId : it->second;
    }

    const std::string &token(TokenId id) const { return tokens_.at(id); }
    const std::vector<std::string> &tokens() const noexcept { return tokens_; }

    std::string digest() const {
        std::string joined;
        for (const auto &t : tokens_) {
            joined += t;
            joined.push_back('\n');
        }
        return sha256_hex(joined);
    }

    nlohmann::json to_json() const { return nlohmann::json{{"tokens", tokens_}}; }

    static Vocab from_json(const nlohmann::json &j) {
        return from_tokens(j.at("tokens").get<std::vector<std::string>>());
    }

  private:
    friend Vocab build_vocab(const Corpus &, std::size_t, std::size_t, const TokenizerConfig &);

    void add(const std::string &token) {
        auto [it, inserted] = index_.emplace(token, static_cast<TokenId>(tokens_.size()));
        if (!inserted)
            throw DataError("duplicate vocab token \"" + token + "\"");
        tokens_.push_back(token);
    }

    std::vector<std::string> tokens_;
    std::unordered_map<std::string, TokenId> index_;
};

/// Counts tokens over every claim text of the corpus, keeps those with
/// frequency >= min_freq, orders by (frequency desc, token asc) and keeps at
/// most `max_size` of them (0 = unlimited) after the four reserved ids.
inline Vocab build_vocab(const Corpus &corpus, std::size_t min_freq = 1, std::size_t max_size = 0,
                         const TokenizerConfig &config = {}) {
    if (corpus.empty())
        throw InputError("cannot build a vocabulary from an empty corpus");
    std::map<std::string, std::size_t> freq;
    for (const auto &q : corpus.records)
        for (const std::string *text : {&q.reference, &q.candidate_b, &q.candidate_c})
            for (auto &t : tokenize(*text, config))
                ++freq[std::move(t)];

    std::vector<std::pair<std::string, std::size_t>> entries;
    for (auto &[tok, n] : freq)
        if (n >= min_freq)
            entries.emplace_back(tok, n);
    std::stable_sort(entries.begin(), entries.end(),
                     [](const auto &a, const auto &b) { return a.second > b.second; });
    if (max_size && entries.size() > max_size)
        entries.resize(max_size);

    Vocab vocab;
    for (auto &[tok, _] : entries)
        vocab.add(tok);
    return vocab;
}

struct TokenSequence {
    std::vector<TokenId> ids; // always padded to the configured maximum
    std::size_t length = 0;   // number of non-padding positions

    bool operator==(const TokenSequence &) const = default;
};

/// [CLS] reference [SEP] candidate [SEP] then PAD up to max_len. When both
/// sides do not fit, the budget max_len - 3 is halved with the odd token going
/// to the reference; a side shorter than its half cedes the slack to the other.
inline TokenSequence encode_pair(const std::vector<std::string> &reference,
                                 const std::vector<std::string> &candidate, const Vocab &vocab,
                                 std::size_t max_len) {
    if (max_len < 8)
        throw InputError("encode_pair: max_len must be at least 8");
    const std::size_t budget = max_len - 3;
    std::size_t keep_ref = reference.size();
    std::size_t keep_cand = candidate.size();
    if (keep_ref + keep_cand > budget) {
        const std::size_t half_ref = budget - budget / 2;
        const std::size_t half_cand = budget / 2;
        if (keep_ref <= half_ref)
            keep_cand = budget - keep_ref;
        else if (keep_cand <= half_cand)
            keep_ref = budget - keep_cand;
        else {
            keep_ref = half_ref;
            keep_cand = half_cand;
        }
    }

    TokenSequence seq;
    seq.ids.reserve(max_len);
    seq.ids.push_back(kClsId);
    for (std::size_t i = 0; i < keep_ref; ++i)
        seq.ids.push_back(vocab.id(reference[i]));
    seq.ids.push_back(kSepId);
    for (std::size_t i = 0; i < keep_cand; ++i)
        seq.ids.push_back(vocab.id(candidate[i]));
    seq.ids.push_back(kSepId);
    seq.length = seq.ids.size();
    seq.ids.resize(max_len, kPadId);
    return seq;
}

inline TokenSequence encode_pair(std::string_view reference, std::string_view candidate,
                                 const Vocab &vocab, std::size_t max_len,
                                 const TokenizerConfig &config = {}) {
    return encode_pair(tokenize(reference, config), tokenize(candidate, config), vocab, max_len);
}

struct LengthStats {
    double min = 0;
    double max = 0;
    double mean = 0;
    double median = 0;
    double stddev = 0; // population standard deviation
    std::size_t count = 0;
};

inline LengthStats length_stats(std::vector<std::size_t> lengths) {
    if (lengths.empty())
        throw InputError("length statistics need at least one text");
    std::sort(lengths.begin(), lengths.end());
    const std::size_t n = lengths.size();
    LengthStats s;
    s.count = n;
    s.min = static_cast<double>(lengths.front());
    s.max = static_cast<double>(lengths.back());
    s.median = n % 2 ? static_cast<double>(lengths[n / 2])
                     : (static_cast<double>(lengths[n / 2 - 1]) + static_cast<double>(lengths[n / 2])) / 2.0;
    double sum = 0;
    for (auto l : lengths)
        sum += static_cast<double>(l);
    s.mean = sum / static_cast<double>(n);
    double ss = 0;
    for (auto l : lengths) {
        const double d = static_cast<double>(l) - s.mean;
        ss += d * d;
    }
    s.stddev = std::sqrt(ss / static_cast<double>(n));
    return s;
}

/// Token counts of every claim text, with reference and both candidates
/// counted as separate texts.
inline LengthStats length_stats(const Corpus &corpus, const TokenizerConfig &config = {}) {
    if (corpus.empty())
        throw InputError("length statistics need a non-empty corpus");
    std::vector<std::size_t> lengths;
    lengths.reserve(corpus.size() * 3);
    for (const auto &q : corpus.records)
        for (const std::string *text : {&q.reference, &q.candidate_b, &q.candidate_c})
            lengths.push_back(tokenize(*text, config).size());
    return length_stats(std::move(lengths));
}

} // namespace claimeval
