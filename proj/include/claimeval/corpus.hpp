#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "claimeval/digest.hpp"
#include "claimeval/error.hpp"
#include "claimeval/random.hpp"

namespace claimeval {

enum class Aspect { completeness, clarity, consistency, linkage, quality };

inline constexpr std::array<Aspect, 5> kAllAspects = {Aspect::completeness, Aspect::clarity,
                                                      Aspect::consistency, Aspect::linkage,
                                                      Aspect::quality};

inline constexpr std::string_view aspect_name(Aspect a) {
    switch (a) {
    case Aspect::completeness: return "completeness";
    case Aspect::clarity: return "clarity";
    case Aspect::consistency: return "consistency";
    case Aspect::linkage: return "linkage";
    case Aspect::quality: return "quality";
    }
    return "?";
}

inline std::optional<Aspect> parse_aspect(std::string_view name) {
    for (Aspect a : kAllAspects)
        if (aspect_name(a) == name)
            return a;
    return std::nullopt;
}

inline constexpr std::size_t aspect_index(Aspect a) { return static_cast<std::size_t>(a); }

// Human comparative judgement for one aspect. Values match the JSONL encoding.
enum class Label : int { c_better = -1, equal = 0, b_better = 1 };

inline constexpr int to_int(Label l) { return static_cast<int>(l); }

inline constexpr Label negate(Label l) { return static_cast<Label>(-to_int(l)); }

inline std::optional<Label> label_from_int(long long v) {
    if (v < -1 || v > 1)
        return std::nullopt;
    return static_cast<Label>(v);
}

enum class Source { uspto_generation, epo_revision, new_annotation };

inline constexpr std::string_view source_name(Source s) {
    switch (s) {
    case Source::uspto_generation: return "uspto_generation";
    case Source::epo_revision: return "epo_revision";
    case Source::new_annotation: return "new_annotation";
    }
    return "?";
}

inline std::optional<Source> parse_source(std::string_view name) {
    for (Source s : {Source::uspto_generation, Source::epo_revision, Source::new_annotation})
        if (source_name(s) == name)
            return s;
    return std::nullopt;
}

// Per-aspect labels; indexed by Aspect so every aspect is always present.
class LabelSet {
  public:
    LabelSet() { values_.fill(Label::equal); }

    Label operator[](Aspect a) const { return values_[aspect_index(a)]; }
    Label &operator[](Aspect a) { return values_[aspect_index(a)]; }

    bool operator==(const LabelSet &) const = default;

  private:
    std::array<Label, 5> values_;
};

// One annotated comparison: reference claims A, candidates B and C.
struct Quadruplet {
    std::string id;
    Source source = Source::uspto_generation;
    std::string reference;
    std::string candidate_b;
    std::string candidate_c;
    LabelSet labels;

    bool operator==(const Quadruplet &) const = default;
};

// Same comparison with B and C exchanged and every label negated.
inline Quadruplet swapped(Quadruplet q) {
    std::swap(q.candidate_b, q.candidate_c);
    for (Aspect a : kAllAspects)
        q.labels[a] = negate(q.labels[a]);
    return q;
}

using Warnings = std::vector<std::string>;

namespace detail {

inline std::string where(std::size_t line) {
    return line ? "line " + std::to_string(line) + ": " : std::string();
}

inline std::string required_text(const nlohmann::json &obj, const char *key, std::size_t line) {
    const auto &v = obj.at(key);
    if (!v.is_string())
        throw ValueError(where(line) + "field \"" + key + "\" must be a string");
    auto s = v.get<std::string>();
    if (s.empty())
        throw ValueError(where(line) + "field \"" + key + "\" must be non-empty");
    return s;
}

} // namespace detail

/// Parses one JSONL record. `line` is used only for diagnostics (0 = unknown).
/// Unknown keys are ignored and reported through `warnings` when given.
inline Quadruplet parse_quadruplet_record(std::string_view text, std::size_t line = 0,
                                          Warnings *warnings = nullptr) {
    nlohmann::json obj;
    try {
        obj = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error &e) {
        throw ParseError(std::string("malformed JSON: ") + e.what(), line);
    }
    if (!obj.is_object())
        throw ParseError("record is not a JSON object", line);

    static constexpr std::array<const char *, 6> kRequired = {
        "id", "source", "reference", "candidate_b", "candidate_c", "labels"};
    std::string missing;
    for (const char *key : kRequired)
        if (!obj.contains(key))
            missing += (missing.empty() ? "" : ", ") + std::string(key);
    if (!missing.empty())
        throw SchemaError(detail::where(line) + "missing key(s): " + missing);

    if (warnings) {
        for (const auto &[key, _] : obj.items()) {
            bool known = false;
            for (const char *k : kRequired)
                known = known || key == k;
            if (!known)
                warnings->push_back(detail::where(line) + "ignoring unknown key \"" + key + "\"");
        }
    }

    Quadruplet q;
    q.id = detail::required_text(obj, "id", line);
    const auto source = detail::required_text(obj, "source", line);
    if (auto s = parse_source(source))
        q.source = *s;
    else
        throw ValueError(detail::where(line) + "field \"source\" has unknown value \"" + source + "\"");
    q.reference = detail::required_text(obj, "reference", line);
    q.candidate_b = detail::required_text(obj, "candidate_b", line);
    q.candidate_c = detail::required_text(obj, "candidate_c", line);

    const auto &labels = obj.at("labels");
    if (!labels.is_object())
        throw SchemaError(detail::where(line) + "field \"labels\" must be an object");
    std::string missing_aspects;
    for (Aspect a : kAllAspects)
        if (!labels.contains(aspect_name(a)))
            missing_aspects += (missing_aspects.empty() ? "" : ", ") + std::string(aspect_name(a));
    if (!missing_aspects.empty())
        throw SchemaError(detail::where(line) + "labels missing aspect(s): " + missing_aspects);
    for (const auto &[key, _] : labels.items())
        if (!parse_aspect(key) && warnings)
            warnings->push_back(detail::where(line) + "ignoring unknown label \"" + key + "\"");

    for (Aspect a : kAllAspects) {
        const std::string field = "labels." + std::string(aspect_name(a));
        const auto &v = labels.at(aspect_name(a));
        if (!v.is_number_integer())
            throw ValueError(detail::where(line) + "field \"" + field + "\" must be an integer");
        auto label = label_from_int(v.get<long long>());
        if (!label)
            throw ValueError(detail::where(line) + "field \"" + field + "\" = " + v.dump() +
                             " is outside {1, 0, -1}");
        q.labels[a] = *label;
    }
    return q;
}

/// Canonical single-line JSON encoding with fixed field order.
inline std::string serialize_quadruplet(const Quadruplet &q) {
    nlohmann::ordered_json labels;
    for (Aspect a : kAllAspects)
        labels[std::string(aspect_name(a))] = to_int(q.labels[a]);
    nlohmann::ordered_json obj;
    obj["id"] = q.id;
    obj["source"] = std::string(source_name(q.source));
    obj["reference"] = q.reference;
    obj["candidate_b"] = q.candidate_b;
    obj["candidate_c"] = q.candidate_c;
    obj["labels"] = std::move(labels);
    return obj.dump();
}

struct Provenance {
    std::string path;
    std::string digest; // sha256 of the file bytes
};

struct Corpus {
    std::vector<Quadruplet> records;
    Provenance provenance;

    std::size_t size() const noexcept { return records.size(); }
    bool empty() const noexcept { return records.empty(); }
};

inline std::string read_file(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad())
        throw IoError("error reading " + path);
    return ss.str();
}

/// Parses a JSONL document. Blank lines are skipped but still counted for
/// line numbers. Duplicate ids are rejected.
inline Corpus parse_corpus(std::string_view content, Warnings *warnings = nullptr) {
    Corpus corpus;
    std::unordered_map<std::string, std::size_t> seen;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < content.size()) {
        std::size_t end = content.find('\n', pos);
        if (end == std::string_view::npos)
            end = content.size();
        std::string_view line = content.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.remove_suffix(1);
        if (line.find_first_not_of(" \t") == std::string_view::npos)
            continue;
        auto q = parse_quadruplet_record(line, line_no, warnings);
        auto [it, inserted] = seen.emplace(q.id, line_no);
        if (!inserted)
            throw DuplicateIdError(q.id, it->second, line_no);
        corpus.records.push_back(std::move(q));
    }
    return corpus;
}

inline Corpus load_corpus(const std::string &path, Warnings *warnings = nullptr) {
    const std::string content = read_file(path);
    Corpus corpus = parse_corpus(content, warnings);
    corpus.provenance = {path, sha256_hex(content)};
    return corpus;
}

inline std::string serialize_corpus(const Corpus &corpus) {
    std::string out;
    for (const auto &q : corpus.records) {
        out += serialize_quadruplet(q);
        out += '\n';
    }
    return out;
}

struct Split {
    Corpus train;
    Corpus val;
    Corpus test;
};

/// Seeded random partition. |test| = round(N * test_fraction),
/// |val| = round(N * val_fraction), the rest goes to train. Each part keeps
/// the original file order.
inline Split split_corpus(const Corpus &corpus, double test_fraction, double val_fraction,
                          std::uint64_t seed) {
    auto in_range = [](double f) { return std::isfinite(f) && f >= 0.0 && f < 1.0; };
    if (!in_range(test_fraction) || !in_range(val_fraction) || test_fraction + val_fraction >= 1.0)
        throw InputError("split fractions must lie in [0, 1) and sum to less than 1");

    const std::size_t n = corpus.size();
    const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction));
    const auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(n) * val_fraction));
    // Rounding both up can overshoot only for tiny corpora; trim val first.
    const std::size_t test_count = std::min(n_test, n);
    const std::size_t val_count = std::min(n_val, n - test_count);

    Rng rng(seed);
    auto perm = rng.permutation(n);
    std::vector<int> part(n, 0); // 0 train, 1 val, 2 test
    for (std::size_t i = 0; i < test_count; ++i)
        part[perm[i]] = 2;
    for (std::size_t i = test_count; i < test_count + val_count; ++i)
        part[perm[i]] = 1;

    Split split;
    for (Corpus *c : {&split.train, &split.val, &split.test})
        c->provenance = corpus.provenance;
    for (std::size_t i = 0; i < n; ++i) {
        Corpus &dst = part[i] == 2 ? split.test : part[i] == 1 ? split.val : split.train;
        dst.records.push_back(corpus.records[i]);
    }
    return split;
}

struct LabelCounts {
    std::size_t b_better = 0;
    std::size_t equal = 0;
    std::size_t c_better = 0;

    std::size_t total() const noexcept { return b_better + equal + c_better; }
    bool operator==(const LabelCounts &) const = default;
};

inline LabelCounts label_distribution(const Corpus &corpus, Aspect aspect) {
    LabelCounts counts;
    for (const auto &q : corpus.records) {
        switch (q.labels[aspect]) {
        case Label::b_better: ++counts.b_better; break;
        case Label::equal: ++counts.equal; break;
        case Label::c_better: ++counts.c_better; break;
        }
    }
    return counts;
}

} // namespace claimeval
