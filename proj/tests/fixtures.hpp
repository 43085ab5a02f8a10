// Shared test data: hand-built records, random corpora and planted corpora
// whose labels follow a known rule.
#pragma once

#include <string>
#include <vector>

#include "claimeval/corpus.hpp"
#include "claimeval/random.hpp"

namespace claimeval::testkit {

inline Quadruplet make_record(std::string id, std::string ref, std::string b, std::string c,
                              int label_all = 0) {
    Quadruplet q;
    q.id = std::move(id);
    q.reference = std::move(ref);
    q.candidate_b = std::move(b);
    q.candidate_c = std::move(c);
    for (Aspect a : kAllAspects)
        q.labels[a] = static_cast<Label>(label_all);
    return q;
}

inline Corpus make_corpus(std::vector<Quadruplet> records) {
    Corpus c;
    c.records = std::move(records);
    return c;
}

// Shroud claims; candidate C is the better one.
inline Quadruplet shroud_example() {
    return make_record(
        "shroud-1",
        "1. A shroud for connecting to a container having a closure portion, the shroud comprising: a "
        "housing having a luer connector; a spike having a fluid lumen transitioning into the connector; a "
        "plurality of segments terminating in a continuous annular edge surrounding the spike and defining a "
        "plurality of openings. 2. The shroud of claim 1, wherein the housing comprises a surface with "
        "parallel raised features for facilitating gripping by a user.",
        "A shroud for connecting to a container having a closure portion, the shroud comprising: a housing "
        "having a connector; a spike having a fluid lumen fluidically coupled to the connector; a plurality of "
        "segments terminating in a annular edge surrounding the spike. 2. The shroud of claim 1, wherein the "
        "housing comprises a surface with raised features for facilitating gripping by a user.",
        "1. A shroud for connecting to a container having a closure portion, the shroud comprising: a housing "
        "having a connector; a spike having a fluid lumen fluidically coupled to the connector; a plurality of "
        "segments terminating in an annular edge surrounding the spike. 2. The shroud of claim 1, wherein the "
        "housing comprises a surface with raised features for facilitating gripping by a user.",
        -1);
}

inline const std::vector<std::string> &word_pool() {
    static const std::vector<std::string> words = {
        "housing", "spike", "lumen", "connector", "edge", "segment", "opening", "protrusion", "closure",
        "container", "vent", "filter", "surface", "feature", "user", "fluid", "annular", "distal",
        "proximal", "plurality", "wherein", "comprising", "claim", "device", "valve", "member"};
    return words;
}

inline std::string random_text(Rng &rng, std::size_t min_words, std::size_t max_words) {
    const auto &pool = word_pool();
    const std::size_t n = min_words + rng.below(max_words - min_words + 1);
    std::string s;
    for (std::size_t i = 0; i < n; ++i) {
        if (i)
            s += ' ';
        s += pool[rng.below(pool.size())];
    }
    return s;
}

// Random texts with uniformly random labels.
inline Corpus random_corpus(std::size_t n, std::uint64_t seed, std::size_t min_words = 3,
                            std::size_t max_words = 12) {
    Rng rng(seed);
    Corpus c;
    for (std::size_t i = 0; i < n; ++i) {
        Quadruplet q = make_record("r-" + std::to_string(i), random_text(rng, min_words, max_words),
                                   random_text(rng, min_words, max_words),
                                   random_text(rng, min_words, max_words));
        for (Aspect a : kAllAspects)
            q.labels[a] = static_cast<Label>(static_cast<int>(rng.below(3)) - 1);
        c.records.push_back(std::move(q));
    }
    return c;
}

// Candidates carry a hidden count of the marker word "secured"; the candidate
// with more markers is better, equal counts are equal. Roughly a fifth of the
// records are ties.
inline Corpus planted_marker_corpus(std::size_t n, std::uint64_t seed, std::size_t words = 10) {
    Rng rng(seed);
    Corpus c;
    auto candidate = [&](std::size_t markers) {
        std::vector<std::string> toks;
        for (std::size_t i = 0; i < words; ++i)
            toks.push_back(word_pool()[rng.below(word_pool().size())]);
        for (std::size_t m = 0; m < markers; ++m)
            toks[rng.below(toks.size())] = "secured";
        std::string s;
        for (std::size_t i = 0; i < toks.size(); ++i)
            s += (i ? " " : "") + toks[i];
        return s;
    };
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t mb = rng.below(4), mc = rng.below(4);
        if (rng.uniform() < 0.2)
            mc = mb;
        std::string b = candidate(mb), cc = candidate(mc);
        // Random placement may overwrite a marker twice; recount what landed.
        auto count = [](const std::string &s) {
            std::size_t k = 0;
            for (std::size_t pos = s.find("secured"); pos != std::string::npos; pos = s.find("secured", pos + 1))
                ++k;
            return k;
        };
        const auto kb = count(b), kc = count(cc);
        Quadruplet q = make_record("p-" + std::to_string(i), candidate(0), b, cc);
        const Label y = kb > kc ? Label::b_better : kb < kc ? Label::c_better : Label::equal;
        for (Aspect a : kAllAspects)
            q.labels[a] = y;
        c.records.push_back(std::move(q));
    }
    return c;
}

} // namespace claimeval::testkit
