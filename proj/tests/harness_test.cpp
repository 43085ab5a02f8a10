#include <cmath>
#include <filesystem>
#include <fstream>
#include <regex>

#include <gtest/gtest.h>

#include "claimeval/harness.hpp"
#include "claimeval/trainer.hpp"
#include "fixtures.hpp"
#include "harness_fixtures.hpp"

using namespace claimeval;
using testkit::FnScorer;

namespace {

Corpus three_records() {
    return testkit::make_corpus({testkit::make_record("a", "x y z", "x y", "q", 1),
                                 testkit::make_record("b", "x y z", "z", "x y z", -1),
                                 testkit::make_record("c", "x y z", "w", "w", 0)});
}

double count_equal(const Corpus &c, Aspect a) {
    double k = 0;
    for (const auto &q : c.records)
        k += q.labels[a] == Label::equal;
    return k / static_cast<double>(c.size());
}

} // namespace

TEST(ScoreCorpus, LexicalShapeAndOrder) {
    LexicalScorer rouge(lex::Metric::rouge1);
    const auto s = score_corpus(rouge, three_records(), Aspect::clarity);
    ASSERT_EQ(s.b.size(), 3u);
    ASSERT_EQ(s.c.size(), 3u);
    EXPECT_DOUBLE_EQ(s.b[0], 0.8); // P 2/2, R 2/3
    EXPECT_EQ(s.c[0], 0.0);
    EXPECT_EQ(s.c[1], 1.0);
    EXPECT_EQ(s.b[2], s.c[2]);
}

TEST(ScoreCorpus, LexicalTokenizesFirst) {
    LexicalScorer bleu(lex::Metric::bleu1);
    const auto c = testkit::make_corpus({testkit::make_record("a", "The Spike, a lumen.", "the  SPIKE ,a lumen .", "x")});
    EXPECT_EQ(score_corpus(bleu, c, Aspect::quality).b[0], 1.0);
}

TEST(ScoreCorpus, IdenticalCandidatesScoreIdentically) {
    auto c = testkit::random_corpus(30, 4);
    for (auto &q : c.records)
        q.candidate_c = q.candidate_b;
    for (auto m : {lex::Metric::bleu4, lex::Metric::rougeL, lex::Metric::meteor}) {
        LexicalScorer s(m);
        const auto r = score_corpus(s, c, Aspect::linkage);
        EXPECT_EQ(r.b, r.c);
    }
}

TEST(ExternalFile, ParsesAndScoresById) {
    auto s = ExternalFileScorer::parse("bertscore", "{\"id\":\"c\",\"score_b\":0.1,\"score_c\":0.2}\n\n"
                                                    "{\"id\":\"a\",\"score_b\":1,\"score_c\":0}\n"
                                                    "{\"id\":\"b\",\"score_b\":0.5,\"score_c\":0.5}\n",
                                       "embedding");
    EXPECT_EQ(s.type(), "embedding");
    EXPECT_EQ(s.kind(), ScorerKind::external_file);
    const auto r = score_corpus(s, three_records(), Aspect::quality);
    EXPECT_EQ(r.b, (std::vector<double>{1, 0.5, 0.1}));
    EXPECT_EQ(r.c, (std::vector<double>{0, 0.5, 0.2}));
}

TEST(ExternalFile, MissingIdsAreListed) {
    auto s = ExternalFileScorer::parse("x", "{\"id\":\"a\",\"score_b\":1,\"score_c\":0}\n");
    try {
        score_corpus(s, three_records(), Aspect::quality);
        FAIL() << "expected DataError";
    } catch (const DataError &e) {
        const std::string what = e.what();
        EXPECT_NE(what.find("2 id(s): b, c"), std::string::npos) << what;
    }
}

TEST(ExternalFile, MalformedLinesRejected) {
    EXPECT_THROW(ExternalFileScorer::parse("x", "{\"id\":\"a\",\"score_b\":1}\n"), ParseError);
    EXPECT_THROW(ExternalFileScorer::parse("x", "{\"id\":\"a\",\"score_b\":1,\"score_c\":\"hi\"}"), ParseError);
    EXPECT_THROW(ExternalFileScorer::parse("x", "nope"), ParseError);
    try {
        ExternalFileScorer::parse("x", "{\"id\":\"a\",\"score_b\":1,\"score_c\":0}\n"
                                       "{\"id\":\"a\",\"score_b\":1,\"score_c\":0}\n");
        FAIL();
    } catch (const ParseError &e) {
        EXPECT_EQ(e.line(), 2u);
    }
    EXPECT_THROW(ExternalFileScorer::load("x", "/nonexistent/scores.jsonl"), IoError);
}

TEST(ExternalFile, AspectBinding) {
    auto s = ExternalFileScorer::parse("x", "{\"id\":\"a\",\"score_b\":1,\"score_c\":0}", "external", Aspect::clarity);
    EXPECT_TRUE(s.applies_to(Aspect::clarity));
    EXPECT_FALSE(s.applies_to(Aspect::quality));
    EXPECT_THROW(score_corpus(s, three_records(), Aspect::quality), InputError);
}

TEST(EvaluateMetric, SelfLabelledCorpusIsPerfect) {
    LexicalScorer rouge(lex::Metric::rouge1);
    const auto corpus = testkit::self_labelled_corpus(rouge, 60, 11);
    for (Aspect a : {Aspect::completeness, Aspect::quality}) {
        const auto r = evaluate_metric(rouge, corpus, a);
        EXPECT_EQ(r.n, 60u);
        EXPECT_EQ(r.metric, "rouge1");
        EXPECT_EQ(r.type, "n-gram");
        ASSERT_TRUE(r.scores.tau && r.scores.rho);
        EXPECT_EQ(*r.scores.tau, 1.0);
        EXPECT_NEAR(*r.scores.rho, 1.0, 1e-15);
        EXPECT_EQ(r.scores.accuracy, 1.0);
        EXPECT_EQ(r.scores.macro_f1, 1.0);
    }
}

TEST(EvaluateMetric, ConstantScorerAccuracyIsEqualFraction) {
    FnScorer flat("flat", [](const std::string &, const std::string &) { return 0.5; });
    const auto corpus = testkit::random_corpus(90, 12);
    for (Aspect a : kAllAspects) {
        const auto r = evaluate_metric(flat, corpus, a);
        EXPECT_FALSE(r.scores.tau);
        EXPECT_FALSE(r.scores.rho);
        EXPECT_DOUBLE_EQ(r.scores.accuracy, count_equal(corpus, a));
    }
}

TEST(EvaluateMetric, RandomScorerTauWithinPermutationBound) {
    Rng rng(77);
    FnScorer noise("noise", [&](const std::string &, const std::string &) { return rng.uniform(); });
    const auto corpus = testkit::random_corpus(500, 13);
    const auto s = score_corpus(noise, corpus, Aspect::quality);
    const auto pred = stats::as_numbers(stats::three_way_labels(s.b, s.c));
    const auto gold = stats::as_numbers(gold_labels(corpus, Aspect::quality));
    const double bound = testkit::permutation_tau_bound(pred, gold, 400, 5);
    const auto r = stats::kendall_tau_b(pred, gold);
    ASSERT_TRUE(r);
    EXPECT_LT(std::abs(*r), bound);
}

TEST(EvaluateMetric, RawDiffCorrelatesScoreDifferences) {
    FnScorer len("len", [](const std::string &, const std::string &c) { return static_cast<double>(c.size()); });
    auto corpus = testkit::random_corpus(40, 14);
    for (auto &q : corpus.records) {
        const double d = static_cast<double>(q.candidate_b.size()) - static_cast<double>(q.candidate_c.size());
        q.labels[Aspect::clarity] = d > 0 ? Label::b_better : d < 0 ? Label::c_better : Label::equal;
    }
    const auto r = evaluate_metric(len, corpus, Aspect::clarity, CorrelationMode::raw_diff);
    EXPECT_EQ(r.mode, CorrelationMode::raw_diff);
    std::vector<double> diff;
    for (const auto &q : corpus.records)
        diff.push_back(static_cast<double>(q.candidate_b.size()) - static_cast<double>(q.candidate_c.size()));
    const auto gold = stats::as_numbers(gold_labels(corpus, Aspect::clarity));
    EXPECT_EQ(r.scores.tau, stats::kendall_tau_b(diff, gold));
    EXPECT_EQ(r.scores.accuracy, 1.0);
}

TEST(EvaluateMetric, NeedsTwoRecords) {
    LexicalScorer s(lex::Metric::bleu1);
    EXPECT_THROW(evaluate_metric(s, testkit::make_corpus({testkit::shroud_example()}), Aspect::quality), InputError);
}

TEST(EvaluateMetric, SwapInvariance) {
    const auto corpus = testkit::random_corpus(100, 15);
    const auto flipped = testkit::swapped_corpus(corpus);
    for (auto m : {lex::Metric::bleu4, lex::Metric::rouge2, lex::Metric::meteor})
        for (auto mode : {CorrelationMode::discrete, CorrelationMode::raw_diff})
            for (Aspect a : kAllAspects) {
                LexicalScorer s(m);
                const auto r1 = evaluate_metric(s, corpus, a, mode), r2 = evaluate_metric(s, flipped, a, mode);
                EXPECT_EQ(r1.scores.tau, r2.scores.tau);
                EXPECT_EQ(r1.scores.rho, r2.scores.rho);
                EXPECT_EQ(r1.scores.accuracy, r2.scores.accuracy);
                EXPECT_EQ(r1.scores.macro_f1, r2.scores.macro_f1);
            }
}

TEST(LearnedScorer, BoundToAspectAndMatchesDirectScore) {
    const auto corpus = testkit::random_corpus(6, 16);
    const auto vocab = build_vocab(corpus);
    ScorerConfig cfg;
    cfg.vocab_size = vocab.size();
    cfg.hidden = 8;
    cfg.heads = 2;
    cfg.layers = 1;
    cfg.ffn = 12;
    cfg.window = 3;
    cfg.max_len = 32;
    const auto params = init_params<double>(cfg, 3);
    LearnedScorer s("ours", Aspect::linkage, cfg, params, vocab);
    EXPECT_TRUE(s.applies_to(Aspect::linkage));
    EXPECT_FALSE(s.applies_to(Aspect::clarity));
    EXPECT_THROW(score_corpus(s, corpus, Aspect::clarity), InputError);
    const auto r = score_corpus(s, corpus, Aspect::linkage);
    const auto &q = corpus.records[2];
    EXPECT_EQ(r.c[2], score(encode_pair(q.reference, q.candidate_c, vocab, 32), params, cfg));

    ModelArtifact m{cfg, vocab.digest(), "nonsense", params};
    EXPECT_THROW(LearnedScorer("x", m, vocab), DataError);
}

TEST(OverallQuality, Examples) {
    EXPECT_EQ(overall_quality({10, 10, 10, 10}, 10), 10.0);
    EXPECT_EQ(overall_quality({0, 0, 0, 0}, 10), 0.0);
    EXPECT_NEAR(overall_quality({8, 6, 7, 9}, 10), 85.0 / 11.0, 1e-12);
    EXPECT_NEAR(overall_quality({80, 66, 70, 90}, 100), 862.0 / 11.0, 1e-12);
}

TEST(OverallQuality, Weights) {
    const AspectScores base{5, 5, 5, 5};
    const double h = 0.5, f0 = overall_quality(base, 10);
    const double expected[4] = {4.0 / 11, 2.0 / 11, 2.0 / 11, 3.0 / 11};
    for (int k = 0; k < 4; ++k) {
        AspectScores s = base;
        double *fields[4] = {&s.completeness, &s.clarity, &s.consistency, &s.linkage};
        *fields[k] += h;
        EXPECT_NEAR((overall_quality(s, 10) - f0) / h, expected[k], 1e-12);
    }
}

TEST(OverallQuality, RangeAndMonotone) {
    EXPECT_THROW(overall_quality({11, 0, 0, 0}, 10), InputError);
    EXPECT_THROW(overall_quality({0, -1, 0, 0}, 10), InputError);
    EXPECT_THROW(overall_quality({0, 0, NAN, 0}, 10), InputError);
    EXPECT_THROW(overall_quality({0, 0, 0, 0}, 0), InputError);
    Rng rng(9);
    for (int t = 0; t < 500; ++t) {
        AspectScores s{rng.uniform(0, 100), rng.uniform(0, 100), rng.uniform(0, 100), rng.uniform(0, 100)};
        const double v = overall_quality(s, 100);
        const double lo = std::min({s.completeness, s.clarity, s.consistency, s.linkage});
        const double hi = std::max({s.completeness, s.clarity, s.consistency, s.linkage});
        EXPECT_GE(v, lo - 1e-12);
        EXPECT_LE(v, hi + 1e-12);
        AspectScores up = s;
        up.linkage = std::min(100.0, up.linkage + 1);
        EXPECT_GE(overall_quality(up, 100), v);
    }
}

namespace {

EvalResult result(std::string metric, std::string type, Aspect a, std::optional<double> tau, double acc) {
    EvalResult r;
    r.metric = std::move(metric);
    r.type = std::move(type);
    r.aspect = a;
    r.scores = {tau, tau, acc, acc / 2};
    r.n = 10;
    return r;
}

std::size_t count(const std::string &s, const std::string &needle) {
    std::size_t k = 0;
    for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + 1))
        ++k;
    return k;
}

} // namespace

TEST(Report, OneMetricFiveAspects) {
    std::vector<EvalResult> rs;
    for (Aspect a : kAllAspects)
        rs.push_back(result("bleu1", "n-gram", a, 0.1 * (1 + aspect_index(a)), 0.5));
    const auto text = render_report(rs, ReportFormat::text);
    const auto corr = text.substr(0, text.find("Three-way"));
    const std::string row = corr.substr(corr.find("n-gram"));
    EXPECT_EQ(count(row, "n-gram"), 1u);
    const std::regex num("-?[0-9]\\.[0-9]{4}");
    EXPECT_EQ(std::distance(std::sregex_iterator(row.begin(), row.end(), num), std::sregex_iterator()), 10);
    for (Aspect a : kAllAspects)
        EXPECT_NE(text.find(aspect_name(a)), std::string::npos);
}

TEST(Report, DominantRowCarriesEveryFlag) {
    std::vector<EvalResult> rs;
    for (Aspect a : kAllAspects) {
        rs.push_back(result("good", "n-gram", a, 0.9, 0.9));
        rs.push_back(result("weak", "n-gram", a, 0.2, 0.3));
    }
    const auto text = render_report(rs, ReportFormat::text);
    std::istringstream in(text);
    std::string line;
    std::size_t good_flags = 0, weak_flags = 0;
    while (std::getline(in, line)) {
        if (line.find(" good ") != std::string::npos)
            good_flags += count(line, "*");
        if (line.find(" weak ") != std::string::npos)
            weak_flags += count(line, "*");
    }
    EXPECT_EQ(good_flags, 20u);
    EXPECT_EQ(weak_flags, 0u);
}

TEST(Report, TiesFlagAllAndUndefinedShownAsNa) {
    const auto text = render_report({result("a", "t", Aspect::clarity, 0.5, 0.5),
                                     result("b", "t", Aspect::clarity, 0.5, 0.5),
                                     result("c", "t", Aspect::clarity, std::nullopt, 0.1)},
                                    ReportFormat::text);
    EXPECT_EQ(count(text, "0.5000*"), 6u); // tau, rho, accuracy
    EXPECT_EQ(count(text, "n/a"), 2u);
}

TEST(Report, OrderingAndDeterminism) {
    std::vector<EvalResult> rs = {result("zeta", "n-gram", Aspect::quality, 0.1, 0.1),
                                  result("ours", "trained", Aspect::quality, 0.3, 0.3),
                                  result("alpha", "n-gram", Aspect::quality, 0.2, 0.2),
                                  result("g-eval", "llm-judge", Aspect::quality, 0.4, 0.4)};
    const auto text = render_report(rs, ReportFormat::text);
    EXPECT_LT(text.find("llm-judge"), text.find("alpha"));
    EXPECT_LT(text.find("alpha"), text.find("zeta"));
    EXPECT_LT(text.find("zeta"), text.find("ours"));
    std::reverse(rs.begin(), rs.end());
    EXPECT_EQ(render_report(rs, ReportFormat::text), text);
    EXPECT_EQ(render_report(rs, ReportFormat::json), render_report(rs, ReportFormat::json));
}

TEST(Report, JsonSchema) {
    const auto doc = nlohmann::json::parse(render_report(
        {result("m", "t", Aspect::clarity, 0.25, 0.75), result("m", "t", Aspect::quality, std::nullopt, 0.5)},
        ReportFormat::json));
    const auto &rows = doc.at("results");
    ASSERT_EQ(rows.size(), 2u);
    for (const auto &key : {"metric", "type", "aspect", "tau", "rho", "accuracy", "macro_f1", "mode", "n"})
        EXPECT_TRUE(rows[0].contains(key)) << key;
    EXPECT_EQ(rows[0]["aspect"], "clarity");
    EXPECT_EQ(rows[0]["tau"], 0.25);
    EXPECT_EQ(rows[0]["mode"], "discrete");
    EXPECT_EQ(rows[0]["n"], 10);
    EXPECT_TRUE(rows[1]["tau"].is_null());
}

TEST(Report, Errors) {
    EXPECT_THROW(render_report({}, ReportFormat::text), InputError);
    EXPECT_THROW(render_report({result("m", "t", Aspect::clarity, 0.1, 0.1), result("m", "t", Aspect::clarity, 0.2, 0.2)},
                               ReportFormat::text),
                 InputError);
}

TEST(Report, SwapInvariantEndToEnd) {
    const auto corpus = testkit::random_corpus(100, 21);
    const auto flipped = testkit::swapped_corpus(corpus);
    auto run = [](const Corpus &c) {
        std::vector<EvalResult> rs;
        for (auto m : {lex::Metric::bleu1, lex::Metric::rougeL})
            for (Aspect a : kAllAspects) {
                LexicalScorer s(m);
                rs.push_back(evaluate_metric(s, c, a, CorrelationMode::raw_diff));
            }
        return render_report(rs, ReportFormat::json) + render_report(rs, ReportFormat::text);
    };
    EXPECT_EQ(run(corpus), run(flipped));
}
