#include <array>
#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "claimeval/attention.hpp"
#include "claimeval/model_io.hpp"
#include "claimeval/scorer.hpp"
#include "dense_encoder.hpp"
#include "fixtures.hpp"

using namespace claimeval;

namespace {

ScorerConfig tiny_config(std::size_t vocab = 20) {
    ScorerConfig c;
    c.vocab_size = vocab;
    c.hidden = 8;
    c.layers = 2;
    c.heads = 2;
    c.window = 2;
    c.max_len = 16;
    c.ffn = 12;
    c.dropout = 0.0;
    return c;
}

TokenSequence random_sequence(Rng &rng, const ScorerConfig &cfg, std::size_t length) {
    TokenSequence s;
    s.ids.assign(cfg.max_len, kPadId);
    s.length = length;
    s.ids[0] = kClsId;
    for (std::size_t i = 1; i < length; ++i)
        s.ids[i] = static_cast<TokenId>(kNumReserved + rng.below(cfg.vocab_size - kNumReserved));
    return s;
}

Matrix<double> random_matrix(Rng &rng, std::size_t r, std::size_t c) {
    Matrix<double> m(r, c);
    for (auto &x : m.flat())
        x = rng.uniform(-1.5, 1.5);
    return m;
}

testkit::Mat to_rows(const Matrix<double> &m) {
    testkit::Mat out(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i)
        out[i].assign(m.row(i), m.row(i) + m.cols());
    return out;
}

} // namespace

TEST(ScorerConfig, Validation) {
    auto c = tiny_config();
    EXPECT_NO_THROW(c.validate());
    c.heads = 3;
    EXPECT_THROW(c.validate(), InputError);
    c = tiny_config();
    c.window = 0;
    EXPECT_THROW(c.validate(), InputError);
    c = tiny_config();
    c.max_len = 4097;
    EXPECT_THROW(c.validate(), InputError);
    c = tiny_config(4);
    EXPECT_THROW(c.validate(), InputError);
    c = tiny_config();
    c.dropout = 1.0;
    EXPECT_THROW(c.validate(), InputError);
}

TEST(ScorerConfig, JsonRoundTrip) {
    const auto c = tiny_config();
    nlohmann::json j = c;
    EXPECT_EQ(j.get<ScorerConfig>(), c);
}

TEST(InitParams, DeterministicPerSeed) {
    const auto cfg = tiny_config();
    const auto a = init_params<double>(cfg, 3), b = init_params<double>(cfg, 3), c = init_params<double>(cfg, 4);
    EXPECT_TRUE(a == b);
    EXPECT_FALSE(a.token_embedding == c.token_embedding);
    EXPECT_EQ(a.head_b(0, 0), 0.0);
    for (const auto &L : a.layers) {
        for (double g : L.ln1_gamma.flat())
            EXPECT_EQ(g, 1.0);
        for (double bias : L.b1.flat())
            EXPECT_EQ(bias, 0.0);
    }
    const double bound = 1 / std::sqrt(8.0);
    for (double w : a.layers[0].wq.flat())
        EXPECT_LE(std::abs(w), bound);
    for (double w : a.layers[0].w2.flat())
        EXPECT_LE(std::abs(w), 1 / std::sqrt(12.0));
}

TEST(InitParams, ParameterCount) {
    const auto cfg = tiny_config();
    const std::size_t d = 8, f = 12;
    const std::size_t per_layer = 4 * d * d + 3 * d + 2 * d + d * f + f + f * d + d + 2 * d;
    EXPECT_EQ(init_params<double>(cfg, 0).parameter_count(), 20 * d + 16 * d + 2 * per_layer + d + 1);
}

TEST(AttentionPattern, WindowOneRows) {
    const std::array<std::size_t, 1> globals = {0};
    const auto p = build_attention_pattern(6, 1, globals, {});
    auto row = [&](std::size_t i) { return std::vector<std::size_t>(p.row(i).begin(), p.row(i).end()); };
    EXPECT_EQ(row(0), (std::vector<std::size_t>{0, 1, 2, 3, 4, 5}));
    EXPECT_EQ(row(1), (std::vector<std::size_t>{0, 1, 2}));
    EXPECT_EQ(row(3), (std::vector<std::size_t>{0, 2, 3, 4}));
    EXPECT_EQ(row(5), (std::vector<std::size_t>{0, 4, 5}));
    EXPECT_THROW(build_attention_pattern(6, 0, globals, {}), InputError);
    const std::array<std::size_t, 1> bad = {6};
    EXPECT_THROW(build_attention_pattern(6, 1, bad, {}), InputError);
}

TEST(AttentionPattern, PaddingMaskedOnBothSides) {
    const std::array<std::size_t, 1> globals = {0};
    const std::array<bool, 5> pad = {false, false, false, true, true};
    const auto p = build_attention_pattern(5, 4, globals, pad);
    EXPECT_EQ(std::vector<std::size_t>(p.row(0).begin(), p.row(0).end()), (std::vector<std::size_t>{0, 1, 2}));
    EXPECT_EQ(std::vector<std::size_t>(p.row(2).begin(), p.row(2).end()), (std::vector<std::size_t>{0, 1, 2}));
    // Pad queries fall back to themselves.
    EXPECT_EQ(std::vector<std::size_t>(p.row(4).begin(), p.row(4).end()), (std::vector<std::size_t>{4}));
}

TEST(SlidingWindowAttention, FullWindowMatchesDense) {
    Rng rng(1);
    for (int fixture = 0; fixture < 20; ++fixture) {
        const std::size_t n = 1 + rng.below(24), dh = 1 + rng.below(8);
        const auto q = random_matrix(rng, n, dh), k = random_matrix(rng, n, dh), v = random_matrix(rng, n, dh);
        const std::array<std::size_t, 1> globals = {0};
        const auto out = sliding_window_attention(q, k, v, n, globals);
        const auto dense = testkit::dense_attention(to_rows(q), to_rows(k), to_rows(v), std::vector<bool>(n, true));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < dh; ++c)
                EXPECT_NEAR(out(i, c), dense[i][c], 1e-12);
    }
}

TEST(SlidingWindowAttention, PadPositionsNeverLeakIntoValidRows) {
    Rng rng(2);
    const std::size_t n = 10, dh = 4;
    auto q = random_matrix(rng, n, dh), k = random_matrix(rng, n, dh), v = random_matrix(rng, n, dh);
    std::array<bool, n> pad{};
    for (std::size_t i = 6; i < n; ++i)
        pad[i] = true;
    const std::array<std::size_t, 1> globals = {0};
    const auto before = sliding_window_attention(q, k, v, 3, globals, pad);
    for (std::size_t i = 6; i < n; ++i)
        for (std::size_t c = 0; c < dh; ++c) {
            k(i, c) = 100.0 * rng.uniform();
            v(i, c) = -50.0;
        }
    const auto after = sliding_window_attention(q, k, v, 3, globals, pad);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t c = 0; c < dh; ++c)
            EXPECT_EQ(before(i, c), after(i, c));
}

TEST(Forward, FullWindowMatchesDenseEncoder) {
    Rng rng(5);
    auto cfg = tiny_config();
    cfg.window = cfg.max_len;
    for (int trial = 0; trial < 6; ++trial) {
        const auto params = init_params<double>(cfg, 100 + trial);
        const auto seq = random_sequence(rng, cfg, 3 + rng.below(cfg.max_len - 2));
        const auto h = forward(seq, params, cfg, Mode::eval);
        const auto dense = testkit::dense_forward(seq, params, cfg);
        ASSERT_EQ(h.size(), cfg.hidden);
        for (std::size_t c = 0; c < cfg.hidden; ++c)
            EXPECT_NEAR(h[c], dense[c], 1e-10);
    }
}

TEST(Forward, PadRegionIdsHaveNoInfluence) {
    Rng rng(6);
    const auto cfg = tiny_config();
    const auto params = init_params<double>(cfg, 9);
    auto seq = random_sequence(rng, cfg, 9);
    auto other = seq;
    for (std::size_t i = seq.length; i < cfg.max_len; ++i)
        other.ids[i] = static_cast<TokenId>(kNumReserved + rng.below(cfg.vocab_size - kNumReserved));
    EXPECT_EQ(forward(seq, params, cfg, Mode::eval), forward(other, params, cfg, Mode::eval));

    ForwardCache<double> ca, cb;
    score(seq, params, cfg, Mode::eval, nullptr, &ca);
    score(other, params, cfg, Mode::eval, nullptr, &cb);
    auto ga = zero_params<double>(cfg), gb = zero_params<double>(cfg);
    accumulate_gradients(ca, params, cfg, 1.0, ga);
    accumulate_gradients(cb, params, cfg, 1.0, gb);
    EXPECT_TRUE(ga == gb);
}

TEST(Forward, EvalModeIsDeterministicAndFinite) {
    Rng rng(7);
    const auto cfg = tiny_config();
    const auto params = init_params<double>(cfg, 1);
    const auto seq = random_sequence(rng, cfg, 16);
    const auto a = forward(seq, params, cfg, Mode::eval);
    EXPECT_EQ(a, forward(seq, params, cfg, Mode::eval));
    for (double x : a)
        EXPECT_TRUE(std::isfinite(x));
}

TEST(Forward, TrainModeDropoutFollowsTheGenerator) {
    Rng rng(8);
    auto cfg = tiny_config();
    cfg.dropout = 0.3;
    const auto params = init_params<double>(cfg, 1);
    const auto seq = random_sequence(rng, cfg, 12);
    Rng r1(5), r2(5), r3(6);
    const auto a = forward(seq, params, cfg, Mode::train, &r1);
    EXPECT_EQ(a, forward(seq, params, cfg, Mode::train, &r2));
    EXPECT_NE(a, forward(seq, params, cfg, Mode::train, &r3));
    EXPECT_NE(a, forward(seq, params, cfg, Mode::eval));
    EXPECT_THROW(forward(seq, params, cfg, Mode::train), InputError);
}

TEST(Forward, RejectsBadInput) {
    Rng rng(9);
    const auto cfg = tiny_config();
    const auto params = init_params<double>(cfg, 1);
    auto seq = random_sequence(rng, cfg, 5);
    seq.ids[2] = static_cast<TokenId>(cfg.vocab_size);
    EXPECT_THROW(forward(seq, params, cfg, Mode::eval), InputError);
    seq = random_sequence(rng, cfg, 5);
    seq.ids.pop_back();
    EXPECT_THROW(forward(seq, params, cfg, Mode::eval), InputError);
}

TEST(Forward, ShapeSweep) {
    Rng rng(10);
    for (std::size_t heads : {1u, 2u, 4u})
        for (std::size_t layers : {1u, 3u})
            for (std::size_t window : {1u, 3u, 40u})
                for (std::size_t length : {1u, 2u, 9u, 24u}) {
                    ScorerConfig cfg = tiny_config();
                    cfg.heads = heads;
                    cfg.layers = layers;
                    cfg.window = window;
                    cfg.max_len = 24;
                    const auto params = init_params<double>(cfg, heads * 100 + layers);
                    const auto seq = random_sequence(rng, cfg, length);
                    ForwardCache<double> cache;
                    const double s = score(seq, params, cfg, Mode::eval, nullptr, &cache);
                    EXPECT_GT(s, 0.0);
                    EXPECT_LT(s, 1.0);
                    ASSERT_EQ(cache.layers.size(), layers);
                    for (std::size_t l = 0; l < layers; ++l) {
                        const auto &L = cache.layers[l];
                        // The last layer only carries the CLS row past attention.
                        const std::size_t rows = l + 1 == layers ? 1 : length;
                        EXPECT_EQ(L.input.rows(), length);
                        EXPECT_EQ(L.input.cols(), cfg.hidden);
                        ASSERT_EQ(L.q.size(), heads);
                        EXPECT_EQ(L.q[0].rows(), rows);
                        EXPECT_EQ(L.q[0].cols(), cfg.hidden / heads);
                        EXPECT_EQ(L.k[0].rows(), length);
                        EXPECT_EQ(L.attn.rows(), rows);
                        EXPECT_EQ(L.pre_act.rows(), rows);
                        EXPECT_EQ(L.pre_act.cols(), cfg.ffn);
                        EXPECT_EQ(L.x1.rows(), rows);
                    }
                    EXPECT_EQ(cache.h.size(), cfg.hidden);
                }
}

TEST(Score, ZeroHeadGivesOneHalf) {
    Rng rng(11);
    const auto cfg = tiny_config();
    auto params = init_params<double>(cfg, 2);
    params.head_w.fill(0.0);
    for (int i = 0; i < 5; ++i)
        EXPECT_EQ(score(random_sequence(rng, cfg, 1 + rng.below(16)), params, cfg), 0.5);
}

TEST(Score, ZeroEmbeddingsAtInitGiveOneHalf) {
    Rng rng(12);
    const auto cfg = tiny_config();
    auto params = init_params<double>(cfg, 2);
    params.token_embedding.fill(0.0);
    params.position_embedding.fill(0.0);
    EXPECT_EQ(score(random_sequence(rng, cfg, 7), params, cfg), 0.5);
}

TEST(Score, IncreasingBiasIncreasesScore) {
    Rng rng(13);
    const auto cfg = tiny_config();
    auto params = init_params<double>(cfg, 2);
    const auto seq = random_sequence(rng, cfg, 10);
    double prev = score(seq, params, cfg);
    for (int i = 0; i < 10; ++i) {
        params.head_b(0, 0) += 0.5;
        const double s = score(seq, params, cfg);
        EXPECT_GT(s, prev);
        prev = s;
    }
}

constexpr double kGoldenB = 0.31682121443113742;
constexpr double kGoldenC = 0.31674172073847506;

TEST(Score, GoldenRegression) {
    // Pinned from the first verified run; any change to initialization,
    // tokenization or the forward pass shows up here.
    const auto q = testkit::shroud_example();
    Corpus corpus;
    corpus.records.push_back(q);
    const auto vocab = build_vocab(corpus);
    ScorerConfig cfg = tiny_config(vocab.size());
    cfg.max_len = 64;
    const auto params = init_params<double>(cfg, 42);
    const auto seq_b = encode_pair(q.reference, q.candidate_b, vocab, cfg.max_len);
    const auto seq_c = encode_pair(q.reference, q.candidate_c, vocab, cfg.max_len);
    EXPECT_NEAR(score(seq_b, params, cfg), kGoldenB, 1e-12);
    EXPECT_NEAR(score(seq_c, params, cfg), kGoldenC, 1e-12);
}

TEST(ModelIo, RoundTripAndDigestCheck) {
    const auto corpus = testkit::random_corpus(10, 1);
    const auto vocab = build_vocab(corpus);
    ModelArtifact m{tiny_config(vocab.size()), vocab.digest(), "clarity", {}};
    m.params = init_params<double>(m.config, 77);
    const auto dir = std::filesystem::temp_directory_path() / "claimeval_scorer_test";
    std::filesystem::create_directories(dir);
    const auto path = (dir / "model.json").string();
    save_model(path, m);
    const auto back = load_model(path, vocab);
    EXPECT_EQ(back.config, m.config);
    EXPECT_EQ(back.aspect, "clarity");
    EXPECT_TRUE(back.params == m.params);

    const auto other = build_vocab(testkit::random_corpus(10, 2), 1, 5);
    EXPECT_THROW(load_model(path, other), DataError);

    auto j = model_to_json(m);
    j["tensors"][3]["shape"] = {1, 1};
    EXPECT_THROW(model_from_json(j, vocab.digest()), DataError);
    std::filesystem::remove_all(dir);
}
