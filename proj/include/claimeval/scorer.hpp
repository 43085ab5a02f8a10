#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "claimeval/attention.hpp"
#include "claimeval/error.hpp"
#include "claimeval/random.hpp"
#include "claimeval/tensor.hpp"
#include "claimeval/text.hpp"

namespace claimeval {

struct ScorerConfig {
    std::size_t vocab_size = 0;
    std::size_t hidden = 64;
    std::size_t layers = 2;
    std::size_t heads = 4;
    std::size_t window = 16; // keys attended on each side
    std::size_t max_len = 512;
    std::size_t ffn = 256;
    double dropout = 0.1;

    std::size_t head_dim() const { return hidden / heads; }

    void validate() const {
        if (vocab_size <= kNumReserved)
            throw InputError("scorer: vocab_size must exceed the reserved ids");
        if (hidden == 0 || heads == 0 || hidden % heads != 0)
            throw InputError("scorer: hidden size must be a positive multiple of heads");
        if (layers == 0 || ffn == 0)
            throw InputError("scorer: layers and ffn must be positive");
        if (window < 1)
            throw InputError("scorer: window must be >= 1");
        if (max_len < 8 || max_len > 4096)
            throw InputError("scorer: max_len must lie in [8, 4096]");
        if (!(dropout >= 0 && dropout < 1))
            throw InputError("scorer: dropout must lie in [0, 1)");
    }

    bool operator==(const ScorerConfig &) const = default;
};

inline void to_json(nlohmann::json &j, const ScorerConfig &c) {
    j = nlohmann::json{{"vocab_size", c.vocab_size}, {"hidden", c.hidden}, {"layers", c.layers},
                       {"heads", c.heads},           {"window", c.window}, {"max_len", c.max_len},
                       {"ffn", c.ffn},               {"dropout", c.dropout}};
}

inline void from_json(const nlohmann::json &j, ScorerConfig &c) {
    c.vocab_size = j.at("vocab_size").get<std::size_t>();
    c.hidden = j.at("hidden").get<std::size_t>();
    c.layers = j.at("layers").get<std::size_t>();
    c.heads = j.at("heads").get<std::size_t>();
    c.window = j.at("window").get<std::size_t>();
    c.max_len = j.at("max_len").get<std::size_t>();
    c.ffn = j.at("ffn").get<std::size_t>();
    c.dropout = j.at("dropout").get<double>();
}

// The key projection has no bias: a key bias shifts every logit of a query
// row by the same amount and cancels in the softmax.
template <typename T>
struct LayerParams {
    Matrix<T> wq, bq, wk, wv, bv, wo, bo;
    Matrix<T> ln1_gamma, ln1_beta;
    Matrix<T> w1, b1, w2, b2;
    Matrix<T> ln2_gamma, ln2_beta;
};

template <typename T>
struct ScorerParams {
    Matrix<T> token_embedding;    // vocab × d
    Matrix<T> position_embedding; // max_len × d
    std::vector<LayerParams<T>> layers;
    Matrix<T> head_w; // 1 × d
    Matrix<T> head_b; // 1 × 1

    bool operator==(const ScorerParams &o) const {
        bool eq = token_embedding == o.token_embedding && position_embedding == o.position_embedding &&
                  head_w == o.head_w && head_b == o.head_b && layers.size() == o.layers.size();
        visit_pairs(*this, o, [&](const std::string &, const Matrix<T> &a, const Matrix<T> &b, bool) {
            eq = eq && a == b;
        });
        return eq;
    }

    // Calls f(name, matrix, decays) for every tensor in a fixed order.
    template <typename Self, typename F>
    static void visit(Self &self, F &&f) {
        f(std::string("token_embedding"), self.token_embedding, true);
        f(std::string("position_embedding"), self.position_embedding, true);
        for (std::size_t l = 0; l < self.layers.size(); ++l) {
            auto &L = self.layers[l];
            const std::string p = "layer" + std::to_string(l) + ".";
            f(p + "wq", L.wq, true);
            f(p + "bq", L.bq, false);
            f(p + "wk", L.wk, true);
            f(p + "wv", L.wv, true);
            f(p + "bv", L.bv, false);
            f(p + "wo", L.wo, true);
            f(p + "bo", L.bo, false);
            f(p + "ln1_gamma", L.ln1_gamma, false);
            f(p + "ln1_beta", L.ln1_beta, false);
            f(p + "w1", L.w1, true);
            f(p + "b1", L.b1, false);
            f(p + "w2", L.w2, true);
            f(p + "b2", L.b2, false);
            f(p + "ln2_gamma", L.ln2_gamma, false);
            f(p + "ln2_beta", L.ln2_beta, false);
        }
        f(std::string("head_w"), self.head_w, true);
        f(std::string("head_b"), self.head_b, false);
    }

    template <typename F>
    void for_each(F &&f) { visit(*this, f); }
    template <typename F>
    void for_each(F &&f) const { visit(*this, f); }

    template <typename F>
    static void visit_pairs(const ScorerParams &a, const ScorerParams &b, F &&f) {
        std::vector<const Matrix<T> *> rhs;
        b.for_each([&](const std::string &, const Matrix<T> &m, bool) { rhs.push_back(&m); });
        std::size_t i = 0;
        a.for_each([&](const std::string &name, const Matrix<T> &m, bool decay) {
            if (i < rhs.size())
                f(name, m, *rhs[i], decay);
            ++i;
        });
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for_each([&](const std::string &, const Matrix<T> &m, bool) { n += m.size(); });
        return n;
    }
};

// All-zero tensors shaped for `config`; used for gradients.
template <typename T>
ScorerParams<T> zero_params(const ScorerConfig &config) {
    const std::size_t d = config.hidden, f = config.ffn;
    ScorerParams<T> p;
    p.token_embedding = Matrix<T>(config.vocab_size, d);
    p.position_embedding = Matrix<T>(config.max_len, d);
    p.layers.resize(config.layers);
    for (auto &L : p.layers) {
        L.wq = Matrix<T>(d, d);
        L.bq = Matrix<T>(1, d);
        L.wk = Matrix<T>(d, d);
        L.wv = Matrix<T>(d, d);
        L.bv = Matrix<T>(1, d);
        L.wo = Matrix<T>(d, d);
        L.bo = Matrix<T>(1, d);
        L.ln1_gamma = Matrix<T>(1, d);
        L.ln1_beta = Matrix<T>(1, d);
        L.w1 = Matrix<T>(d, f);
        L.b1 = Matrix<T>(1, f);
        L.w2 = Matrix<T>(f, d);
        L.b2 = Matrix<T>(1, d);
        L.ln2_gamma = Matrix<T>(1, d);
        L.ln2_beta = Matrix<T>(1, d);
    }
    p.head_w = Matrix<T>(1, d);
    p.head_b = Matrix<T>(1, 1);
    return p;
}

/// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)); embeddings use fan_in = d;
/// biases 0; layer-norm gains 1.
template <typename T>
ScorerParams<T> init_params(const ScorerConfig &config, std::uint64_t seed) {
    config.validate();
    auto p = zero_params<T>(config);
    Rng rng(seed);
    auto uniform = [&](Matrix<T> &m, std::size_t fan_in) {
        const double a = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (auto &x : m.flat())
            x = static_cast<T>(rng.uniform(-a, a));
    };
    const std::size_t d = config.hidden;
    uniform(p.token_embedding, d);
    uniform(p.position_embedding, d);
    for (auto &L : p.layers) {
        uniform(L.wq, d);
        uniform(L.wk, d);
        uniform(L.wv, d);
        uniform(L.wo, d);
        uniform(L.w1, d);
        uniform(L.w2, config.ffn);
        L.ln1_gamma.fill(T(1));
        L.ln2_gamma.fill(T(1));
    }
    uniform(p.head_w, d);
    return p;
}

// Same parameters in another floating-point type.
template <typename U, typename T>
ScorerParams<U> cast_params(const ScorerParams<T> &p, const ScorerConfig &config) {
    auto out = zero_params<U>(config);
    std::vector<Matrix<U> *> dst;
    out.for_each([&](const std::string &, Matrix<U> &m, bool) { dst.push_back(&m); });
    std::size_t i = 0;
    p.for_each([&](const std::string &, const Matrix<T> &m, bool) {
        auto to = dst.at(i++)->flat();
        auto from = m.flat();
        for (std::size_t k = 0; k < from.size(); ++k)
            to[k] = static_cast<U>(from[k]);
    });
    return out;
}

enum class Mode { train, eval };

template <typename T>
struct LayerCache {
    Matrix<T> input;
    std::vector<Matrix<T>> q, k, v; // per head, length × dh
    std::vector<std::vector<T>> probs;
    Matrix<T> attn; // concatenated heads
    Matrix<T> drop1;
    Matrix<T> xhat1;
    std::vector<T> rstd1;
    Matrix<T> x1;
    Matrix<T> pre_act, act;
    Matrix<T> drop2;
    Matrix<T> xhat2;
    std::vector<T> rstd2;
};

template <typename T>
struct ForwardCache {
    std::vector<TokenId> ids;
    std::size_t length = 0;
    AttentionPattern pattern;      // all query rows
    AttentionPattern last_pattern; // CLS row only, used by the last layer
    std::vector<LayerCache<T>> layers;
    std::vector<T> h;
    T score = T(0);
};

namespace detail {

template <typename T>
Matrix<T> dropout_mask(std::size_t rows, std::size_t cols, double rate, Rng &rng) {
    Matrix<T> mask(rows, cols, T(1));
    const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
    for (auto &m : mask.flat())
        m = rng.uniform() < rate ? T(0) : keep_scale;
    return mask;
}

template <typename T>
void multiply_inplace(Matrix<T> &x, const Matrix<T> &mask) {
    auto xf = x.flat();
    auto mf = mask.flat();
    for (std::size_t i = 0; i < xf.size(); ++i)
        xf[i] *= mf[i];
}

template <typename T>
Matrix<T> column_slice(const Matrix<T> &m, std::size_t c0, std::size_t width) {
    Matrix<T> out(m.rows(), width);
    for (std::size_t i = 0; i < m.rows(); ++i)
        std::copy_n(m.row(i) + c0, width, out.row(i));
    return out;
}

template <typename T>
void add_column_slice(Matrix<T> &dst, const Matrix<T> &src, std::size_t c0) {
    for (std::size_t i = 0; i < src.rows(); ++i)
        for (std::size_t c = 0; c < src.cols(); ++c)
            dst(i, c0 + c) += src(i, c);
}

template <typename T>
Matrix<T> top_rows(const Matrix<T> &m, std::size_t rows) {
    Matrix<T> out(rows, m.cols());
    std::copy_n(m.row(0), rows * m.cols(), out.row(0));
    return out;
}

inline void check_input(const TokenSequence &seq, const ScorerConfig &config) {
    if (seq.ids.size() != config.max_len)
        throw InputError("token sequence length " + std::to_string(seq.ids.size()) +
                         " differs from max_len " + std::to_string(config.max_len));
    if (seq.length == 0 || seq.length > seq.ids.size())
        throw InputError("token sequence has an invalid non-padding length");
    for (TokenId id : seq.ids)
        if (id >= config.vocab_size)
            throw InputError("token id " + std::to_string(id) + " >= vocab_size " +
                             std::to_string(config.vocab_size));
}

} // namespace detail

namespace detail {

// One encoder layer. Reads `x` (n×d) and overwrites it with the layer output,
// which has a single row (CLS) when `last` is set.
template <typename T>
void layer_forward(Matrix<T> &x, const LayerParams<T> &L, const ScorerConfig &config,
                   const AttentionPattern &pattern, bool last, Rng *dropout_rng, LayerCache<T> &c) {
    const std::size_t n = x.rows(), d = config.hidden, H = config.heads, dh = config.head_dim();
    // Only row 0 of the last layer's output is read, so that layer computes
    // queries and everything downstream of attention for the CLS row alone.
    const std::size_t m = last ? 1 : n;
    c.input = x;
    Matrix<T> x_out = last ? top_rows(x, m) : x;

    Matrix<T> q, k, v;
    kernels::matmul(x_out, L.wq, q);
    kernels::add_bias(q, L.bq);
    kernels::matmul(x, L.wk, k);
    kernels::matmul(x, L.wv, v);
    kernels::add_bias(v, L.bv);

    c.attn = Matrix<T>(m, d);
    c.q.resize(H);
    c.k.resize(H);
    c.v.resize(H);
    c.probs.resize(H);
    for (std::size_t h = 0; h < H; ++h) {
        c.q[h] = column_slice(q, h * dh, dh);
        c.k[h] = column_slice(k, h * dh, dh);
        c.v[h] = column_slice(v, h * dh, dh);
        auto head_out = pattern_attention(c.q[h], c.k[h], c.v[h], pattern, &c.probs[h]);
        add_column_slice(c.attn, head_out, h * dh);
    }

    Matrix<T> o;
    kernels::matmul(c.attn, L.wo, o);
    kernels::add_bias(o, L.bo);
    if (dropout_rng) {
        c.drop1 = dropout_mask<T>(m, d, config.dropout, *dropout_rng);
        multiply_inplace(o, c.drop1);
    } else {
        c.drop1 = Matrix<T>();
    }
    kernels::add_inplace(o, x_out); // residual
    kernels::layer_norm(o, L.ln1_gamma, L.ln1_beta, c.x1, c.xhat1, c.rstd1);

    kernels::matmul(c.x1, L.w1, c.pre_act);
    kernels::add_bias(c.pre_act, L.b1);
    c.act = Matrix<T>(m, config.ffn);
    {
        auto src = c.pre_act.flat();
        auto dst = c.act.flat();
        for (std::size_t i = 0; i < src.size(); ++i)
            dst[i] = kernels::gelu(src[i]);
    }
    Matrix<T> f;
    kernels::matmul(c.act, L.w2, f);
    kernels::add_bias(f, L.b2);
    if (dropout_rng) {
        c.drop2 = dropout_mask<T>(m, d, config.dropout, *dropout_rng);
        multiply_inplace(f, c.drop2);
    } else {
        c.drop2 = Matrix<T>();
    }
    kernels::add_inplace(f, c.x1);
    kernels::layer_norm(f, L.ln2_gamma, L.ln2_beta, x, c.xhat2, c.rstd2);
}

template <typename T>
Matrix<T> embed(const TokenSequence &seq, const ScorerParams<T> &params, std::size_t d) {
    Matrix<T> x(seq.length, d);
    for (std::size_t i = 0; i < seq.length; ++i) {
        const T *te = params.token_embedding.row(seq.ids[i]);
        const T *pe = params.position_embedding.row(i);
        for (std::size_t c = 0; c < d; ++c)
            x(i, c) = te[c] + pe[c];
    }
    return x;
}

} // namespace detail

/// Encoder forward pass; returns h, the final hidden state at the CLS
/// position. Positions >= seq.length are padding regardless of their ids.
/// In train mode with dropout > 0 the masks are drawn from `rng`.
template <typename T>
std::vector<T> forward(const TokenSequence &seq, const ScorerParams<T> &params, const ScorerConfig &config,
                       Mode mode, Rng *rng = nullptr, ForwardCache<T> *cache = nullptr) {
    detail::check_input(seq, config);
    // Padding is masked out of every attention row and the output is read at
    // position 0, so only the non-padding prefix is computed.
    const std::size_t n = seq.length, d = config.hidden;
    const bool use_dropout = mode == Mode::train && config.dropout > 0;
    if (use_dropout && !rng)
        throw InputError("train-mode dropout needs a random generator");

    static constexpr std::array<std::size_t, 1> kGlobal = {0};
    AttentionPattern pattern = build_attention_pattern(n, config.window, kGlobal, {});
    AttentionPattern last_pattern = leading_rows(pattern, 1);

    Matrix<T> x = detail::embed(seq, params, d);
    if (cache) {
        cache->ids = seq.ids;
        cache->length = seq.length;
        cache->layers.assign(config.layers, {});
    }
    LayerCache<T> local;
    for (std::size_t l = 0; l < config.layers; ++l) {
        const bool last = l + 1 == config.layers;
        detail::layer_forward(x, params.layers[l], config, last ? last_pattern : pattern, last,
                              use_dropout ? rng : nullptr, cache ? cache->layers[l] : local);
    }

    std::vector<T> h(x.row(0), x.row(0) + d);
    if (cache) {
        cache->pattern = std::move(pattern);
        cache->last_pattern = std::move(last_pattern);
        cache->h = h;
    }
    return h;
}

/// Eval-mode hidden states entering each layer, so that a caller changing
/// only parameters of layer l or later can restart from there.
template <typename T>
struct LayerInputs {
    std::vector<Matrix<T>> inputs; // inputs[l] enters layer l
    AttentionPattern pattern;
    AttentionPattern last_pattern;
};

template <typename T>
LayerInputs<T> layer_inputs(const TokenSequence &seq, const ScorerParams<T> &params, const ScorerConfig &config) {
    detail::check_input(seq, config);
    static constexpr std::array<std::size_t, 1> kGlobal = {0};
    LayerInputs<T> out;
    out.pattern = build_attention_pattern(seq.length, config.window, kGlobal, {});
    out.last_pattern = leading_rows(out.pattern, 1);
    Matrix<T> x = detail::embed(seq, params, config.hidden);
    LayerCache<T> scratch;
    for (std::size_t l = 0; l < config.layers; ++l) {
        out.inputs.push_back(x);
        const bool last = l + 1 == config.layers;
        detail::layer_forward(x, params.layers[l], config, last ? out.last_pattern : out.pattern, last, nullptr,
                              scratch);
    }
    out.inputs.push_back(x); // CLS row of the final layer
    return out;
}

/// Eval-mode h recomputed from the input of layer `from`.
template <typename T>
std::vector<T> forward_from(const LayerInputs<T> &cached, std::size_t from, const ScorerParams<T> &params,
                            const ScorerConfig &config) {
    Matrix<T> x = cached.inputs.at(from);
    LayerCache<T> scratch;
    for (std::size_t l = from; l < config.layers; ++l) {
        const bool last = l + 1 == config.layers;
        detail::layer_forward(x, params.layers[l], config, last ? cached.last_pattern : cached.pattern, last,
                              nullptr, scratch);
    }
    return std::vector<T>(x.row(0), x.row(0) + config.hidden);
}

template <typename T>
T head_score(const std::vector<T> &h, const ScorerParams<T> &params) {
    T z = params.head_b(0, 0);
    for (std::size_t c = 0; c < h.size(); ++c)
        z += params.head_w(0, c) * h[c];
    return kernels::sigmoid(z);
}

/// s(candidate | reference) = sigmoid(w·h + b), strictly inside (0, 1) for
/// finite parameters.
template <typename T>
T score(const TokenSequence &seq, const ScorerParams<T> &params, const ScorerConfig &config,
        Mode mode = Mode::eval, Rng *rng = nullptr, ForwardCache<T> *cache = nullptr) {
    const auto h = forward(seq, params, config, mode, rng, cache);
    const T s = head_score(h, params);
    if (cache)
        cache->score = s;
    return s;
}

/// Backpropagates dL/ds for one scored sequence and adds the parameter
/// gradients into `grads` (shaped like the parameters).
template <typename T>
void accumulate_gradients(const ForwardCache<T> &cache, const ScorerParams<T> &params,
                          const ScorerConfig &config, T dloss_dscore, ScorerParams<T> &grads) {
    if (dloss_dscore == T(0))
        return;
    const std::size_t n = cache.length, d = config.hidden, H = config.heads, dh = config.head_dim();
    const T s = cache.score;
    const T dz = dloss_dscore * s * (T(1) - s);

    grads.head_b(0, 0) += dz;
    Matrix<T> dx(1, d); // only the CLS row of the last layer exists
    for (std::size_t c = 0; c < d; ++c) {
        grads.head_w(0, c) += dz * cache.h[c];
        dx(0, c) = dz * params.head_w(0, c);
    }

    for (std::size_t l = config.layers; l-- > 0;) {
        const auto &L = params.layers[l];
        auto &G = grads.layers[l];
        const auto &c = cache.layers[l];
        const bool last = l + 1 == config.layers;
        const std::size_t m = c.x1.rows();
        const AttentionPattern &rows_pattern = last ? cache.last_pattern : cache.pattern;

        // LN2 over (x1 + dropout(ffn))
        Matrix<T> dr2;
        kernels::layer_norm_backward(dx, c.xhat2, c.rstd2, L.ln2_gamma, dr2, G.ln2_gamma, G.ln2_beta);
        Matrix<T> dx1 = dr2;
        Matrix<T> df = dr2;
        if (c.drop2.size())
            detail::multiply_inplace(df, c.drop2);
        kernels::sum_rows_acc(df, G.b2);
        kernels::matmul_tn_acc(c.act, df, G.w2);
        Matrix<T> dact(m, config.ffn);
        kernels::matmul_nt_acc(df, L.w2, dact);
        {
            auto g = dact.flat();
            auto pre = c.pre_act.flat();
            for (std::size_t i = 0; i < g.size(); ++i)
                g[i] *= kernels::gelu_grad(pre[i]);
        }
        kernels::sum_rows_acc(dact, G.b1);
        kernels::matmul_tn_acc(c.x1, dact, G.w1);
        kernels::matmul_nt_acc(dact, L.w1, dx1);

        // LN1 over (input + dropout(attention output))
        Matrix<T> dr1;
        kernels::layer_norm_backward(dx1, c.xhat1, c.rstd1, L.ln1_gamma, dr1, G.ln1_gamma, G.ln1_beta);
        Matrix<T> dout = dr1;
        if (c.drop1.size())
            detail::multiply_inplace(dout, c.drop1);
        kernels::sum_rows_acc(dout, G.bo);
        kernels::matmul_tn_acc(c.attn, dout, G.wo);
        Matrix<T> dattn(m, d);
        kernels::matmul_nt_acc(dout, L.wo, dattn);

        Matrix<T> dq(m, d), dk(n, d), dv(n, d);
        for (std::size_t h = 0; h < H; ++h) {
            const auto dhead = detail::column_slice(dattn, h * dh, dh);
            Matrix<T> dqh(m, dh), dkh(n, dh), dvh(n, dh);
            pattern_attention_backward(c.q[h], c.k[h], c.v[h], rows_pattern, c.probs[h], dhead, dqh, dkh, dvh);
            detail::add_column_slice(dq, dqh, h * dh);
            detail::add_column_slice(dk, dkh, h * dh);
            detail::add_column_slice(dv, dvh, h * dh);
        }
        kernels::sum_rows_acc(dq, G.bq);
        kernels::sum_rows_acc(dv, G.bv);
        Matrix<T> dinput(n, d);
        if (m == n) {
            kernels::matmul_tn_acc(c.input, dq, G.wq);
            dinput = std::move(dr1);
            kernels::matmul_nt_acc(dq, L.wq, dinput);
        } else {
            // Query and residual paths only touch the leading rows.
            kernels::matmul_tn_acc(detail::top_rows(c.input, m), dq, G.wq);
            kernels::matmul_nt_acc(dq, L.wq, dr1);
            std::copy_n(dr1.row(0), m * d, dinput.row(0));
        }
        kernels::matmul_tn_acc(c.input, dk, G.wk);
        kernels::matmul_tn_acc(c.input, dv, G.wv);
        kernels::matmul_nt_acc(dk, L.wk, dinput);
        kernels::matmul_nt_acc(dv, L.wv, dinput);
        dx = std::move(dinput);
    }

    for (std::size_t i = 0; i < n; ++i) {
        const T *gi = dx.row(i);
        T *te = grads.token_embedding.row(cache.ids[i]);
        T *pe = grads.position_embedding.row(i);
        for (std::size_t c = 0; c < d; ++c) {
            te[c] += gi[c];
            pe[c] += gi[c];
        }
    }
}

template <typename T>
bool all_finite(const ScorerParams<T> &p) {
    bool ok = true;
    p.for_each([&](const std::string &, const Matrix<T> &m, bool) {
        for (T x : m.flat())
            ok = ok && std::isfinite(x);
    });
    return ok;
}

} // namespace claimeval
