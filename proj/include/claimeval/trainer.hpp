#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "claimeval/corpus.hpp"
#include "claimeval/error.hpp"
#include "claimeval/random.hpp"
#include "claimeval/scorer.hpp"
#include "claimeval/text.hpp"

namespace claimeval {

// Margin m separates candidates labelled unequal; tolerance n is the score
// gap allowed for candidates labelled equal.
struct LossConfig {
    double margin = 0.1;
    double tolerance = 0.02;

    void validate() const {
        if (!(tolerance > 0 && margin > tolerance && margin < 1))
            throw InputError("loss: need 0 < tolerance < margin < 1");
    }
};

// Loss value with its derivatives in s_B and s_C. `hinge` is the ReLU
// argument; the subgradient at hinge == 0 is 0.
struct PairLoss {
    double loss = 0;
    double d_sb = 0;
    double d_sc = 0;
    double hinge = 0;
};

inline PairLoss pair_loss_terms(double s_b, double s_c, Label y, const LossConfig &config) {
    PairLoss out;
    switch (y) {
    case Label::b_better:
        out.hinge = config.margin - (s_b - s_c);
        if (out.hinge > 0) {
            out.d_sb = -1;
            out.d_sc = 1;
        }
        break;
    case Label::equal: {
        const double diff = s_b - s_c;
        out.hinge = std::abs(diff) - config.tolerance;
        if (out.hinge > 0) {
            const double sign = diff > 0 ? 1.0 : -1.0;
            out.d_sb = sign;
            out.d_sc = -sign;
        }
        break;
    }
    case Label::c_better:
        out.hinge = config.margin - (s_c - s_b);
        if (out.hinge > 0) {
            out.d_sb = 1;
            out.d_sc = -1;
        }
        break;
    }
    out.loss = std::max(0.0, out.hinge);
    return out;
}

inline double pair_loss(double s_b, double s_c, Label y, const LossConfig &config) {
    return pair_loss_terms(s_b, s_c, y, config).loss;
}

inline double pair_loss(double s_b, double s_c, int y, const LossConfig &config) {
    auto label = label_from_int(y);
    if (!label)
        throw InputError("pair_loss: label must be 1, 0 or -1");
    return pair_loss(s_b, s_c, *label, config);
}

struct ScoredPair {
    double s_b = 0;
    double s_c = 0;
    Label label = Label::equal;
};

/// Mean pair loss, summed in index order.
inline double batch_loss(std::span<const ScoredPair> batch, const LossConfig &config) {
    if (batch.empty())
        throw InputError("batch_loss: empty batch");
    double sum = 0;
    for (const auto &p : batch)
        sum += pair_loss(p.s_b, p.s_c, p.label, config);
    return sum / static_cast<double>(batch.size());
}

/// Fraction of pairs ordered as labelled: strict order for 1 / -1, a gap of
/// at most the loss tolerance for 0.
inline double pairwise_accuracy(std::span<const ScoredPair> pairs, const LossConfig &config) {
    if (pairs.empty())
        return 0.0;
    std::size_t hits = 0;
    for (const auto &p : pairs) {
        const double diff = p.s_b - p.s_c;
        switch (p.label) {
        case Label::b_better: hits += diff > 0; break;
        case Label::c_better: hits += diff < 0; break;
        case Label::equal: hits += std::abs(diff) <= config.tolerance; break;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(pairs.size());
}

struct AdamWConfig {
    double learning_rate = 5e-6;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.01;
};

/// Adam with decoupled weight decay. Per step and element:
///   theta *= (1 - lr * weight_decay)            (decaying tensors only)
///   m = b1 m + (1 - b1) g ; v = b2 v + (1 - b2) g^2
///   theta -= lr * m_hat / (sqrt(v_hat) + eps)
class AdamW {
  public:
    explicit AdamW(AdamWConfig config) : config_(config) {}

    template <typename T>
    struct Slot {
        std::span<T> param;
        std::span<const T> grad;
        bool decay;
    };

    template <typename T>
    void step(std::span<const Slot<T>> slots) {
        ++t_;
        if (m_.size() < slots.size()) {
            m_.resize(slots.size());
            v_.resize(slots.size());
        }
        const double lr = config_.learning_rate;
        const double bc1 = 1 - std::pow(config_.beta1, static_cast<double>(t_));
        const double bc2 = 1 - std::pow(config_.beta2, static_cast<double>(t_));
        const T shrink = static_cast<T>(1 - lr * config_.weight_decay);
        for (std::size_t s = 0; s < slots.size(); ++s) {
            const auto &slot = slots[s];
            auto &m = m_[s];
            auto &v = v_[s];
            if (m.size() != slot.param.size()) {
                m.assign(slot.param.size(), 0.0);
                v.assign(slot.param.size(), 0.0);
            }
            for (std::size_t i = 0; i < slot.param.size(); ++i) {
                const double g = static_cast<double>(slot.grad[i]);
                if (slot.decay)
                    slot.param[i] *= shrink;
                m[i] = config_.beta1 * m[i] + (1 - config_.beta1) * g;
                v[i] = config_.beta2 * v[i] + (1 - config_.beta2) * g * g;
                const double update = lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + config_.epsilon);
                slot.param[i] -= static_cast<T>(update);
            }
        }
    }

    template <typename T>
    void step(ScorerParams<T> &params, const ScorerParams<T> &grads) {
        std::vector<Slot<T>> slots;
        std::vector<const Matrix<T> *> g;
        grads.for_each([&](const std::string &, const Matrix<T> &m, bool) { g.push_back(&m); });
        std::size_t i = 0;
        params.for_each([&](const std::string &, Matrix<T> &m, bool decay) {
            slots.push_back({m.flat(), g[i++]->flat(), decay});
        });
        step(std::span<const Slot<T>>(slots));
    }

    long steps() const noexcept { return t_; }

  private:
    AdamWConfig config_;
    long t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

struct TrainConfig {
    std::size_t batch_size = 4;
    double learning_rate = 5e-6;
    double weight_decay = 0.01;
    std::size_t epochs = 10;
    double val_fraction = 0.1;
    std::uint64_t seed = 0;
    LossConfig loss;
    std::size_t patience = 0; // 0 disables early stopping

    void validate() const {
        if (batch_size < 1)
            throw InputError("train: batch_size must be >= 1");
        if (epochs < 1)
            throw InputError("train: epochs must be >= 1");
        if (!(learning_rate >= 0) || !(weight_decay >= 0))
            throw InputError("train: learning rate and weight decay must be >= 0");
        if (!(val_fraction >= 0 && val_fraction < 1))
            throw InputError("train: val_fraction must lie in [0, 1)");
        loss.validate();
    }
};

struct TrainHistory {
    std::vector<double> train_loss;
    std::vector<double> val_loss;
    std::vector<double> val_acc;
    std::size_t best_epoch = 0; // 0-based

    std::size_t epochs() const noexcept { return train_loss.size(); }

    bool operator==(const TrainHistory &) const = default;

    // epoch,train_loss,val_loss,val_acc with 1-based epochs.
    std::string to_csv() const {
        std::ostringstream out;
        out.precision(17);
        out << "epoch,train_loss,val_loss,val_acc\n";
        for (std::size_t e = 0; e < epochs(); ++e)
            out << e + 1 << ',' << train_loss[e] << ',' << val_loss[e] << ',' << val_acc[e] << '\n';
        return out.str();
    }
};

struct EncodedPair {
    TokenSequence with_b; // [CLS] A [SEP] B [SEP]
    TokenSequence with_c;
    Label label = Label::equal;
};

inline std::vector<EncodedPair> encode_corpus(const Corpus &corpus, Aspect aspect, const Vocab &vocab,
                                              std::size_t max_len, const TokenizerConfig &tok = {}) {
    std::vector<EncodedPair> out;
    out.reserve(corpus.size());
    for (const auto &q : corpus.records) {
        const auto ref = tokenize(q.reference, tok);
        out.push_back({encode_pair(ref, tokenize(q.candidate_b, tok), vocab, max_len),
                       encode_pair(ref, tokenize(q.candidate_c, tok), vocab, max_len), q.labels[aspect]});
    }
    return out;
}

template <typename T>
std::vector<ScoredPair> score_pairs(std::span<const EncodedPair> pairs, const ScorerParams<T> &params,
                                    const ScorerConfig &config) {
    std::vector<ScoredPair> out;
    out.reserve(pairs.size());
    for (const auto &p : pairs)
        out.push_back({static_cast<double>(score(p.with_b, params, config)),
                       static_cast<double>(score(p.with_c, params, config)), p.label});
    return out;
}

/// Mean loss over `batch` and its gradient. Both candidates of every pair
/// are scored by the same parameters; their gradients sum into `grads`.
template <typename T>
double loss_and_gradient(std::span<const EncodedPair> batch, const ScorerParams<T> &params,
                         const ScorerConfig &config, const LossConfig &loss, Mode mode, Rng *rng,
                         ScorerParams<T> &grads, std::vector<ScoredPair> *scored = nullptr) {
    if (batch.empty())
        throw InputError("loss_and_gradient: empty batch");
    const double inv = 1.0 / static_cast<double>(batch.size());
    double sum = 0;
    ForwardCache<T> cache_b, cache_c;
    for (const auto &p : batch) {
        const T s_b = score(p.with_b, params, config, mode, rng, &cache_b);
        const T s_c = score(p.with_c, params, config, mode, rng, &cache_c);
        const auto terms = pair_loss_terms(static_cast<double>(s_b), static_cast<double>(s_c), p.label, loss);
        sum += terms.loss;
        if (scored)
            scored->push_back({static_cast<double>(s_b), static_cast<double>(s_c), p.label});
        accumulate_gradients(cache_b, params, config, static_cast<T>(terms.d_sb * inv), grads);
        accumulate_gradients(cache_c, params, config, static_cast<T>(terms.d_sc * inv), grads);
    }
    return sum * inv;
}

template <typename T>
struct TrainResult {
    ScorerParams<T> params;
    TrainHistory history;
};

/// Trains one aspect model on `train`. A seeded val_fraction of the records is
/// held out for model selection (best validation pairwise accuracy, then lower
/// validation loss, then earlier epoch). If the hold-out rounds to zero
/// records, selection uses the fitted records.
template <typename T = double>
TrainResult<T> train_aspect_model(const Corpus &train, Aspect aspect, const ScorerConfig &scorer_config,
                                  const TrainConfig &config, const Vocab &vocab,
                                  const TokenizerConfig &tok = {}) {
    if (train.empty())
        throw InputError("train_aspect_model: empty training corpus");
    scorer_config.validate();
    config.validate();
    if (scorer_config.vocab_size != vocab.size())
        throw InputError("scorer vocab_size does not match the vocabulary");

    const auto parts = split_corpus(train, 0.0, config.val_fraction, derive_seed(config.seed, 3));
    const auto fit = encode_corpus(parts.train, aspect, vocab, scorer_config.max_len, tok);
    const auto held = encode_corpus(parts.val, aspect, vocab, scorer_config.max_len, tok);
    if (fit.empty())
        throw InputError("train_aspect_model: no records left for fitting after the validation hold-out");
    const auto &val = held.empty() ? fit : held;

    TrainResult<T> result;
    result.params = init_params<T>(scorer_config, derive_seed(config.seed, 0));
    Rng order_rng(derive_seed(config.seed, 1));
    Rng dropout_rng(derive_seed(config.seed, 2));
    AdamW optimizer({config.learning_rate, 0.9, 0.999, 1e-8, config.weight_decay});

    auto grads = zero_params<T>(scorer_config);
    ScorerParams<T> best = result.params;
    auto &hist = result.history;
    std::size_t since_best = 0;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        auto order = order_rng.permutation(fit.size());
        double loss_sum = 0;
        std::vector<EncodedPair> batch;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            batch.clear();
            for (std::size_t i = start; i < std::min(order.size(), start + config.batch_size); ++i)
                batch.push_back(fit[order[i]]);
            grads.for_each([](const std::string &, Matrix<T> &m, bool) { m.fill(T(0)); });
            const double loss = loss_and_gradient<T>(batch, result.params, scorer_config, config.loss,
                                                     Mode::train, &dropout_rng, grads);
            if (!std::isfinite(loss) || !all_finite(grads)) {
                std::ostringstream msg;
                msg << "non-finite loss or gradient at epoch " << epoch + 1 << ", batch starting at "
                    << start << " (loss " << loss << ")";
                throw NumericError(msg.str());
            }
            loss_sum += loss * static_cast<double>(batch.size());
            optimizer.step(result.params, grads);
        }

        const auto val_scored = score_pairs<T>(val, result.params, scorer_config);
        const double val_loss = batch_loss(val_scored, config.loss);
        const double val_acc = pairwise_accuracy(val_scored, config.loss);
        hist.train_loss.push_back(loss_sum / static_cast<double>(fit.size()));
        hist.val_loss.push_back(val_loss);
        hist.val_acc.push_back(val_acc);

        const bool improved = epoch == 0 || val_acc > hist.val_acc[hist.best_epoch] ||
                              (val_acc == hist.val_acc[hist.best_epoch] && val_loss < hist.val_loss[hist.best_epoch]);
        if (improved) {
            hist.best_epoch = epoch;
            best = result.params;
            since_best = 0;
        } else if (config.patience && ++since_best >= config.patience) {
            break;
        }
    }
    result.params = std::move(best);
    return result;
}

struct GradCheckOptions {
    double epsilon = 1e-5;
    // Entries checked per tensor; 0 checks every entry. Sampled entries are
    // drawn without replacement from `seed`.
    std::size_t max_entries_per_tensor = 0;
    std::uint64_t seed = 0;
    // Pairs whose hinge argument is this close to 0 are left out.
    double kink_guard = 1e-6;
};

struct GradCheckReport {
    double max_relative_error = 0;
    std::string worst_tensor;
    std::size_t worst_index = 0;
    std::size_t entries_checked = 0;
    std::size_t pairs_used = 0;
    std::size_t pairs_excluded = 0;
    std::map<std::string, double> per_tensor; // max relative error by tensor
};

inline double relative_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-12});
}

/// Compares the backpropagated gradient of the mean pair loss with central
/// differences (f(θ+ε) - f(θ-ε)) / 2ε, in eval mode.
inline GradCheckReport grad_check(const ScorerParams<double> &params, const ScorerConfig &config,
                                  std::span<const EncodedPair> fixtures, const LossConfig &loss,
                                  const GradCheckOptions &options = {}) {
    if (!(options.epsilon >= 1e-7 && options.epsilon <= 1e-3))
        throw InputError("grad_check: epsilon must lie in [1e-7, 1e-3]");
    GradCheckReport report;

    std::vector<EncodedPair> used;
    for (const auto &p : fixtures) {
        const auto s_b = score(p.with_b, params, config);
        const auto s_c = score(p.with_c, params, config);
        if (std::abs(pair_loss_terms(s_b, s_c, p.label, loss).hinge) < options.kink_guard)
            ++report.pairs_excluded;
        else
            used.push_back(p);
    }
    report.pairs_used = used.size();
    if (used.empty())
        return report;

    auto analytic = zero_params<double>(config);
    loss_and_gradient<double>(used, params, config, loss, Mode::eval, nullptr, analytic);

    // The finite differences run in extended precision so that round-off in
    // the objective does not swamp entries with very small gradients.
    using Wide = long double;
    auto probe = cast_params<Wide>(params, config);

    // A perturbation in layer l leaves the inputs of layers <= l unchanged,
    // so the objective restarts from the cached input of the tensor's layer.
    std::vector<std::pair<LayerInputs<Wide>, LayerInputs<Wide>>> cached;
    for (const auto &pair : used)
        cached.emplace_back(layer_inputs(pair.with_b, probe, config), layer_inputs(pair.with_c, probe, config));
    auto objective = [&](const ScorerParams<Wide> &p, std::ptrdiff_t from) {
        auto score_of = [&](const TokenSequence &seq, const LayerInputs<Wide> &in) {
            if (from < 0)
                return score(seq, p, config);
            const auto l = static_cast<std::size_t>(from);
            if (l == config.layers)
                return head_score(std::vector<Wide>(in.inputs.back().row(0), in.inputs.back().row(0) + config.hidden), p);
            return head_score(forward_from(in, l, p, config), p);
        };
        Wide sum = 0;
        for (std::size_t i = 0; i < used.size(); ++i) {
            const Wide diff = score_of(used[i].with_b, cached[i].first) - score_of(used[i].with_c, cached[i].second);
            Wide hinge = 0;
            switch (used[i].label) {
            case Label::b_better: hinge = static_cast<Wide>(loss.margin) - diff; break;
            case Label::c_better: hinge = static_cast<Wide>(loss.margin) + diff; break;
            case Label::equal: hinge = std::abs(diff) - static_cast<Wide>(loss.tolerance); break;
            }
            sum += std::max(Wide(0), hinge);
        }
        return sum / static_cast<Wide>(used.size());
    };
    // -1: embeddings (full pass); l: tensor of layer l; layers: head.
    auto start_layer = [&](const std::string &name) -> std::ptrdiff_t {
        if (name.rfind("layer", 0) == 0)
            return std::stoi(name.substr(5));
        if (name.rfind("head_", 0) == 0)
            return static_cast<std::ptrdiff_t>(config.layers);
        return -1;
    };

    std::vector<const Matrix<double> *> grads;
    analytic.for_each([&](const std::string &, const Matrix<double> &m, bool) { grads.push_back(&m); });
    Rng rng(options.seed);
    std::size_t t = 0;
    probe.for_each([&](const std::string &name, Matrix<Wide> &m, bool) {
        const auto &g = *grads[t++];
        const auto from = start_layer(name);
        std::vector<std::size_t> entries;
        if (options.max_entries_per_tensor == 0 || m.size() <= options.max_entries_per_tensor) {
            entries.resize(m.size());
            std::iota(entries.begin(), entries.end(), std::size_t{0});
        } else {
            entries = rng.permutation(m.size());
            entries.resize(options.max_entries_per_tensor);
        }
        double tensor_max = 0;
        for (std::size_t idx : entries) {
            Wide &theta = m.flat()[idx];
            const Wide saved = theta;
            const Wide eps = static_cast<Wide>(options.epsilon);
            theta = saved + eps;
            const Wide up = objective(probe, from);
            theta = saved - eps;
            const Wide down = objective(probe, from);
            theta = saved;
            const double numeric = static_cast<double>((up - down) / (2 * eps));
            const double err = relative_error(g.flat()[idx], numeric);
            ++report.entries_checked;
            tensor_max = std::max(tensor_max, err);
            if (err > report.max_relative_error || report.worst_tensor.empty()) {
                if (err >= report.max_relative_error) {
                    report.max_relative_error = err;
                    report.worst_tensor = name;
                    report.worst_index = idx;
                }
            }
        }
        report.per_tensor[name] = tensor_max;
    });
    return report;
}

} // namespace claimeval
