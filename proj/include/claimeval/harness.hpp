#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "claimeval/corpus.hpp"
#include "claimeval/error.hpp"
#include "claimeval/lexmetrics.hpp"
#include "claimeval/model_io.hpp"
#include "claimeval/scorer.hpp"
#include "claimeval/stats.hpp"
#include "claimeval/text.hpp"

namespace claimeval {

enum class ScorerKind { lexical, learned, external_file, judge };

inline constexpr std::string_view kind_name(ScorerKind k) {
    switch (k) {
    case ScorerKind::lexical: return "lexical";
    case ScorerKind::learned: return "learned";
    case ScorerKind::external_file: return "external_file";
    case ScorerKind::judge: return "judge";
    }
    return "?";
}

// Anything that maps (reference, candidate) to a number where larger is better.
class Scorer {
  public:
    virtual ~Scorer() = default;

    virtual std::string name() const = 0;
    virtual ScorerKind kind() const = 0;

    // Group label used in reports.
    virtual std::string type() const {
        switch (kind()) {
        case ScorerKind::lexical: return "n-gram";
        case ScorerKind::learned: return "trained";
        case ScorerKind::external_file: return "external";
        case ScorerKind::judge: return "llm-judge";
        }
        return "?";
    }

    // Per-aspect scorers are bound to one aspect; the rest apply to all.
    virtual bool applies_to(Aspect) const { return true; }

    // Called once per corpus before any score_record call.
    virtual void prepare(const Corpus &, Aspect) {}

    // (s_B, s_C) for one record.
    virtual std::pair<double, double> score_record(const Quadruplet &q, Aspect aspect) = 0;
};

class LexicalScorer : public Scorer {
  public:
    explicit LexicalScorer(lex::Metric metric, TokenizerConfig tok = {}) : metric_(metric), tok_(tok) {}

    std::string name() const override { return std::string(lex::metric_name(metric_)); }
    ScorerKind kind() const override { return ScorerKind::lexical; }

    std::pair<double, double> score_record(const Quadruplet &q, Aspect) override {
        const auto ref = tokenize(q.reference, tok_);
        return {lex::metric_score(metric_, tokenize(q.candidate_b, tok_), ref),
                lex::metric_score(metric_, tokenize(q.candidate_c, tok_), ref)};
    }

  private:
    lex::Metric metric_;
    TokenizerConfig tok_;
};

class LearnedScorer : public Scorer {
  public:
    LearnedScorer(std::string name, Aspect aspect, ScorerConfig config, ScorerParams<double> params, Vocab vocab,
                  TokenizerConfig tok = {})
        : name_(std::move(name)), aspect_(aspect), config_(config), params_(std::move(params)),
          vocab_(std::move(vocab)), tok_(tok) {
        config_.validate();
        if (config_.vocab_size != vocab_.size())
            throw InputError("learned scorer: model and vocabulary sizes differ");
    }

    LearnedScorer(std::string name, const ModelArtifact &model, Vocab vocab, TokenizerConfig tok = {})
        : LearnedScorer(std::move(name), aspect_of(model), model.config, model.params, std::move(vocab), tok) {}

    std::string name() const override { return name_; }
    ScorerKind kind() const override { return ScorerKind::learned; }
    bool applies_to(Aspect a) const override { return a == aspect_; }
    Aspect aspect() const noexcept { return aspect_; }

    std::pair<double, double> score_record(const Quadruplet &q, Aspect) override {
        const auto ref = tokenize(q.reference, tok_);
        const auto b = encode_pair(ref, tokenize(q.candidate_b, tok_), vocab_, config_.max_len);
        const auto c = encode_pair(ref, tokenize(q.candidate_c, tok_), vocab_, config_.max_len);
        return {score(b, params_, config_), score(c, params_, config_)};
    }

  private:
    static Aspect aspect_of(const ModelArtifact &m) {
        auto a = parse_aspect(m.aspect);
        if (!a)
            throw DataError("model file names unknown aspect \"" + m.aspect + "\"");
        return *a;
    }

    std::string name_;
    Aspect aspect_;
    ScorerConfig config_;
    ScorerParams<double> params_;
    Vocab vocab_;
    TokenizerConfig tok_;
};

/// Scores computed elsewhere, one JSONL line per record:
/// {"id": str, "score_b": number, "score_c": number}.
class ExternalFileScorer : public Scorer {
  public:
    ExternalFileScorer(std::string name, std::unordered_map<std::string, std::pair<double, double>> scores,
                       std::string type = "external", std::optional<Aspect> aspect = std::nullopt)
        : name_(std::move(name)), type_(std::move(type)), aspect_(aspect), scores_(std::move(scores)) {}

    static ExternalFileScorer parse(std::string name, std::string_view content, std::string type = "external",
                                    std::optional<Aspect> aspect = std::nullopt) {
        std::unordered_map<std::string, std::pair<double, double>> scores;
        std::size_t line_no = 0, pos = 0;
        while (pos < content.size()) {
            std::size_t end = content.find('\n', pos);
            if (end == std::string_view::npos)
                end = content.size();
            const auto line = content.substr(pos, end - pos);
            pos = end + 1;
            ++line_no;
            if (line.find_first_not_of(" \t\r") == std::string_view::npos)
                continue;
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(line);
            } catch (const nlohmann::json::parse_error &e) {
                throw ParseError(std::string("malformed JSON: ") + e.what(), line_no);
            }
            if (!j.is_object() || !j.contains("id") || !j["id"].is_string() || !j.contains("score_b") ||
                !j["score_b"].is_number() || !j.contains("score_c") || !j["score_c"].is_number())
                throw ParseError("expected {\"id\": str, \"score_b\": number, \"score_c\": number}", line_no);
            const auto id = j["id"].get<std::string>();
            const double b = j["score_b"].get<double>(), c = j["score_c"].get<double>();
            if (!std::isfinite(b) || !std::isfinite(c))
                throw ParseError("non-finite score for id \"" + id + "\"", line_no);
            if (!scores.emplace(id, std::make_pair(b, c)).second)
                throw ParseError("duplicate id \"" + id + "\"", line_no);
        }
        return ExternalFileScorer(std::move(name), std::move(scores), std::move(type), aspect);
    }

    static ExternalFileScorer load(std::string name, const std::string &path, std::string type = "external",
                                   std::optional<Aspect> aspect = std::nullopt) {
        try {
            return parse(std::move(name), read_file(path), std::move(type), aspect);
        } catch (const ParseError &e) {
            throw ParseError(path + ": " + e.what(), 0);
        }
    }

    std::string name() const override { return name_; }
    ScorerKind kind() const override { return ScorerKind::external_file; }
    std::string type() const override { return type_; }
    bool applies_to(Aspect a) const override { return !aspect_ || *aspect_ == a; }

    void prepare(const Corpus &corpus, Aspect) override {
        std::vector<std::string> missing;
        for (const auto &q : corpus.records)
            if (!scores_.count(q.id))
                missing.push_back(q.id);
        if (missing.empty())
            return;
        std::string list;
        for (const auto &id : missing)
            list += (list.empty() ? "" : ", ") + id;
        throw DataError("score file \"" + name_ + "\" lacks " + std::to_string(missing.size()) +
                        " id(s): " + list);
    }

    std::pair<double, double> score_record(const Quadruplet &q, Aspect) override {
        auto it = scores_.find(q.id);
        if (it == scores_.end())
            throw DataError("score file \"" + name_ + "\" lacks id: " + q.id);
        return it->second;
    }

  private:
    std::string name_;
    std::string type_;
    std::optional<Aspect> aspect_;
    std::unordered_map<std::string, std::pair<double, double>> scores_;
};

struct CorpusScores {
    std::vector<double> b;
    std::vector<double> c;
};

inline CorpusScores score_corpus(Scorer &scorer, const Corpus &corpus, Aspect aspect) {
    if (!scorer.applies_to(aspect))
        throw InputError("scorer \"" + scorer.name() + "\" does not apply to aspect " +
                         std::string(aspect_name(aspect)));
    scorer.prepare(corpus, aspect);
    CorpusScores out;
    out.b.reserve(corpus.size());
    out.c.reserve(corpus.size());
    for (const auto &q : corpus.records) {
        const auto [b, c] = scorer.score_record(q, aspect);
        out.b.push_back(b);
        out.c.push_back(c);
    }
    return out;
}

enum class CorrelationMode { discrete, raw_diff };

inline constexpr std::string_view mode_name(CorrelationMode m) {
    return m == CorrelationMode::discrete ? "discrete" : "raw_diff";
}

inline std::optional<CorrelationMode> parse_mode(std::string_view s) {
    if (s == "discrete")
        return CorrelationMode::discrete;
    if (s == "raw_diff")
        return CorrelationMode::raw_diff;
    return std::nullopt;
}

struct EvalResult {
    std::string metric;
    std::string type;
    Aspect aspect = Aspect::quality;
    stats::EvalScores scores;
    CorrelationMode mode = CorrelationMode::discrete;
    std::size_t n = 0;
};

/// Correlations and classification scores of `s` against gold labels.
/// discrete: tau/rho between predicted and gold labels. raw_diff: tau/rho
/// between s_B - s_C and gold labels. Accuracy and F1 always use predictions.
inline stats::EvalScores eval_scores(const CorpusScores &s, const stats::LabelVector &gold, CorrelationMode mode,
                                     double epsilon) {
    const auto pred = stats::three_way_labels(s.b, s.c, epsilon);
    const auto y = stats::as_numbers(gold);
    std::vector<double> x;
    if (mode == CorrelationMode::discrete) {
        x = stats::as_numbers(pred);
    } else {
        x.resize(s.b.size());
        for (std::size_t i = 0; i < x.size(); ++i)
            x[i] = s.b[i] - s.c[i];
    }
    stats::EvalScores out;
    out.tau = stats::kendall_tau_b(x, y);
    out.rho = stats::spearman_rho(x, y);
    out.accuracy = stats::accuracy(pred, gold);
    out.macro_f1 = stats::macro_f1(pred, gold);
    return out;
}

inline stats::LabelVector gold_labels(const Corpus &corpus, Aspect aspect) {
    stats::LabelVector gold;
    gold.reserve(corpus.size());
    for (const auto &q : corpus.records)
        gold.push_back(q.labels[aspect]);
    return gold;
}

inline EvalResult evaluate_metric(Scorer &scorer, const Corpus &corpus, Aspect aspect,
                                  CorrelationMode mode = CorrelationMode::discrete, double epsilon = 1e-4) {
    if (corpus.size() < 2)
        throw InputError("evaluation needs at least two records");
    const auto s = score_corpus(scorer, corpus, aspect);
    EvalResult r;
    r.metric = scorer.name();
    r.type = scorer.type();
    r.aspect = aspect;
    r.mode = mode;
    r.n = corpus.size();
    r.scores = eval_scores(s, gold_labels(corpus, aspect), mode, epsilon);
    return r;
}

// Four component ratings on a common scale (0-10 human, 0-100 judge).
struct AspectScores {
    double completeness = 0;
    double clarity = 0;
    double consistency = 0;
    double linkage = 0;

    bool operator==(const AspectScores &) const = default;
};

/// (4 completeness + 2 clarity + 2 consistency + 3 linkage) / 11.
inline double overall_quality(const AspectScores &s, double scale_max) {
    if (!(scale_max > 0) || !std::isfinite(scale_max))
        throw InputError("overall_quality: scale_max must be positive");
    const std::pair<const char *, double> parts[] = {{"completeness", s.completeness},
                                                     {"clarity", s.clarity},
                                                     {"consistency", s.consistency},
                                                     {"linkage", s.linkage}};
    for (const auto &[name, v] : parts)
        if (!(v >= 0 && v <= scale_max))
            throw InputError(std::string("overall_quality: ") + name + " outside [0, " +
                             std::to_string(scale_max) + "]");
    return (4 * s.completeness + 2 * s.clarity + 2 * s.consistency + 3 * s.linkage) / 11.0;
}

enum class ReportFormat { text, json };

namespace detail {

inline std::string fixed4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

inline std::string pad_right(const std::string &s, std::size_t w) {
    return s.size() >= w ? s : s + std::string(w - s.size(), ' ');
}

inline std::string pad_left(const std::string &s, std::size_t w) {
    return s.size() >= w ? s : std::string(w - s.size(), ' ') + s;
}

inline std::string center(const std::string &s, std::size_t w) {
    if (s.size() >= w)
        return s;
    const std::size_t left = (w - s.size()) / 2;
    return std::string(left, ' ') + s + std::string(w - s.size() - left, ' ');
}

struct ReportRow {
    std::string type;
    std::string metric;
    CorrelationMode mode;
    std::size_t n = 0;
    std::map<Aspect, stats::EvalScores> cells;
};

inline std::vector<ReportRow> collect_rows(const std::vector<EvalResult> &results) {
    if (results.empty())
        throw InputError("render_report: no results");
    std::map<std::tuple<std::string, std::string, int>, ReportRow> rows;
    for (const auto &r : results) {
        auto &row = rows[{r.type, r.metric, static_cast<int>(r.mode)}];
        row.type = r.type;
        row.metric = r.metric;
        row.mode = r.mode;
        row.n = std::max(row.n, r.n);
        if (!row.cells.emplace(r.aspect, r.scores).second)
            throw InputError("render_report: duplicate result for " + r.metric + " / " +
                             std::string(aspect_name(r.aspect)));
    }
    std::vector<ReportRow> out;
    for (auto &[_, row] : rows)
        out.push_back(std::move(row));
    return out;
}

using Getter = std::optional<double> (*)(const stats::EvalScores &);

inline std::optional<double> get_tau(const stats::EvalScores &s) { return s.tau; }
inline std::optional<double> get_rho(const stats::EvalScores &s) { return s.rho; }
inline std::optional<double> get_acc(const stats::EvalScores &s) { return s.accuracy; }
inline std::optional<double> get_f1(const stats::EvalScores &s) { return s.macro_f1; }

inline std::string render_section(const std::string &title, const std::vector<ReportRow> &rows,
                                  const std::vector<Aspect> &aspects, const std::pair<const char *, Getter> (&cols)[2]) {
    constexpr std::size_t kCell = 9;
    std::size_t wt = 4, wm = 6;
    for (const auto &r : rows) {
        wt = std::max(wt, r.type.size());
        wm = std::max(wm, r.metric.size());
    }
    // Column maxima; every cell equal to its column maximum is flagged.
    std::map<std::pair<Aspect, int>, double> best;
    for (const auto &r : rows)
        for (const auto &[a, s] : r.cells)
            for (int k = 0; k < 2; ++k)
                if (auto v = cols[k].second(s)) {
                    auto [it, fresh] = best.emplace(std::make_pair(a, k), *v);
                    if (!fresh)
                        it->second = std::max(it->second, *v);
                }

    std::ostringstream out;
    out << title << '\n';
    const std::string lead = pad_right("type", wt) + "  " + pad_right("metric", wm) + "  " + pad_right("mode", 8);
    auto emit = [&](std::string line) {
        while (!line.empty() && line.back() == ' ')
            line.pop_back();
        out << line << '\n';
    };
    std::string head = lead, sub(lead.size(), ' ');
    for (Aspect a : aspects) {
        head += "  " + center(std::string(aspect_name(a)), 2 * kCell + 1);
        sub += "  " + pad_left(cols[0].first, kCell) + ' ' + pad_left(cols[1].first, kCell);
    }
    emit(head);
    emit(sub);
    for (const auto &r : rows) {
        std::string line = pad_right(r.type, wt) + "  " + pad_right(r.metric, wm) + "  " +
                           pad_right(std::string(mode_name(r.mode)), 8);
        for (Aspect a : aspects) {
            auto it = r.cells.find(a);
            for (int k = 0; k < 2; ++k) {
                std::string cell = "";
                if (it != r.cells.end()) {
                    const auto v = cols[k].second(it->second);
                    cell = v ? fixed4(*v) + (*v == best.at({a, k}) ? "*" : " ") : "n/a ";
                }
                line += (k == 0 ? "  " : " ") + pad_left(cell, kCell);
            }
        }
        emit(line);
    }
    return out.str();
}

} // namespace detail

/// Text: two aligned tables (tau/rho and accuracy/macro-F1 per aspect), rows
/// ordered by type then metric name, the best value of each column marked
/// with '*', undefined correlations shown as n/a. JSON: one object per result.
inline std::string render_report(const std::vector<EvalResult> &results, ReportFormat format) {
    const auto rows = detail::collect_rows(results);
    if (format == ReportFormat::json) {
        auto arr = nlohmann::ordered_json::array();
        for (const auto &r : rows)
            for (const auto &[a, s] : r.cells) {
                nlohmann::ordered_json j;
                j["metric"] = r.metric;
                j["type"] = r.type;
                j["aspect"] = aspect_name(a);
                j["tau"] = s.tau ? nlohmann::ordered_json(*s.tau) : nlohmann::ordered_json(nullptr);
                j["rho"] = s.rho ? nlohmann::ordered_json(*s.rho) : nlohmann::ordered_json(nullptr);
                j["accuracy"] = s.accuracy;
                j["macro_f1"] = s.macro_f1;
                j["mode"] = mode_name(r.mode);
                j["n"] = r.n;
                arr.push_back(std::move(j));
            }
        nlohmann::ordered_json doc;
        doc["results"] = std::move(arr);
        return doc.dump(2) + "\n";
    }
    std::set<Aspect> present;
    for (const auto &r : rows)
        for (const auto &[a, _] : r.cells)
            present.insert(a);
    const std::vector<Aspect> aspects(present.begin(), present.end());
    static const std::pair<const char *, detail::Getter> corr[2] = {{"tau", detail::get_tau},
                                                                    {"rho", detail::get_rho}};
    static const std::pair<const char *, detail::Getter> cls[2] = {{"acc", detail::get_acc},
                                                                   {"f1", detail::get_f1}};
    return detail::render_section("Correlation with human labels", rows, aspects, corr) + "\n" +
           detail::render_section("Three-way classification", rows, aspects, cls);
}

} // namespace claimeval
