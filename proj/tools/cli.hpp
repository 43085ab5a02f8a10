// Command-line front end. Every subcommand reads an optional JSON config
// (--config) and applies its flags on top; the resolved config is what runs.
#pragma once

#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "claimeval/corpus.hpp"
#include "claimeval/harness.hpp"
#include "claimeval/judge.hpp"
#include "claimeval/judge_http.hpp"
#include "claimeval/lexmetrics.hpp"
#include "claimeval/model_io.hpp"
#include "claimeval/text.hpp"
#include "claimeval/trainer.hpp"

namespace claimeval::cli {

using json = nlohmann::json;
namespace fs = std::filesystem;

inline json default_config() {
    const ScorerConfig s;
    const TrainConfig t;
    const judge::JudgeConfig j;
    json judge_cfg = j;
    judge_cfg["enabled"] = false;
    judge_cfg["name"] = "g-eval";
    return json{
        {"corpus", ""},
        {"output", ""},
        {"seed", 0},
        {"aspects", json::array({"quality"})},
        {"split", {{"test_fraction", 0.15}, {"val_fraction", 0.0}}},
        {"vocab", {{"min_freq", 1}, {"max_size", 0}}},
        {"scorer",
         {{"hidden", s.hidden},
          {"layers", s.layers},
          {"heads", s.heads},
          {"window", s.window},
          {"max_len", s.max_len},
          {"ffn", s.ffn},
          {"dropout", s.dropout}}},
        {"train",
         {{"batch_size", t.batch_size},
          {"learning_rate", t.learning_rate},
          {"weight_decay", t.weight_decay},
          {"epochs", t.epochs},
          {"val_fraction", t.val_fraction},
          {"patience", t.patience},
          {"margin", t.loss.margin},
          {"tolerance", t.loss.tolerance}}},
        {"metrics", json::array()},
        {"models", json::array()},
        {"model_name", "ours"},
        {"vocab_file", ""},
        {"external", json::array()},
        {"judge", judge_cfg},
        {"mode", "discrete"},
        {"epsilon", 1e-4},
        {"input", ""},
    };
}

namespace detail {

// Overlays `patch` onto `base`, recursing into objects.
inline void merge(json &base, const json &patch) {
    for (auto it = patch.begin(); it != patch.end(); ++it) {
        if (it.value().is_object() && base.contains(it.key()) && base[it.key()].is_object())
            merge(base[it.key()], it.value());
        else
            base[it.key()] = it.value();
    }
}

inline json load_json_file(const std::string &path) {
    try {
        return json::parse(read_file(path));
    } catch (const json::parse_error &e) {
        throw DataError(path + ": " + e.what());
    }
}

inline void ensure_dir(const std::string &dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw IoError("cannot create directory " + dir + ": " + ec.message());
}

inline std::string join(const std::string &dir, const std::string &file) { return (fs::path(dir) / file).string(); }

inline std::vector<Aspect> aspects_of(const json &cfg) {
    std::vector<Aspect> out;
    for (const auto &name : cfg.at("aspects")) {
        auto a = parse_aspect(name.get<std::string>());
        if (!a)
            throw InputError("unknown aspect \"" + name.get<std::string>() + "\"");
        out.push_back(*a);
    }
    if (out.empty())
        throw InputError("no aspects selected");
    return out;
}

inline ScorerConfig scorer_config(const json &cfg, std::size_t vocab_size) {
    json s = cfg.at("scorer");
    s["vocab_size"] = vocab_size;
    auto c = s.get<ScorerConfig>();
    c.validate();
    return c;
}

inline TrainConfig train_config(const json &cfg) {
    const auto &t = cfg.at("train");
    TrainConfig c;
    c.batch_size = t.at("batch_size").get<std::size_t>();
    c.learning_rate = t.at("learning_rate").get<double>();
    c.weight_decay = t.at("weight_decay").get<double>();
    c.epochs = t.at("epochs").get<std::size_t>();
    c.val_fraction = t.at("val_fraction").get<double>();
    c.patience = t.at("patience").get<std::size_t>();
    c.loss.margin = t.at("margin").get<double>();
    c.loss.tolerance = t.at("tolerance").get<double>();
    c.seed = cfg.at("seed").get<std::uint64_t>();
    c.validate();
    return c;
}

inline std::string require_path(const json &cfg, const char *key, const char *flag) {
    auto v = cfg.at(key).get<std::string>();
    if (v.empty())
        throw InputError(std::string("missing ") + flag);
    return v;
}

inline Corpus load_checked(const json &cfg, std::ostream &err) {
    Warnings warnings;
    auto corpus = load_corpus(require_path(cfg, "corpus", "--corpus"), &warnings);
    for (const auto &w : warnings)
        err << "warning: " << w << '\n';
    return corpus;
}

inline void write_config(const std::string &dir, const json &cfg) {
    write_text_file(join(dir, "config.json"), cfg.dump(2) + "\n");
}

inline std::string pct(std::size_t k, std::size_t n) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(1) << (n ? 100.0 * static_cast<double>(k) / static_cast<double>(n) : 0.0)
      << '%';
    return s.str();
}

} // namespace detail

// Collects flags that override config keys. Each flag writes its parsed value
// at a JSON pointer once the command line has been read.
class Overrides {
  public:
    template <typename T>
    CLI::Option *add(CLI::App *app, const std::string &flag, const std::string &pointer, const std::string &help) {
        auto value = std::make_shared<T>();
        auto *opt = app->add_option(flag, *value, help);
        items_.push_back({opt, [value, pointer](json &cfg) { cfg[json::json_pointer(pointer)] = *value; }});
        return opt;
    }

    CLI::Option *add_list(CLI::App *app, const std::string &flag, const std::string &pointer, const std::string &help) {
        return add<std::vector<std::string>>(app, flag, pointer, help)->delimiter(',');
    }

    CLI::Option *add_flag(CLI::App *app, const std::string &flag, const std::string &pointer, json value,
                          const std::string &help) {
        auto *opt = app->add_flag(flag, help);
        items_.push_back({opt, [value, pointer](json &cfg) { cfg[json::json_pointer(pointer)] = value; }});
        return opt;
    }

    void apply(json &cfg) const {
        for (const auto &it : items_)
            if (it.opt->count())
                it.set(cfg);
    }

  private:
    struct Item {
        CLI::Option *opt;
        std::function<void(json &)> set;
    };
    std::vector<Item> items_;
};

inline int cmd_validate(const json &cfg, std::ostream &out, std::ostream &err) {
    const auto corpus = detail::load_checked(cfg, err);
    out << "ok: " << corpus.size() << " records, sha256 " << corpus.provenance.digest << '\n';
    return 0;
}

inline int cmd_stats(const json &cfg, std::ostream &out, std::ostream &err) {
    const auto corpus = detail::load_checked(cfg, err);
    json doc;
    doc["records"] = corpus.size();
    std::map<std::string, std::size_t> sources;
    for (const auto &q : corpus.records)
        ++sources[std::string(source_name(q.source))];
    doc["sources"] = sources;

    std::ostringstream text;
    text << "records: " << corpus.size() << "\n\nsource";
    for (const auto &[s, k] : sources)
        text << "\n  " << std::left << std::setw(18) << s << std::right << std::setw(6) << k << "  "
             << detail::pct(k, corpus.size());
    text << "\n\n" << std::left << std::setw(14) << "aspect" << std::right << std::setw(14) << "B better"
         << std::setw(14) << "equal" << std::setw(14) << "C better" << '\n';
    for (Aspect a : kAllAspects) {
        const auto c = label_distribution(corpus, a);
        doc["labels"][std::string(aspect_name(a))] = {{"b_better", c.b_better}, {"equal", c.equal}, {"c_better", c.c_better}};
        auto cell = [&](std::size_t k) {
            return std::to_string(k) + " (" + detail::pct(k, c.total()) + ")";
        };
        text << std::left << std::setw(14) << aspect_name(a) << std::right << std::setw(14) << cell(c.b_better)
             << std::setw(14) << cell(c.equal) << std::setw(14) << cell(c.c_better) << '\n';
    }
    if (!corpus.empty()) {
        const auto l = length_stats(corpus);
        doc["tokens"] = {{"texts", l.count}, {"min", l.min},       {"max", l.max},
                         {"mean", l.mean},   {"median", l.median}, {"stddev", l.stddev}};
        text << std::fixed << std::setprecision(1) << "\ntokens per text (" << l.count << " texts): min " << l.min
             << ", max " << l.max << ", mean " << l.mean << ", median " << l.median << ", stddev " << l.stddev
             << '\n';
    }
    out << text.str();
    if (const auto dir = cfg.at("output").get<std::string>(); !dir.empty()) {
        detail::ensure_dir(dir);
        write_text_file(detail::join(dir, "stats.json"), doc.dump(2) + "\n");
        write_text_file(detail::join(dir, "stats.txt"), text.str());
    }
    return 0;
}

inline int cmd_split(const json &cfg, std::ostream &out, std::ostream &err) {
    const auto corpus = detail::load_checked(cfg, err);
    const auto dir = detail::require_path(cfg, "output", "--output");
    const auto split = split_corpus(corpus, cfg.at("split").at("test_fraction").get<double>(),
                                    cfg.at("split").at("val_fraction").get<double>(), cfg.at("seed").get<std::uint64_t>());
    detail::ensure_dir(dir);
    write_text_file(detail::join(dir, "train.jsonl"), serialize_corpus(split.train));
    write_text_file(detail::join(dir, "val.jsonl"), serialize_corpus(split.val));
    write_text_file(detail::join(dir, "test.jsonl"), serialize_corpus(split.test));
    detail::write_config(dir, cfg);
    out << "train " << split.train.size() << ", val " << split.val.size() << ", test " << split.test.size() << '\n';
    return 0;
}

inline int cmd_train(const json &cfg, std::ostream &out, std::ostream &err) {
    const auto corpus = detail::load_checked(cfg, err);
    const auto dir = detail::require_path(cfg, "output", "--output");
    const auto aspects = detail::aspects_of(cfg);
    const auto tc = detail::train_config(cfg);
    const auto vocab = build_vocab(corpus, cfg.at("vocab").at("min_freq").get<std::size_t>(),
                                   cfg.at("vocab").at("max_size").get<std::size_t>());
    const auto sc = detail::scorer_config(cfg, vocab.size());

    detail::ensure_dir(dir);
    detail::write_config(dir, cfg);
    save_vocab(detail::join(dir, "vocab.json"), vocab);
    std::string combined = "aspect,epoch,train_loss,val_loss,val_acc\n";
    for (Aspect a : aspects) {
        const auto result = train_aspect_model(corpus, a, sc, tc, vocab);
        const std::string name(aspect_name(a));
        save_model(detail::join(dir, "model_" + name + ".json"), {sc, vocab.digest(), name, result.params});
        const auto csv = result.history.to_csv();
        write_text_file(detail::join(dir, "history_" + name + ".csv"), csv);
        std::istringstream lines(csv);
        std::string line;
        std::getline(lines, line); // header
        while (std::getline(lines, line))
            combined += name + "," + line + "\n";
        const auto &h = result.history;
        out << name << ": " << h.epochs() << " epochs, best epoch " << h.best_epoch + 1 << ", val acc "
            << h.val_acc[h.best_epoch] << '\n';
    }
    write_text_file(detail::join(dir, "history.csv"), combined);
    return 0;
}

namespace detail {

inline std::shared_ptr<judge::JudgeClient> judge_client(const json &cfg) {
    auto jc = cfg.at("judge").get<judge::JudgeConfig>();
    jc.validate();
    return std::make_shared<judge::JudgeClient>(jc, std::make_shared<judge::HttpTransport>(jc));
}

// Every scorer the config selects, in config order.
inline std::vector<std::unique_ptr<Scorer>> build_scorers(const json &cfg) {
    std::vector<std::unique_ptr<Scorer>> out;
    for (const auto &m : cfg.at("metrics")) {
        auto metric = lex::parse_metric(m.get<std::string>());
        if (!metric)
            throw InputError("unknown metric \"" + m.get<std::string>() +
                             "\" (expected bleu1, bleu4, rouge1, rouge2, rougeL or meteor)");
        out.push_back(std::make_unique<LexicalScorer>(*metric));
    }
    if (!cfg.at("models").empty()) {
        const auto vocab = load_vocab(require_path(cfg, "vocab_file", "--vocab"));
        for (const auto &path : cfg.at("models"))
            out.push_back(std::make_unique<LearnedScorer>(cfg.at("model_name").get<std::string>(),
                                                          load_model(path.get<std::string>(), vocab), vocab));
    }
    for (const auto &spec : cfg.at("external")) {
        // name=path or name=path=type
        const auto s = spec.get<std::string>();
        const auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0)
            throw InputError("--external expects name=path[=type], got \"" + s + "\"");
        const auto rest = s.substr(eq + 1);
        const auto eq2 = rest.find('=');
        const auto path = rest.substr(0, eq2);
        const auto type = eq2 == std::string::npos ? std::string("external") : rest.substr(eq2 + 1);
        out.push_back(std::make_unique<ExternalFileScorer>(ExternalFileScorer::load(s.substr(0, eq), path, type)));
    }
    if (cfg.at("judge").at("enabled").get<bool>())
        out.push_back(std::make_unique<judge::JudgeScorer>(judge_client(cfg), cfg.at("judge").at("name").get<std::string>()));
    return out;
}

inline EvalResult result_from_json(const json &row) {
    EvalResult r;
    r.metric = row.at("metric").get<std::string>();
    r.type = row.at("type").get<std::string>();
    auto a = parse_aspect(row.at("aspect").get<std::string>());
    auto m = parse_mode(row.at("mode").get<std::string>());
    if (!a || !m)
        throw DataError("report row has an unknown aspect or mode");
    r.aspect = *a;
    r.mode = *m;
    if (!row.at("tau").is_null())
        r.scores.tau = row.at("tau").get<double>();
    if (!row.at("rho").is_null())
        r.scores.rho = row.at("rho").get<double>();
    r.scores.accuracy = row.at("accuracy").get<double>();
    r.scores.macro_f1 = row.at("macro_f1").get<double>();
    r.n = row.at("n").get<std::size_t>();
    return r;
}

} // namespace detail

inline int cmd_score(const json &cfg, std::ostream &out, std::ostream &err) {
    const auto corpus = detail::load_checked(cfg, err);
    const auto aspects = detail::aspects_of(cfg);
    auto scorers = detail::build_scorers(cfg);
    if (scorers.empty())
        throw InputError("score needs --metric, --model or --judge");
    const auto dir = cfg.at("output").get<std::string>();
    if (!dir.empty())
        detail::ensure_dir(dir);
    for (auto &s : scorers) {
        const Aspect a = s->applies_to(aspects.front()) ? aspects.front() : aspects.back();
        const auto scores = score_corpus(*s, corpus, a);
        std::ostringstream lines;
        lines.precision(17);
        for (std::size_t i = 0; i < corpus.size(); ++i) {
            nlohmann::ordered_json j;
            j["id"] = corpus.records[i].id;
            j["score_b"] = scores.b[i];
            j["score_c"] = scores.c[i];
            lines << j.dump() << '\n';
        }
        if (dir.empty())
            out << lines.str();
        else
            write_text_file(detail::join(dir, "scores_" + s->name() + ".jsonl"), lines.str());
    }
    return 0;
}

inline int cmd_judge(const json &cfg, std::ostream &out, std::ostream &err) {
    const auto corpus = detail::load_checked(cfg, err);
    auto client = detail::judge_client(cfg);
    std::vector<std::pair<std::string, std::string>> pairs;
    for (const auto &q : corpus.records) {
        pairs.emplace_back(q.reference, q.candidate_b);
        pairs.emplace_back(q.reference, q.candidate_c);
    }
    const auto verdicts = client->judge_all(pairs);
    std::ostringstream lines;
    std::size_t failed = 0;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        nlohmann::ordered_json j;
        j["id"] = corpus.records[i].id;
        for (std::size_t k = 0; k < 2; ++k) {
            const auto &[v, e] = verdicts[2 * i + k];
            const char *key = k ? "c" : "b";
            if (e) {
                ++failed;
                try {
                    std::rethrow_exception(e);
                } catch (const std::exception &ex) {
                    err << "error: record " << corpus.records[i].id << " candidate " << (k ? 'C' : 'B') << ": "
                        << ex.what() << '\n';
                    j[key] = {{"error", ex.what()}};
                }
                continue;
            }
            j[key] = {{"completeness", v->scores.completeness},
                      {"clarity", v->scores.clarity},
                      {"consistency", v->scores.consistency},
                      {"linkage", v->scores.linkage},
                      {"quality", v->overall()}};
        }
        lines << j.dump() << '\n';
    }
    if (const auto dir = cfg.at("output").get<std::string>(); !dir.empty()) {
        detail::ensure_dir(dir);
        detail::write_config(dir, cfg);
        write_text_file(detail::join(dir, "judge.jsonl"), lines.str());
    } else {
        out << lines.str();
    }
    if (failed)
        throw TransportError(std::to_string(failed) + " judge request(s) failed");
    return 0;
}

inline int cmd_evaluate(const json &cfg, std::ostream &out, std::ostream &err) {
    const auto corpus = detail::load_checked(cfg, err);
    const auto aspects = detail::aspects_of(cfg);
    const auto mode = parse_mode(cfg.at("mode").get<std::string>());
    if (!mode)
        throw InputError("--mode must be discrete or raw_diff");
    const double epsilon = cfg.at("epsilon").get<double>();
    if (!(epsilon >= 0))
        throw InputError("--epsilon must be >= 0");
    auto scorers = detail::build_scorers(cfg);
    if (scorers.empty())
        throw InputError("evaluate needs at least one of --metrics, --models, --external, --judge");

    std::vector<EvalResult> results;
    for (auto &s : scorers)
        for (Aspect a : aspects)
            if (s->applies_to(a))
                results.push_back(evaluate_metric(*s, corpus, a, *mode, epsilon));
    if (results.empty())
        throw InputError("no selected scorer applies to the selected aspects");
    const auto text = render_report(results, ReportFormat::text);
    if (const auto dir = cfg.at("output").get<std::string>(); !dir.empty()) {
        detail::ensure_dir(dir);
        detail::write_config(dir, cfg);
        write_text_file(detail::join(dir, "report.txt"), text);
        write_text_file(detail::join(dir, "report.json"), render_report(results, ReportFormat::json));
    }
    out << text;
    return 0;
}

inline int cmd_report(const json &cfg, std::ostream &out, std::ostream &) {
    const auto doc = detail::load_json_file(detail::require_path(cfg, "input", "--input"));
    std::vector<EvalResult> results;
    try {
        for (const auto &row : doc.at("results"))
            results.push_back(detail::result_from_json(row));
    } catch (const json::exception &e) {
        throw DataError(std::string("malformed report file: ") + e.what());
    }
    const auto text = render_report(results, ReportFormat::text);
    if (const auto dir = cfg.at("output").get<std::string>(); !dir.empty()) {
        detail::ensure_dir(dir);
        write_text_file(detail::join(dir, "report.txt"), text);
    }
    out << text;
    return 0;
}

inline int run_cli(int argc, const char *const *argv, std::ostream &out = std::cout, std::ostream &err = std::cerr) {
    CLI::App app{"Pairwise claim-quality evaluation toolkit", "claimeval"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");

    Overrides ov;
    std::map<CLI::App *, std::function<int(const json &, std::ostream &, std::ostream &)>> handlers;
    std::string config_path;

    auto sub = [&](const char *name, const char *help, auto handler) {
        auto *s = app.add_subcommand(name, help);
        s->add_option("--config", config_path, "JSON config file; flags override it")->check(CLI::ExistingFile);
        ov.add<std::string>(s, "--corpus", "/corpus", "Corpus JSONL file");
        handlers[s] = handler;
        return s;
    };
    auto outdir = [&](CLI::App *s) { ov.add<std::string>(s, "-o,--output", "/output", "Output directory"); };
    auto seed = [&](CLI::App *s) { ov.add<std::uint64_t>(s, "--seed", "/seed", "Random seed"); };
    auto scorer_sel = [&](CLI::App *s, const char *metric_flag) {
        ov.add_list(s, metric_flag, "/metrics", "Lexical metrics: bleu1,bleu4,rouge1,rouge2,rougeL,meteor");
        ov.add_list(s, "--models", "/models", "Trained model files (one per aspect)");
        ov.add<std::string>(s, "--vocab", "/vocab_file", "Vocabulary file of the trained models");
        ov.add<std::string>(s, "--model-name", "/model_name", "Report name for the trained models");
        ov.add_list(s, "--external", "/external", "Precomputed score files as name=path[=type]");
        ov.add_flag(s, "--judge", "/judge/enabled", true, "Include the LLM judge");
    };
    auto judge_flags = [&](CLI::App *s) {
        ov.add<std::string>(s, "--endpoint", "/judge/endpoint", "Chat-completion endpoint URL");
        ov.add<std::string>(s, "--judge-model", "/judge/model", "Judge model identifier");
        ov.add<double>(s, "--temperature", "/judge/temperature", "Judge sampling temperature");
        ov.add<std::string>(s, "--cache-dir", "/judge/cache_dir", "Judge response cache directory");
        ov.add<int>(s, "--max-in-flight", "/judge/max_in_flight", "Concurrent judge requests");
        ov.add<int>(s, "--max-retries", "/judge/max_retries", "Retries per judge request");
    };
    auto aspect_flags = [&](CLI::App *s) {
        auto *one = ov.add_list(s, "--aspect", "/aspects", "Aspect to use");
        auto *list = ov.add_list(s, "--aspects", "/aspects", "Comma-separated aspects");
        json all = json::array();
        for (Aspect a : kAllAspects)
            all.push_back(aspect_name(a));
        auto *every = ov.add_flag(s, "--all-aspects", "/aspects", all, "All five aspects");
        one->excludes(list)->excludes(every);
        list->excludes(every);
    };

    sub("validate", "Schema-check a corpus", cmd_validate);
    outdir(sub("stats", "Label distribution and length statistics", cmd_stats));
    {
        auto *s = sub("split", "Seeded train/val/test split", cmd_split);
        outdir(s);
        seed(s);
        ov.add<double>(s, "--test-fraction", "/split/test_fraction", "Test share");
        ov.add<double>(s, "--val-fraction", "/split/val_fraction", "Validation share");
    }
    {
        auto *s = sub("train", "Train aspect models", cmd_train);
        outdir(s);
        seed(s);
        aspect_flags(s);
        ov.add<std::size_t>(s, "--epochs", "/train/epochs", "Training epochs");
        ov.add<std::size_t>(s, "--batch-size", "/train/batch_size", "Pairs per batch");
        ov.add<double>(s, "--lr", "/train/learning_rate", "Learning rate");
        ov.add<double>(s, "--weight-decay", "/train/weight_decay", "Decoupled weight decay");
        ov.add<double>(s, "--val-fraction", "/train/val_fraction", "Hold-out share for model selection");
        ov.add<std::size_t>(s, "--patience", "/train/patience", "Early-stopping patience (0 = off)");
        ov.add<double>(s, "--margin", "/train/margin", "Ranking margin m");
        ov.add<double>(s, "--tolerance", "/train/tolerance", "Equal-pair tolerance n");
        ov.add<std::size_t>(s, "--hidden", "/scorer/hidden", "Hidden size");
        ov.add<std::size_t>(s, "--layers", "/scorer/layers", "Encoder layers");
        ov.add<std::size_t>(s, "--heads", "/scorer/heads", "Attention heads");
        ov.add<std::size_t>(s, "--window", "/scorer/window", "Attention window per side");
        ov.add<std::size_t>(s, "--max-len", "/scorer/max_len", "Maximum sequence length");
        ov.add<std::size_t>(s, "--ffn", "/scorer/ffn", "Feed-forward width");
        ov.add<double>(s, "--dropout", "/scorer/dropout", "Dropout rate");
        ov.add<std::size_t>(s, "--min-freq", "/vocab/min_freq", "Minimum token frequency");
        ov.add<std::size_t>(s, "--max-vocab", "/vocab/max_size", "Vocabulary cap (0 = none)");
    }
    {
        auto *s = sub("score", "Score every record with one scorer", cmd_score);
        outdir(s);
        scorer_sel(s, "--metric");
        judge_flags(s);
        aspect_flags(s);
    }
    {
        auto *s = sub("judge", "Collect judge verdicts for a corpus", cmd_judge);
        outdir(s);
        judge_flags(s);
    }
    {
        auto *s = sub("evaluate", "Correlate scorers with human labels", cmd_evaluate);
        outdir(s);
        scorer_sel(s, "--metrics");
        judge_flags(s);
        aspect_flags(s);
        ov.add<std::string>(s, "--mode", "/mode", "discrete or raw_diff")->check(CLI::IsMember({"discrete", "raw_diff"}));
        ov.add<double>(s, "--epsilon", "/epsilon", "Equality threshold");
    }
    {
        auto *s = sub("report", "Render a saved report.json as a table", cmd_report);
        outdir(s);
        ov.add<std::string>(s, "-i,--input", "/input", "report.json to render");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp &e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError &e) {
        app.exit(e, out, err);
        return 1;
    }

    CLI::App *chosen = app.get_subcommands().front();
    try {
        json cfg = default_config();
        // evaluate covers every aspect unless told otherwise
        if (chosen->get_name() == "evaluate")
            cfg["aspects"] = json::array({"completeness", "clarity", "consistency", "linkage", "quality"});
        if (!config_path.empty())
            detail::merge(cfg, detail::load_json_file(config_path));
        ov.apply(cfg);
        return handlers.at(chosen)(cfg, out, err);
    } catch (const DataError &e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const InputError &e) {
        err << "usage error: " << e.what() << '\n';
        return 1;
    } catch (const json::exception &e) {
        err << "usage error: bad config value: " << e.what() << '\n';
        return 1;
    } catch (const std::exception &e) {
        err << "error: " << e.what() << '\n';
        return 3;
    }
}

inline int run_cli(const std::vector<std::string> &args, std::ostream &out = std::cout, std::ostream &err = std::cerr) {
    std::vector<const char *> argv{"claimeval"};
    for (const auto &a : args)
        argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

} // namespace claimeval::cli
