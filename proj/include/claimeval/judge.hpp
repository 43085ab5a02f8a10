#pragma once

#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "claimeval/corpus.hpp"
#include "claimeval/digest.hpp"
#include "claimeval/error.hpp"
#include "claimeval/harness.hpp"

namespace claimeval::judge {

// Evaluation prompt; the two <<Claims>> slots take the referenced and the
// draft claims in that order.
inline constexpr std::string_view kPromptTemplate = R"PROMPT(Instructions:
You will be given the draft claims and the referenced claims of the same patent. Your task is to rate the draft claims on four metrics using the referenced claims as the gold standard. Please make sure you read and understand these instructions carefully. Keep this document open while reviewing, and refer to it as needed.

Evaluation Criteria:
1. Completeness of Essential Features (0–100)
The extent to which the generated claims encapsulate all critical aspects of the invention.
    0–20: Most essential features are missing or poorly described.
    21–40: Some essential features are present but significant gaps remain.
    41–60: Majority of essential features are covered but with minor omissions.
    61–80: Almost all essential features are well described with very few gaps.
    81–100: All essential features are thoroughly and comprehensively covered.

2. Conceptual Clarity (0–100)
The clarity and unambiguity of the language used in the claims.
    0–20: Claims are very unclear and ambiguous.
    21–40: Claims have significant clarity issues, making them difficult to understand.
    41–60: Claims are mostly clear but contain some ambiguous language.
    61–80: Claims are clear with minimal ambiguity.
    81–100: Claims are exceptionally clear and completely unambiguous.

3. Consistency in Terminology (0–100)
The uniformity in the use of terms throughout the claims.
    0–20: Terminology is highly inconsistent.
    21–40: Significant inconsistencies in terminology.
    41–60: Some inconsistencies in terminology but mostly uniform.
    61–80: Terminology is largely consistent with minor inconsistencies.
    81–100: Terminology is completely consistent throughout.

4. Technical Correctness of Feature Linkages (0–100)
The accuracy with which the features are interconnected and related.
    0–20: Features are poorly linked with many inaccuracies.
    21–40: Significant issues with the linkages of features.
    41–60: Mostly accurate linkages with some incorrect connections.
    61–80: Accurate linkages with minor inaccuracies.
    81–100: Features are accurately and correctly linked throughout.

Evaluation Steps:
1. Read the referenced claims carefully and identify the invention's features. Assume the referenced claims have scores of 100 in all Evaluation Criteria.
2. Read the draft claims and compare them to the referenced claims.
3. Assign a score for each metric based on the Evaluation Criteria.

Example:
Referenced Claims: <<Claims>>
Draft Claims: <<Claims>>
Evaluation Form (scores ONLY):
- Completeness of Essential Features: X
- Conceptual Clarity: X
- Consistency in Terminology: X
- Technical Correctness of Feature Linkages: X)PROMPT";

inline constexpr std::string_view kSlot = "<<Claims>>";

// Criterion labels in form order.
inline constexpr std::string_view kCriteria[4] = {
    "Completeness of Essential Features", "Conceptual Clarity", "Consistency in Terminology",
    "Technical Correctness of Feature Linkages"};

inline std::string build_prompt(std::string_view reference, std::string_view candidate) {
    if (reference.empty() || candidate.empty())
        throw InputError("build_prompt: claim texts must be non-empty");
    const std::string_view tpl = kPromptTemplate;
    const std::size_t first = tpl.find(kSlot);
    const std::size_t second = tpl.find(kSlot, first + kSlot.size());
    std::string out;
    out.reserve(tpl.size() + reference.size() + candidate.size());
    out.append(tpl.substr(0, first));
    out.append(reference);
    out.append(tpl.substr(first + kSlot.size(), second - first - kSlot.size()));
    out.append(candidate);
    out.append(tpl.substr(second + kSlot.size()));
    return out;
}

// A reply that does not contain a usable evaluation form.
class ResponseError : public DataError {
  public:
    ResponseError(const std::string &what, std::string criterion, std::string raw)
        : DataError(what), criterion_(std::move(criterion)), raw_(std::move(raw)) {}
    const std::string &criterion() const noexcept { return criterion_; }
    const std::string &raw_text() const noexcept { return raw_; }

  private:
    std::string criterion_;
    std::string raw_;
};

namespace detail {

inline std::string lower(std::string_view s) {
    std::string out(s);
    for (auto &c : out)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

inline bool decoration(char c) { return c == ' ' || c == '\t' || c == '*' || c == '_' || c == '`'; }

// The value after "<label>:" at `pos`, or nullopt when this occurrence of the
// label is not followed by a colon (e.g. a heading echoed from the prompt).
inline std::optional<std::string> value_after(const std::string &text, std::size_t pos) {
    while (pos < text.size() && decoration(text[pos]))
        ++pos;
    if (pos >= text.size() || (text[pos] != ':' && text[pos] != '='))
        return std::nullopt;
    ++pos;
    while (pos < text.size() && decoration(text[pos]))
        ++pos;
    std::size_t end = pos;
    while (end < text.size() && (std::isdigit(static_cast<unsigned char>(text[end])) || text[end] == '.' ||
                                 text[end] == '-' || text[end] == '+'))
        ++end;
    return text.substr(pos, end - pos);
}

} // namespace detail

/// Reads the four labelled scores. Matching is case-insensitive and ignores
/// markdown emphasis; the last labelled occurrence of each criterion wins.
inline AspectScores parse_judge_response(const std::string &text) {
    const std::string low = detail::lower(text);
    double values[4] = {};
    for (int k = 0; k < 4; ++k) {
        const std::string label(kCriteria[k]);
        const std::string needle = detail::lower(label);
        std::optional<std::string> found;
        for (std::size_t pos = low.find(needle); pos != std::string::npos; pos = low.find(needle, pos + 1))
            if (auto v = detail::value_after(text, pos + needle.size()); v && (!found || !v->empty()))
                found = v;
        if (!found)
            throw ResponseError("judge reply lacks a score for \"" + label + "\"", label, text);
        const std::string &v = *found;
        if (v.empty())
            throw ResponseError("judge reply has no number for \"" + label + "\"", label, text);
        std::size_t used = 0;
        long long n = 0;
        try {
            n = std::stoll(v, &used);
        } catch (const std::exception &) {
            used = 0;
        }
        if (used == 0 || used != v.size())
            throw ResponseError("judge score for \"" + label + "\" is not an integer: " + v, label, text);
        if (n < 0 || n > 100)
            throw ResponseError("judge score for \"" + label + "\" outside [0, 100]: " + v, label, text);
        values[k] = static_cast<double>(n);
    }
    return {values[0], values[1], values[2], values[3]};
}

/// Evaluation form in the layout the prompt asks for.
inline std::string render_form(const AspectScores &s) {
    const double v[4] = {s.completeness, s.clarity, s.consistency, s.linkage};
    std::string out;
    for (int k = 0; k < 4; ++k) {
        out += "- ";
        out += kCriteria[k];
        out += ": " + std::to_string(std::llround(v[k])) + "\n";
    }
    return out;
}

struct JudgeConfig {
    std::string endpoint = "https://api.openai.com/v1/chat/completions";
    std::string model = "gpt-4";
    double temperature = 0.0;
    double timeout_seconds = 60;
    int max_retries = 3;
    int max_in_flight = 4;
    double backoff_seconds = 1.0; // first retry delay, doubled on each further retry
    std::string cache_dir;        // empty disables the on-disk cache
    std::string api_key_env = "CLAIMEVAL_API_KEY";

    void validate() const {
        if (!(temperature >= 0))
            throw InputError("judge: temperature must be >= 0");
        if (max_retries < 0)
            throw InputError("judge: max_retries must be >= 0");
        if (max_in_flight < 1)
            throw InputError("judge: max_in_flight must be >= 1");
        if (!(timeout_seconds > 0) || !(backoff_seconds >= 0))
            throw InputError("judge: timeout must be positive and backoff non-negative");
    }
};

inline void to_json(nlohmann::json &j, const JudgeConfig &c) {
    j = nlohmann::json{{"endpoint", c.endpoint},       {"model", c.model},
                       {"temperature", c.temperature}, {"timeout_seconds", c.timeout_seconds},
                       {"max_retries", c.max_retries}, {"max_in_flight", c.max_in_flight},
                       {"backoff_seconds", c.backoff_seconds}, {"cache_dir", c.cache_dir},
                       {"api_key_env", c.api_key_env}};
}

inline void from_json(const nlohmann::json &j, JudgeConfig &c) {
    c.endpoint = j.value("endpoint", c.endpoint);
    c.model = j.value("model", c.model);
    c.temperature = j.value("temperature", c.temperature);
    c.timeout_seconds = j.value("timeout_seconds", c.timeout_seconds);
    c.max_retries = j.value("max_retries", c.max_retries);
    c.max_in_flight = j.value("max_in_flight", c.max_in_flight);
    c.backoff_seconds = j.value("backoff_seconds", c.backoff_seconds);
    c.cache_dir = j.value("cache_dir", c.cache_dir);
    c.api_key_env = j.value("api_key_env", c.api_key_env);
}

struct JudgeVerdict {
    AspectScores scores; // 0-100
    std::string raw;
    bool cache_hit = false;

    double overall() const { return overall_quality(scores, 100.0); }

    double aspect(Aspect a) const {
        switch (a) {
        case Aspect::completeness: return scores.completeness;
        case Aspect::clarity: return scores.clarity;
        case Aspect::consistency: return scores.consistency;
        case Aspect::linkage: return scores.linkage;
        case Aspect::quality: return overall();
        }
        return 0;
    }
};

// Failure to get any reply. `retryable` is false for client errors such as
// a rejected key, which no retry can fix.
class RequestError : public TransportError {
  public:
    RequestError(const std::string &what, bool retryable) : TransportError(what), retryable_(retryable) {}
    bool retryable() const noexcept { return retryable_; }

  private:
    bool retryable_;
};

// Sends one chat-completion request body and returns the response body.
class Transport {
  public:
    virtual ~Transport() = default;
    virtual std::string post(const std::string &body) = 0;
};

inline std::string request_body(const JudgeConfig &config, const std::string &prompt) {
    nlohmann::ordered_json j;
    j["model"] = config.model;
    j["temperature"] = config.temperature;
    j["messages"] = nlohmann::ordered_json::array({{{"role", "user"}, {"content", prompt}}});
    return j.dump();
}

/// choices[0].message.content of an OpenAI-style reply.
inline std::string reply_content(const std::string &body) {
    try {
        const auto j = nlohmann::json::parse(body);
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception &e) {
        throw ResponseError(std::string("unexpected judge reply shape: ") + e.what(), "", body);
    }
}

inline std::string cache_key(const std::string &prompt, const JudgeConfig &config) {
    return sha256_hex(nlohmann::json{{"prompt", prompt}, {"model", config.model}, {"temperature", config.temperature}}
                          .dump());
}

class Semaphore {
  public:
    explicit Semaphore(int count) : count_(count) {}
    void acquire() {
        std::unique_lock lock(m_);
        cv_.wait(lock, [&] { return count_ > 0; });
        --count_;
    }
    void release() {
        {
            std::lock_guard lock(m_);
            ++count_;
        }
        cv_.notify_one();
    }

  private:
    std::mutex m_;
    std::condition_variable cv_;
    int count_;
};

class JudgeClient {
  public:
    using Sleeper = std::function<void(double seconds)>;

    JudgeClient(JudgeConfig config, std::shared_ptr<Transport> transport, Sleeper sleep = {})
        : config_(std::move(config)), transport_(std::move(transport)), sleep_(std::move(sleep)),
          slots_(config_.max_in_flight) {
        config_.validate();
        if (!sleep_)
            sleep_ = [](double s) { std::this_thread::sleep_for(std::chrono::duration<double>(s)); };
        if (!config_.cache_dir.empty())
            std::filesystem::create_directories(config_.cache_dir);
    }

    const JudgeConfig &config() const noexcept { return config_; }
    long requests() const noexcept { return requests_.load(); }

    /// Cached verdict, or a fresh one fetched with retries. Safe to call
    /// from several threads; at most max_in_flight requests are outstanding.
    JudgeVerdict judge_pair(const std::string &reference, const std::string &candidate) {
        const std::string prompt = build_prompt(reference, candidate);
        const std::string key = cache_key(prompt, config_);
        if (auto hit = cache_read(key)) {
            JudgeVerdict v{parse_judge_response(*hit), *hit, true};
            return v;
        }
        const std::string raw = fetch(request_body(config_, prompt));
        JudgeVerdict v{parse_judge_response(raw), raw, false};
        cache_write(key, raw);
        return v;
    }

    /// Judges every pair with up to max_in_flight worker threads. Failures
    /// are reported per pair.
    std::vector<std::pair<std::optional<JudgeVerdict>, std::exception_ptr>>
    judge_all(const std::vector<std::pair<std::string, std::string>> &pairs) {
        std::vector<std::pair<std::optional<JudgeVerdict>, std::exception_ptr>> out(pairs.size());
        std::atomic<std::size_t> next{0};
        auto work = [&] {
            for (std::size_t i; (i = next++) < pairs.size();) {
                try {
                    out[i].first = judge_pair(pairs[i].first, pairs[i].second);
                } catch (...) {
                    out[i].second = std::current_exception();
                }
            }
        };
        const auto workers = std::min<std::size_t>(static_cast<std::size_t>(config_.max_in_flight), pairs.size());
        std::vector<std::thread> threads;
        for (std::size_t t = 1; t < workers; ++t)
            threads.emplace_back(work);
        work();
        for (auto &t : threads)
            t.join();
        return out;
    }

  private:
    std::string fetch(const std::string &body) {
        for (int attempt = 0;; ++attempt) {
            try {
                slots_.acquire();
                ++requests_;
                std::string reply;
                try {
                    reply = transport_->post(body);
                } catch (...) {
                    slots_.release();
                    throw;
                }
                slots_.release();
                return reply_content(reply);
            } catch (const RequestError &e) {
                if (!e.retryable() || attempt >= config_.max_retries)
                    throw TransportError("judge request failed after " + std::to_string(attempt + 1) +
                                         " attempt(s): " + e.what());
            } catch (const TransportError &e) {
                if (attempt >= config_.max_retries)
                    throw TransportError("judge request failed after " + std::to_string(attempt + 1) +
                                         " attempt(s): " + e.what());
            }
            sleep_(config_.backoff_seconds * std::ldexp(1.0, attempt));
        }
    }

    std::string cache_path(const std::string &key) const {
        return (std::filesystem::path(config_.cache_dir) / (key + ".json")).string();
    }

    std::optional<std::string> cache_read(const std::string &key) const {
        if (config_.cache_dir.empty())
            return std::nullopt;
        std::ifstream in(cache_path(key), std::ios::binary);
        if (!in)
            return std::nullopt;
        try {
            nlohmann::json j;
            in >> j;
            return j.at("response").get<std::string>();
        } catch (const nlohmann::json::exception &) {
            return std::nullopt; // unreadable entries are refetched
        }
    }

    void cache_write(const std::string &key, const std::string &raw) {
        if (config_.cache_dir.empty())
            return;
        nlohmann::ordered_json j;
        j["model"] = config_.model;
        j["temperature"] = config_.temperature;
        j["response"] = raw;
        // Write then rename so concurrent writers of one key never interleave.
        std::ostringstream tmp_name;
        tmp_name << cache_path(key) << ".tmp" << std::this_thread::get_id();
        {
            std::ofstream out(tmp_name.str(), std::ios::binary | std::ios::trunc);
            if (!out)
                throw IoError("cannot write judge cache entry " + tmp_name.str());
            out << j.dump() << '\n';
        }
        std::filesystem::rename(tmp_name.str(), cache_path(key));
    }

    JudgeConfig config_;
    std::shared_ptr<Transport> transport_;
    Sleeper sleep_;
    Semaphore slots_;
    std::atomic<long> requests_{0};
};

/// Judge verdicts as a harness scorer. The quality aspect is the weighted
/// overall of the four component scores.
class JudgeScorer : public Scorer {
  public:
    explicit JudgeScorer(std::shared_ptr<JudgeClient> client, std::string name = "g-eval",
                         std::optional<Aspect> aspect = std::nullopt)
        : client_(std::move(client)), name_(std::move(name)), aspect_(aspect) {}

    std::string name() const override { return name_; }
    ScorerKind kind() const override { return ScorerKind::judge; }
    bool applies_to(Aspect a) const override { return !aspect_ || *aspect_ == a; }

    void prepare(const Corpus &corpus, Aspect) override {
        std::vector<std::pair<std::string, std::string>> pairs;
        std::vector<std::string> ids;
        for (const auto &q : corpus.records) {
            if (verdicts_.count(q.id))
                continue;
            pairs.emplace_back(q.reference, q.candidate_b);
            pairs.emplace_back(q.reference, q.candidate_c);
            ids.push_back(q.id);
        }
        const auto results = client_->judge_all(pairs);
        for (std::size_t i = 0; i < ids.size(); ++i) {
            for (std::size_t k = 0; k < 2; ++k)
                if (const auto &err = results[2 * i + k].second) {
                    try {
                        std::rethrow_exception(err);
                    } catch (const Error &e) {
                        const std::string what = "record " + ids[i] + " candidate " + (k ? "C" : "B") + ": " + e.what();
                        if (dynamic_cast<const DataError *>(&e))
                            throw DataError(what);
                        throw TransportError(what);
                    }
                }
            verdicts_[ids[i]] = {*results[2 * i].first, *results[2 * i + 1].first};
        }
    }

    std::pair<double, double> score_record(const Quadruplet &q, Aspect aspect) override {
        auto it = verdicts_.find(q.id);
        if (it == verdicts_.end()) {
            Corpus one;
            one.records.push_back(q);
            prepare(one, aspect);
            it = verdicts_.find(q.id);
        }
        return {it->second.first.aspect(aspect), it->second.second.aspect(aspect)};
    }

  private:
    std::shared_ptr<JudgeClient> client_;
    std::string name_;
    std::optional<Aspect> aspect_;
    std::unordered_map<std::string, std::pair<JudgeVerdict, JudgeVerdict>> verdicts_;
};

} // namespace claimeval::judge
