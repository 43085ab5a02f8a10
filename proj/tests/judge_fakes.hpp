// In-process stand-ins for a chat-completion endpoint.
#pragma once

#include <atomic>
#include <chrono>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "claimeval/judge.hpp"

namespace claimeval::testkit {

inline std::string chat_reply(const std::string &content) {
    nlohmann::json j;
    j["choices"] = nlohmann::json::array({{{"index", 0}, {"message", {{"role", "assistant"}, {"content", content}}}}});
    return j.dump();
}

// Answers with reply(prompt); records bodies and the peak number of
// concurrent calls. Fails the first `failures` calls.
class FakeTransport : public judge::Transport {
  public:
    using Reply = std::function<std::string(const std::string &prompt)>;

    explicit FakeTransport(Reply reply, int failures = 0, bool retryable = true,
                           std::chrono::milliseconds delay = std::chrono::milliseconds(0))
        : reply_(std::move(reply)), failures_(failures), retryable_(retryable), delay_(delay) {}

    std::string post(const std::string &body) override {
        const int now = ++in_flight_;
        int peak = peak_.load();
        while (now > peak && !peak_.compare_exchange_weak(peak, now)) {
        }
        {
            std::lock_guard lock(m_);
            bodies_.push_back(body);
        }
        if (delay_.count())
            std::this_thread::sleep_for(delay_);
        --in_flight_;
        if (calls_++ < failures_)
            throw judge::RequestError("simulated outage", retryable_);
        const auto j = nlohmann::json::parse(body);
        return chat_reply(reply_(j.at("messages").at(0).at("content").get<std::string>()));
    }

    int calls() const { return calls_.load(); }
    int peak() const { return peak_.load(); }
    std::vector<std::string> bodies() const {
        std::lock_guard lock(m_);
        return bodies_;
    }

  private:
    Reply reply_;
    int failures_;
    bool retryable_;
    std::chrono::milliseconds delay_;
    std::atomic<int> calls_{0}, in_flight_{0}, peak_{0};
    mutable std::mutex m_;
    std::vector<std::string> bodies_;
};

inline FakeTransport::Reply canned(const AspectScores &s) {
    return [s](const std::string &) { return judge::render_form(s); };
}

} // namespace claimeval::testkit
