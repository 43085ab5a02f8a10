// HTTP(S) transport for the judge client. Needs the claimeval_http target.
#pragma once

#include <cstdlib>
#include <string>

#include <httplib.h>

#include "claimeval/judge.hpp"

namespace claimeval::judge {

class HttpTransport : public Transport {
  public:
    explicit HttpTransport(const JudgeConfig &config) : timeout_(config.timeout_seconds) {
        const auto &url = config.endpoint;
        const auto scheme_end = url.find("://");
        if (scheme_end == std::string::npos)
            throw InputError("judge endpoint must start with http:// or https://: " + url);
        const auto path_start = url.find('/', scheme_end + 3);
        origin_ = url.substr(0, path_start);
        path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
        if (const char *key = std::getenv(config.api_key_env.c_str()))
            api_key_ = key;
    }

    std::string post(const std::string &body) override {
        httplib::Client client(origin_);
        if (!client.is_valid())
            throw RequestError("unsupported judge endpoint " + origin_, false);
        const auto sec = static_cast<time_t>(timeout_);
        const auto usec = static_cast<time_t>((timeout_ - static_cast<double>(sec)) * 1e6);
        client.set_connection_timeout(sec, usec);
        client.set_read_timeout(sec, usec);
        client.set_write_timeout(sec, usec);
        if (!api_key_.empty())
            client.set_bearer_token_auth(api_key_);
        auto res = client.Post(path_, body, "application/json");
        if (!res)
            throw RequestError("judge endpoint unreachable: " + httplib::to_string(res.error()), true);
        if (res->status != 200) {
            const bool retryable = res->status == 429 || res->status >= 500;
            throw RequestError("judge endpoint returned HTTP " + std::to_string(res->status), retryable);
        }
        return res->body;
    }

  private:
    std::string origin_;
    std::string path_;
    std::string api_key_;
    double timeout_;
};

} // namespace claimeval::judge
