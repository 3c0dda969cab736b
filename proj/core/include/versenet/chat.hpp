#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "versenet/transport.hpp"

namespace versenet {

struct ChatEndpoint {
    std::string base_url;
    std::string model;
    std::string credential_env;  // env var holding the API key; empty = no auth header
    int max_retries = 3;
    double backoff_seconds = 0.5;
    double timeout_seconds = 30.0;
    double temperature = 1.0;
    double rate_limit_rps = 0.0;  // 0 disables the limiter
};

// Full request/response record kept for auditability; prompting runs persist
// these because they are not re-derivable from seeds.
struct TranscriptEntry {
    std::string request;
    int status = 0;
    std::string response;
    int attempts = 0;
};

class RateLimiter {
public:
    explicit RateLimiter(double requests_per_second);
    void acquire();

private:
    std::chrono::duration<double> interval_{0.0};
    std::chrono::steady_clock::time_point next_allowed_{};
    std::mutex mutex_;
};

// Offline stand-in for a chat-completion endpoint: replies deterministically
// from a hash of the request messages, optionally working through a scripted
// list of HTTP statuses first (for retry tests).
class MockChatTransport : public HttpTransport {
public:
    MockChatTransport() = default;
    explicit MockChatTransport(std::vector<int> scripted_statuses,
                               std::string fixed_content = "");

    HttpResponse post(const std::string& path, const std::string& body,
                      const HttpHeaders& headers) override;

    int calls() const { return calls_; }

private:
    std::vector<int> scripted_;
    std::string fixed_content_;
    int calls_ = 0;
    std::mutex mutex_;
};

// Chat-completion client: {model, messages:[{role,content}...], temperature}
// in, assistant text out, with exponential-backoff retries on transient
// failures (timeouts, 429, 5xx).
class ChatClient {
public:
    explicit ChatClient(ChatEndpoint endpoint, std::shared_ptr<HttpTransport> transport = nullptr);

    std::string call(const std::string& system_text, const std::string& user_text);

    const ChatEndpoint& endpoint() const { return endpoint_; }
    const std::vector<TranscriptEntry>& transcript() const { return transcript_; }
    void clear_transcript() { transcript_.clear(); }

private:
    ChatEndpoint endpoint_;
    std::shared_ptr<HttpTransport> transport_;
    RateLimiter limiter_;
    std::vector<TranscriptEntry> transcript_;
    std::mutex mutex_;
};

}  // namespace versenet
