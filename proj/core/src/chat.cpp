#ifdef VERSENET_WITH_TLS
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include "versenet/chat.hpp"

#include <cstdlib>
#include <thread>

#include <json.hpp>

#include "versenet/errors.hpp"
#include "versenet/hash.hpp"
#include "versenet/rng.hpp"

namespace versenet {

using nlohmann::json;

namespace {

// base_url = scheme://host[:port][/prefix]
struct ParsedUrl {
    std::string origin;  // scheme://host:port
    std::string prefix;  // path prefix, possibly empty
};

ParsedUrl parse_base_url(const std::string& base_url) {
    const auto scheme_end = base_url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("base URL needs a scheme: " + base_url);
    const auto path_start = base_url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {base_url, ""};
    std::string prefix = base_url.substr(path_start);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {base_url.substr(0, path_start), prefix};
}

class HttplibTransport : public HttpTransport {
public:
    HttplibTransport(const std::string& base_url, double timeout_seconds)
        : parsed_(parse_base_url(base_url)), client_(parsed_.origin) {
        const auto seconds = std::chrono::duration<double>(timeout_seconds);
        client_.set_connection_timeout(std::chrono::duration_cast<std::chrono::milliseconds>(seconds));
        client_.set_read_timeout(std::chrono::duration_cast<std::chrono::milliseconds>(seconds));
        client_.set_write_timeout(std::chrono::duration_cast<std::chrono::milliseconds>(seconds));
    }

    HttpResponse post(const std::string& path, const std::string& body,
                      const HttpHeaders& headers) override {
        httplib::Headers hdrs;
        std::string content_type = "application/json";
        for (const auto& [k, v] : headers) {
            if (k == "Content-Type") {
                content_type = v;
            } else {
                hdrs.emplace(k, v);
            }
        }
        auto res = client_.Post(parsed_.prefix + path, hdrs, body, content_type);
        if (!res) return {0, "", httplib::to_string(res.error())};
        return {res->status, res->body, ""};
    }

private:
    ParsedUrl parsed_;
    httplib::Client client_;
};

const char* kMockWords[] = {
    "river",  "shadow", "lantern", "sparrow", "winter",  "ember",   "garden", "silver",
    "thunder", "willow", "morning", "sorrow", "golden",  "whisper", "meadow", "starlight",
    "voyage", "quiet",  "autumn",  "mirror",  "feather", "harbor",  "velvet", "wander",
};
constexpr std::size_t kMockWordCount = sizeof(kMockWords) / sizeof(kMockWords[0]);

std::string mock_poem_from(const std::string& request_body) {
    SeededRng rng(fnv1a64(request_body));
    std::string poem = "1. ";
    for (int line = 0; line < 4; ++line) {
        const int words = 4 + static_cast<int>(rng.uniform_u64(3));
        for (int w = 0; w < words; ++w) {
            if (w > 0) poem += ' ';
            poem += kMockWords[rng.uniform_u64(kMockWordCount)];
        }
        if (line < 3) poem += '\n';
    }
    return poem;
}

}  // namespace

std::unique_ptr<HttpTransport> make_http_transport(const std::string& base_url,
                                                   double timeout_seconds) {
    return std::make_unique<HttplibTransport>(base_url, timeout_seconds);
}

RateLimiter::RateLimiter(double requests_per_second) {
    if (requests_per_second > 0.0) {
        interval_ = std::chrono::duration<double>(1.0 / requests_per_second);
    }
}

void RateLimiter::acquire() {
    if (interval_.count() <= 0.0) return;
    std::unique_lock<std::mutex> lock(mutex_);
    const auto now = std::chrono::steady_clock::now();
    if (now < next_allowed_) {
        const auto wait = next_allowed_ - now;
        next_allowed_ += std::chrono::duration_cast<std::chrono::steady_clock::duration>(interval_);
        lock.unlock();
        std::this_thread::sleep_for(wait);
        return;
    }
    next_allowed_ = now + std::chrono::duration_cast<std::chrono::steady_clock::duration>(interval_);
}

MockChatTransport::MockChatTransport(std::vector<int> scripted_statuses, std::string fixed_content)
    : scripted_(std::move(scripted_statuses)), fixed_content_(std::move(fixed_content)) {}

HttpResponse MockChatTransport::post(const std::string&, const std::string& body,
                                     const HttpHeaders&) {
    std::lock_guard<std::mutex> lock(mutex_);
    const int n = calls_++;
    if (n < static_cast<int>(scripted_.size()) && scripted_[static_cast<std::size_t>(n)] != 200) {
        return {scripted_[static_cast<std::size_t>(n)], "{\"error\":\"scripted failure\"}", ""};
    }
    const std::string content = fixed_content_.empty() ? mock_poem_from(body) : fixed_content_;
    json response{{"choices", json::array({json{{"message", json{{"role", "assistant"},
                                                                  {"content", content}}}}})}};
    return {200, response.dump(), ""};
}

ChatClient::ChatClient(ChatEndpoint endpoint, std::shared_ptr<HttpTransport> transport)
    : endpoint_(std::move(endpoint)), transport_(std::move(transport)),
      limiter_(endpoint_.rate_limit_rps) {
    if (!transport_) {
        transport_ = make_http_transport(endpoint_.base_url, endpoint_.timeout_seconds);
    }
}

std::string ChatClient::call(const std::string& system_text, const std::string& user_text) {
    std::string auth_header;
    if (!endpoint_.credential_env.empty()) {
        const char* key = std::getenv(endpoint_.credential_env.c_str());
        if (key == nullptr) {
            throw AuthError("environment variable " + endpoint_.credential_env + " is not set");
        }
        auth_header = std::string("Bearer ") + key;
    }

    json request{{"model", endpoint_.model},
                 {"messages", json::array({json{{"role", "system"}, {"content", system_text}},
                                           json{{"role", "user"}, {"content", user_text}}})},
                 {"temperature", endpoint_.temperature}};
    const std::string body = request.dump();

    HttpHeaders headers{{"Content-Type", "application/json"}};
    if (!auth_header.empty()) headers.emplace_back("Authorization", auth_header);

    HttpResponse resp;
    int attempts = 0;
    for (int attempt = 0; attempt <= endpoint_.max_retries; ++attempt) {
        if (attempt > 0) {
            const double delay = endpoint_.backoff_seconds * static_cast<double>(1 << (attempt - 1));
            std::this_thread::sleep_for(std::chrono::duration<double>(delay));
        }
        limiter_.acquire();
        ++attempts;
        resp = transport_->post("/v1/chat/completions", body, headers);
        if (resp.status == 200) break;
        const bool retryable = resp.status == 0 || resp.status == 429 || resp.status >= 500;
        if (!retryable) break;
    }

    {
        std::lock_guard<std::mutex> lock(mutex_);
        transcript_.push_back({body, resp.status, resp.body, attempts});
    }

    if (resp.status == 401 || resp.status == 403) {
        throw AuthError("chat endpoint rejected credentials (status " +
                        std::to_string(resp.status) + ")");
    }
    if (resp.status == 429) throw RateLimited("chat endpoint kept returning 429");
    if (resp.status != 200) {
        throw TransportError("chat request failed with status " + std::to_string(resp.status) +
                             (resp.error.empty() ? "" : " (" + resp.error + ")"));
    }

    json parsed = json::parse(resp.body, nullptr, false);
    if (parsed.is_discarded() || !parsed.contains("choices") || parsed["choices"].empty() ||
        !parsed["choices"][0].contains("message") ||
        !parsed["choices"][0]["message"].contains("content") ||
        !parsed["choices"][0]["message"]["content"].is_string()) {
        throw MalformedResponse("chat response missing choices[0].message.content");
    }
    return parsed["choices"][0]["message"]["content"].get<std::string>();
}

}  // namespace versenet
