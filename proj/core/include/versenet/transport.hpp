#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace versenet {

struct HttpResponse {
    int status = 0;          // 0 means the request never completed (timeout, refused)
    std::string body;
    std::string error;
};

using HttpHeaders = std::vector<std::pair<std::string, std::string>>;

class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    virtual HttpResponse post(const std::string& path, const std::string& body,
                              const HttpHeaders& headers) = 0;
};

// Real transport for a base URL like "http://host:port[/prefix]".
std::unique_ptr<HttpTransport> make_http_transport(const std::string& base_url,
                                                   double timeout_seconds);

}  // namespace versenet
