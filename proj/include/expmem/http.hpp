#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace expmem {

struct HttpResponse {
    int status = 0;  // <= 0 means transport failure
    std::string body;
};

using HttpHeaders = std::vector<std::pair<std::string, std::string>>;

/// Minimal POST-only transport so backends can be tested with canned
/// responses instead of sockets.
class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    virtual HttpResponse post(const std::string& path, const std::string& body,
                              const HttpHeaders& headers,
                              std::chrono::seconds timeout) = 0;
};

/// Real transport over cpp-httplib. base_url is scheme://host[:port].
class HttplibTransport : public HttpTransport {
public:
    explicit HttplibTransport(std::string base_url) : base_url_(std::move(base_url)) {}
    HttpResponse post(const std::string& path, const std::string& body,
                      const HttpHeaders& headers, std::chrono::seconds timeout) override;

private:
    std::string base_url_;
};

/// Scripted transport for tests: pops responses in order and records calls.
class FakeTransport : public HttpTransport {
public:
    void enqueue(HttpResponse r) { queue_.push_back(std::move(r)); }
    HttpResponse post(const std::string& path, const std::string& body,
                      const HttpHeaders& headers, std::chrono::seconds timeout) override;

    struct Call {
        std::string path;
        std::string body;
    };
    const std::vector<Call>& calls() const { return calls_; }

private:
    std::vector<HttpResponse> queue_;
    std::vector<Call> calls_;
};

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds initial_delay{500};
    double backoff_factor = 2.0;
    std::chrono::seconds timeout{30};
};

/// POSTs with bounded retries on transport failures, 429 and 5xx. Throws
/// BackendError carrying the last status and a body excerpt once the budget
/// is spent. Other non-2xx statuses fail immediately.
HttpResponse post_with_retry(HttpTransport& transport, const std::string& path,
                             const std::string& body, const HttpHeaders& headers,
                             const RetryPolicy& policy);

}  // namespace expmem
