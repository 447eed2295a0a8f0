#include "expmem/http.hpp"

#include <thread>

#include <httplib.h>

#include "expmem/errors.hpp"

namespace expmem {

HttpResponse HttplibTransport::post(const std::string& path, const std::string& body,
                                    const HttpHeaders& headers,
                                    std::chrono::seconds timeout) {
    httplib::Client client(base_url_);
    client.set_connection_timeout(timeout.count(), 0);
    client.set_read_timeout(timeout.count(), 0);
    client.set_write_timeout(timeout.count(), 0);

    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);

    auto res = client.Post(path, h, body, "application/json");
    if (!res) return {0, httplib::to_string(res.error())};
    return {res->status, res->body};
}

HttpResponse FakeTransport::post(const std::string& path, const std::string& body,
                                 const HttpHeaders&, std::chrono::seconds) {
    calls_.push_back({path, body});
    if (queue_.empty()) return {0, "fake transport: no scripted response"};
    HttpResponse r = std::move(queue_.front());
    queue_.erase(queue_.begin());
    return r;
}

HttpResponse post_with_retry(HttpTransport& transport, const std::string& path,
                             const std::string& body, const HttpHeaders& headers,
                             const RetryPolicy& policy) {
    HttpResponse last;
    auto delay = policy.initial_delay;
    for (int attempt = 1; attempt <= policy.max_attempts; ++attempt) {
        last = transport.post(path, body, headers, policy.timeout);
        if (last.status >= 200 && last.status < 300) return last;
        const bool retryable = last.status <= 0 || last.status == 429 || last.status >= 500;
        if (!retryable) {
            throw BackendError("backend returned status " + std::to_string(last.status) +
                                   ": " + last.body.substr(0, 200),
                               last.status, attempt);
        }
        if (attempt < policy.max_attempts) {
            std::this_thread::sleep_for(delay);
            delay = std::chrono::milliseconds(
                long(double(delay.count()) * policy.backoff_factor));
        }
    }
    throw BackendError("backend unavailable after " +
                           std::to_string(policy.max_attempts) + " attempts (status " +
                           std::to_string(last.status) + "): " + last.body.substr(0, 200),
                       last.status, policy.max_attempts);
}

}  // namespace expmem
