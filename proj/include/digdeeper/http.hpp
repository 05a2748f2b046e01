#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace digdeeper {

struct HttpResponse {
    int status = 0;
    std::string body;
};

using HttpHeaders = std::vector<std::pair<std::string, std::string>>;

/// Minimal POST-only transport. Connection failures and timeouts throw
/// Error(ErrorCode::Transient); HTTP status codes are returned, not thrown.
class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    virtual HttpResponse post(const std::string& url, const HttpHeaders& headers,
                              const std::string& body) = 0;
};

std::shared_ptr<HttpTransport> make_http_transport(std::chrono::milliseconds timeout);

struct ParsedUrl {
    std::string scheme;
    std::string host;
    int port = 0;
    std::string path;
};

ParsedUrl parse_url(const std::string& url);

/// Maps a non-2xx status onto the error taxonomy: 401/403 Auth, 408/429/5xx Transient,
/// anything else Backend. Returns normally on 2xx.
void raise_for_status(const HttpResponse& response, const std::string& what);

struct RetryPolicy {
    int max_attempts = 4;
    std::chrono::milliseconds initial_delay{500};
    double multiplier = 2.0;
    std::chrono::milliseconds max_delay{8000};
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

Sleeper thread_sleeper();

/// Delay before retry number i (1-based). Nondecreasing in i and capped at max_delay.
std::chrono::milliseconds backoff_delay(const RetryPolicy& policy, int retry);

/// Calls `attempt` until it returns without a Transient error or the policy's attempt cap
/// is reached. Non-transient errors propagate immediately. Returns the attempts used.
int run_with_retry(const RetryPolicy& policy, const Sleeper& sleep,
                   const std::function<void()>& attempt,
                   std::vector<std::chrono::milliseconds>* delays = nullptr);

/// Value of the named environment variable, or empty when unset or when the name is empty.
std::string read_env(const std::string& name);

}  // namespace digdeeper
