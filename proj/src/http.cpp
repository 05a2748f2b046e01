#include <httplib.h>

#include "digdeeper/http.hpp"

#include "digdeeper/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>

namespace digdeeper {

ParsedUrl parse_url(const std::string& url) {
    ParsedUrl out;
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw Error(ErrorCode::Config, "url lacks scheme: " + url);
    out.scheme = url.substr(0, scheme_end);
    if (out.scheme != "http" && out.scheme != "https") {
        throw Error(ErrorCode::Config, "unsupported url scheme: " + out.scheme);
    }
    const auto rest = url.substr(scheme_end + 3);
    const auto slash = rest.find('/');
    std::string authority = rest.substr(0, slash);
    out.path = slash == std::string::npos ? "/" : rest.substr(slash);
    if (authority.empty()) throw Error(ErrorCode::Config, "url lacks host: " + url);
    const auto colon = authority.rfind(':');
    if (colon != std::string::npos && authority.find(']') == std::string::npos) {
        out.host = authority.substr(0, colon);
        try {
            out.port = std::stoi(authority.substr(colon + 1));
        } catch (const std::exception&) {
            throw Error(ErrorCode::Config, "bad port in url: " + url);
        }
    } else {
        out.host = authority;
        out.port = out.scheme == "https" ? 443 : 80;
    }
    return out;
}

namespace {

class HttplibTransport final : public HttpTransport {
public:
    explicit HttplibTransport(std::chrono::milliseconds timeout) : timeout_(timeout) {}

    HttpResponse post(const std::string& url, const HttpHeaders& headers,
                      const std::string& body) override {
        const ParsedUrl target = parse_url(url);
        httplib::Headers hdrs;
        for (const auto& [k, v] : headers) hdrs.emplace(k, v);
        const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
        const auto usec = std::chrono::duration_cast<std::chrono::microseconds>(timeout_ - seconds);

        auto send = [&](auto& client) {
            client.set_connection_timeout(seconds.count(), usec.count());
            client.set_read_timeout(seconds.count(), usec.count());
            client.set_write_timeout(seconds.count(), usec.count());
            auto result = client.Post(target.path, hdrs, body, "application/json");
            if (!result) {
                throw Error(ErrorCode::Transient,
                            "transport failure for " + url + ": " + httplib::to_string(result.error()));
            }
            return HttpResponse{result->status, result->body};
        };

        if (target.scheme == "https") {
#ifdef CPPHTTPLIB_OPENSSL_SUPPORT
            httplib::SSLClient client(target.host, target.port);
            return send(client);
#else
            throw Error(ErrorCode::Config, "https requested but built without OpenSSL: " + url);
#endif
        }
        httplib::Client client(target.host, target.port);
        return send(client);
    }

private:
    std::chrono::milliseconds timeout_;
};

}  // namespace

std::shared_ptr<HttpTransport> make_http_transport(std::chrono::milliseconds timeout) {
    return std::make_shared<HttplibTransport>(timeout);
}

void raise_for_status(const HttpResponse& response, const std::string& what) {
    const int s = response.status;
    if (s >= 200 && s < 300) return;
    const std::string detail = what + " returned HTTP " + std::to_string(s) + ": " +
                               response.body.substr(0, 200);
    if (s == 401 || s == 403) throw Error(ErrorCode::Auth, detail);
    if (s == 408 || s == 429 || s >= 500) throw Error(ErrorCode::Transient, detail);
    throw Error(ErrorCode::Backend, detail);
}

Sleeper thread_sleeper() {
    return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

std::chrono::milliseconds backoff_delay(const RetryPolicy& policy, int retry) {
    const double base = static_cast<double>(policy.initial_delay.count());
    const double factor = std::pow(std::max(1.0, policy.multiplier), std::max(0, retry - 1));
    const double capped = std::min(base * factor, static_cast<double>(policy.max_delay.count()));
    return std::chrono::milliseconds(static_cast<long long>(capped));
}

int run_with_retry(const RetryPolicy& policy, const Sleeper& sleep,
                   const std::function<void()>& attempt,
                   std::vector<std::chrono::milliseconds>* delays) {
    const int cap = std::max(1, policy.max_attempts);
    for (int n = 1;; ++n) {
        try {
            attempt();
            return n;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::Transient || n >= cap) throw;
        }
        const auto d = backoff_delay(policy, n);
        if (delays) delays->push_back(d);
        if (sleep) sleep(d);
    }
}

std::string read_env(const std::string& name) {
    if (name.empty()) return {};
    const char* v = std::getenv(name.c_str());
    return v ? std::string(v) : std::string();
}

}  // namespace digdeeper
