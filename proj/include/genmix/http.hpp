#pragma once

// JSON-over-HTTP transport shared by the edit and embed backends.

#include <algorithm>
#include <chrono>
#include <semaphore>
#include <string>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "genmix/errors.hpp"
#include "genmix/log.hpp"

namespace genmix {

struct RetryPolicy {
    int attempts = 3;
    std::chrono::milliseconds initial_backoff{1000};
};

struct HttpOptions {
    std::chrono::milliseconds timeout{120'000};
    RetryPolicy retry{};
    int max_in_flight = 4;
};

/// "http://host:port/prefix" split into the client base and a path prefix.
struct Endpoint {
    std::string base;
    std::string prefix;

    static Endpoint parse(std::string url) {
        if (url.rfind("https://", 0) == 0) throw DomainError("https endpoints are not supported: " + url);
        if (url.rfind("http://", 0) != 0) url = "http://" + url;
        const std::size_t slash = url.find('/', 7);
        Endpoint ep;
        ep.base = url.substr(0, slash);
        if (slash != std::string::npos) ep.prefix = url.substr(slash);
        while (!ep.prefix.empty() && ep.prefix.back() == '/') ep.prefix.pop_back();
        if (ep.base.size() <= 7) throw DomainError("endpoint has no host: " + url);
        return ep;
    }

    std::string url(const std::string& path) const { return base + prefix + path; }
};

inline bool is_retryable_status(int status) { return status == 408 || status == 429 || status >= 500; }

class JsonHttpClient {
public:
    JsonHttpClient(Endpoint endpoint, HttpOptions options)
        : endpoint_(std::move(endpoint)), options_(options), in_flight_(std::max(1, options.max_in_flight)) {}

    const Endpoint& endpoint() const noexcept { return endpoint_; }
    const HttpOptions& options() const noexcept { return options_; }

    bool healthy() const {
        auto client = make_client();
        auto res = client.Get(endpoint_.prefix + "/healthz");
        return res && res->status == 200;
    }

    /// POST with bounded retries and exponential backoff on transient failures.
    nlohmann::json post(const std::string& path, const nlohmann::json& body) {
        const std::string payload = body.dump();
        auto backoff = options_.retry.initial_backoff;
        const int attempts = std::max(1, options_.retry.attempts);
        for (int attempt = 1;; ++attempt) {
            try {
                return post_once(path, payload);
            } catch (const RetryableError& e) {
                if (attempt >= attempts)
                    throw BackendError(endpoint_.url(path) + ": giving up after " + std::to_string(attempts) +
                                           " attempts: " + e.what(),
                                       e.status());
                logger()->warn("{}: attempt {}/{} failed ({}), retrying in {} ms", endpoint_.url(path), attempt,
                               attempts, e.what(), backoff.count());
                std::this_thread::sleep_for(backoff);
                backoff *= 2;
            }
        }
    }

private:
    httplib::Client make_client() const {
        httplib::Client client(endpoint_.base);
        const auto secs = std::chrono::duration_cast<std::chrono::seconds>(options_.timeout);
        const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(options_.timeout - secs);
        client.set_connection_timeout(secs.count(), usecs.count());
        client.set_read_timeout(secs.count(), usecs.count());
        client.set_write_timeout(secs.count(), usecs.count());
        return client;
    }

    nlohmann::json post_once(const std::string& path, const std::string& payload) {
        std::counting_semaphore<>& slots = in_flight_;
        slots.acquire();
        struct Release {
            std::counting_semaphore<>& s;
            ~Release() { s.release(); }
        } release{slots};

        auto client = make_client();
        auto res = client.Post(endpoint_.prefix + path, payload, "application/json");
        if (!res) throw RetryableError("transport error: " + httplib::to_string(res.error()));
        if (res->status != 200) {
            std::string excerpt = res->body.substr(0, 200);
            std::string what = "HTTP " + std::to_string(res->status) + ": " + excerpt;
            if (is_retryable_status(res->status)) throw RetryableError(what, res->status);
            throw BackendError(endpoint_.url(path) + ": " + what, res->status);
        }
        try {
            auto json = nlohmann::json::parse(res->body);
            if (!json.is_object()) throw ProtocolError("response is not a JSON object");
            return json;
        } catch (const nlohmann::json::exception& e) {
            throw ProtocolError(endpoint_.url(path) + ": invalid JSON response: " + e.what());
        }
    }

    Endpoint endpoint_;
    HttpOptions options_;
    std::counting_semaphore<> in_flight_;
};

}  // namespace genmix
