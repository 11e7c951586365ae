#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "chainforge/backend.hpp"
#include "chainforge/rng.hpp"

namespace chainforge {

namespace {

struct Endpoint {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

std::optional<Endpoint> split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) return std::nullopt;
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return Endpoint{url, "/"};
    return Endpoint{url.substr(0, path_start), url.substr(path_start)};
}

nlohmann::json build_body(const ModelRequest& request, const BackendConfig& config) {
    nlohmann::json content;
    const auto prompt = render_prompt(request);
    if (request.media.empty()) {
        content = prompt;
    } else {
        content = nlohmann::json::array();
        content.push_back({{"type", "text"}, {"text", prompt}});
        for (const auto& m : request.media) {
            content.push_back({{"type", "image_url"}, {"image_url", {{"url", m}}}});
        }
    }
    return {
        {"model", config.model_name},
        {"temperature", effective_temperature(request.role, config)},
        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", content}}})},
    };
}

Result<ModelResponse, BackendError> parse_completion(const std::string& body) {
    auto malformed = [](std::string why) {
        return fail(BackendError{BackendErrorKind::MalformedResponse, std::move(why), 0});
    };
    const auto j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded()) return malformed("response body is not JSON");
    if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty()) {
        return malformed("response has no choices");
    }
    const auto& msg = j["choices"][0];
    if (!msg.contains("message") || !msg["message"].contains("content") || !msg["message"]["content"].is_string()) {
        return malformed("choices[0].message.content missing");
    }
    ModelResponse r;
    r.text = msg["message"]["content"].get<std::string>();
    if (j.contains("usage") && j["usage"].is_object()) {
        r.usage.prompt_units = j["usage"].value("prompt_tokens", std::uint64_t{0});
        r.usage.completion_units = j["usage"].value("completion_tokens", std::uint64_t{0});
    }
    return r;
}

}  // namespace

RemoteBackend::RemoteBackend(BackendConfig config, std::uint64_t jitter_seed)
    : config_(std::move(config)),
      gate_(config_.max_inflight),
      sleeper_([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }),
      jitter_state_(jitter_seed) {}

std::string RemoteBackend::describe() const { return "remote(" + config_.model_name + " @ " + config_.endpoint_url + ")"; }

std::chrono::milliseconds RemoteBackend::backoff_delay(std::uint32_t retry) {
    double jitter;
    {
        std::lock_guard lock(rng_mu_);
        jitter_state_ = mix_seed(jitter_state_);
        jitter = 0.5 + 0.5 * static_cast<double>(jitter_state_ >> 11) * 0x1.0p-53;
    }
    const double base = static_cast<double>(config_.backoff_initial_ms) * static_cast<double>(1ULL << std::min(retry, 20U));
    return std::chrono::milliseconds(static_cast<std::int64_t>(base * jitter));
}

InvokeResult RemoteBackend::invoke(const ModelRequest& request) {
    if (auto err = check_request(request)) return fail(*err);

    const auto endpoint = split_url(config_.endpoint_url);
    if (!endpoint) {
        return fail(BackendError{BackendErrorKind::InvalidRequest, "bad endpoint url: " + config_.endpoint_url, 0});
    }

    httplib::Headers headers;
    if (!config_.api_key_env_name.empty()) {
        const char* key = std::getenv(config_.api_key_env_name.c_str());
        if (key == nullptr || *key == '\0') {
            return fail(BackendError{BackendErrorKind::AuthFailure,
                                     "environment variable " + config_.api_key_env_name + " is not set", 0});
        }
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    const auto body = build_body(request, config_).dump();

    InflightGate::Lease lease(gate_);
    httplib::Client client(endpoint->origin);
    const auto timeout = std::chrono::milliseconds(config_.timeout_ms);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);

    const auto started = std::chrono::steady_clock::now();
    BackendError last{BackendErrorKind::TransportError, "no attempt made", 0};
    for (std::uint32_t attempt = 1; attempt <= config_.max_retries + 1; ++attempt) {
        if (attempt > 1) sleeper_(backoff_delay(attempt - 2));

        auto res = client.Post(endpoint->path, headers, body, "application/json");
        if (!res) {
            const auto err = res.error();
            if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read ||
                err == httplib::Error::Write) {
                last = {BackendErrorKind::Timeout, "request timed out (" + httplib::to_string(err) + ")", attempt};
                continue;
            }
            return fail(BackendError{BackendErrorKind::TransportError, httplib::to_string(err), attempt});
        }
        const int status = res->status;
        if (status == 200) {
            auto parsed = parse_completion(res->body);
            if (!parsed) {
                auto e = std::move(parsed).error();
                e.attempts = attempt;
                return fail(std::move(e));
            }
            auto out = std::move(parsed).value();
            out.attempts = attempt;
            out.latency_ms = static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                                            std::chrono::steady_clock::now() - started)
                                                            .count());
            return out;
        }
        if (status == 401 || status == 403) {
            return fail(BackendError{BackendErrorKind::AuthFailure, "HTTP " + std::to_string(status), attempt});
        }
        if (status == 429) {
            last = {BackendErrorKind::RateLimited, "HTTP 429", attempt};
            continue;
        }
        if (status >= 500) {
            last = {BackendErrorKind::TransportError, "HTTP " + std::to_string(status), attempt};
            continue;
        }
        return fail(BackendError{BackendErrorKind::TransportError, "HTTP " + std::to_string(status), attempt});
    }
    return fail(std::move(last));
}

}  // namespace chainforge
