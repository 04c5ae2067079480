#ifdef FACTSUM_HTTPS
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include "httplib.h"

#include <chrono>

#include "factsum/gateway.hpp"

namespace factsum {

namespace {

// Splits "scheme://host[:port]/prefix" into origin and path prefix.
std::pair<std::string, std::string> split_base_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw Error(ErrorKind::InputError, "base_url '" + url + "' needs an http:// or https:// scheme");
    const std::string scheme = url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https")
        throw Error(ErrorKind::InputError, "unsupported scheme '" + scheme + "' in base_url");
#ifndef FACTSUM_HTTPS
    if (scheme == "https") throw Error(ErrorKind::InputError, "built without TLS support; https base_url unavailable");
#endif
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, ""};
    std::string prefix = url.substr(path_start);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {url.substr(0, path_start), prefix};
}

} // namespace

HttpChatBackend::HttpChatBackend(HttpBackendConfig config) : config_(std::move(config)) {
    if (config_.model_name.empty()) throw Error(ErrorKind::InputError, "http backend needs a model_name");
    if (config_.timeout_ms <= 0) throw Error(ErrorKind::InputError, "timeout_ms must be > 0");
    std::tie(origin_, path_prefix_) = split_base_url(config_.base_url);
}

json HttpChatBackend::request_body(const CompletionRequest& request) const {
    return json{{"model", config_.model_name},
                {"messages",
                 json::array({json{{"role", "system"}, {"content", request.system_prompt}},
                              json{{"role", "user"}, {"content", request.user_prompt}}})},
                {"temperature", request.temperature},
                {"top_p", request.top_p},
                {"frequency_penalty", request.frequency_penalty},
                {"presence_penalty", request.presence_penalty},
                {"max_tokens", request.max_output_tokens}};
}

Completion HttpChatBackend::complete(const CompletionRequest& request) {
    httplib::Client client(origin_);
    const auto timeout = std::chrono::milliseconds(config_.timeout_ms);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);

    httplib::Headers headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

    const auto started = std::chrono::steady_clock::now();
    auto res = client.Post(path_prefix_ + "/chat/completions", headers, request_body(request).dump(),
                           "application/json");
    const auto elapsed =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started);

    if (!res) throw Error(ErrorKind::TransportError, "request to " + origin_ + " failed: " + httplib::to_string(res.error()));
    if (res->status == 429 || res->status >= 500)
        throw Error(ErrorKind::TransportError, "HTTP " + std::to_string(res->status) + " from " + origin_);
    if (res->status != 200)
        throw Error(ErrorKind::TransportError,
                    "HTTP " + std::to_string(res->status) + " from " + origin_ + ": " + res->body.substr(0, 200));

    const auto body = json::parse(res->body, nullptr, false);
    if (body.is_discarded() || !body.contains("choices") || !body["choices"].is_array() || body["choices"].empty())
        throw Error(ErrorKind::TransportError, "malformed completion response from " + origin_);
    const auto& message = body["choices"][0].value("message", json::object());
    if (!message.contains("content") || !message["content"].is_string())
        throw Error(ErrorKind::TransportError, "completion response carries no message content");

    Completion c;
    c.text = message["content"].get<std::string>();
    c.usage.stage_tag = request.stage_tag;
    c.usage.wall_time_ms = static_cast<std::uint64_t>(elapsed.count());
    if (body.contains("usage") && body["usage"].is_object()) {
        c.usage.input_tokens = body["usage"].value("prompt_tokens", std::size_t{0});
        c.usage.output_tokens = body["usage"].value("completion_tokens", std::size_t{0});
    }
    return c;
}

std::string HttpChatBackend::describe() const { return "http(" + config_.base_url + ", " + config_.model_name + ")"; }

} // namespace factsum
