#include "trialmatch/inference.hpp"

#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "trialmatch/error.hpp"
#include "trialmatch/prompt_resources.hpp"
#include "trialmatch/text.hpp"

namespace trialmatch {

Endpoint Endpoint::parse(std::string_view url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string_view::npos) throw Error(Errc::InvalidArgument, "URL without scheme: " + std::string(url));
    const auto scheme = url.substr(0, scheme_end);
    if (scheme != "http") throw Error(Errc::InvalidArgument, "only http:// endpoints are supported: " + std::string(url));
    const auto path_start = url.find('/', scheme_end + 3);
    Endpoint e;
    if (path_start == std::string_view::npos) {
        e.base = std::string(url);
    } else {
        e.base = std::string(url.substr(0, path_start));
        e.path = std::string(url.substr(path_start));
    }
    return e;
}

std::string post_json(const Endpoint& endpoint, const std::string& body, const RetryPolicy& policy) {
    std::string last_error = "no attempt made";
    bool last_timed_out = false;
    auto backoff = policy.initial_backoff;
    const int attempts = std::max(policy.retries, 0) + 1;
    for (int attempt = 0; attempt < attempts; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
        httplib::Client client(endpoint.base);
        const auto secs = std::chrono::duration_cast<std::chrono::seconds>(policy.timeout);
        const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(policy.timeout - secs);
        client.set_connection_timeout(secs.count(), usecs.count());
        client.set_read_timeout(secs.count(), usecs.count());
        client.set_write_timeout(secs.count(), usecs.count());
        const auto started = std::chrono::steady_clock::now();
        auto res = client.Post(endpoint.path, body, "application/json");
        const auto elapsed = std::chrono::steady_clock::now() - started;
        if (!res) {
            last_error = httplib::to_string(res.error());
            last_timed_out = res.error() == httplib::Error::ConnectionTimeout ||
                             (res.error() == httplib::Error::Read && elapsed >= policy.timeout);
            continue;
        }
        last_timed_out = false;
        if (res->status < 200 || res->status >= 300) {
            last_error = "HTTP status " + std::to_string(res->status);
            continue;
        }
        if (text::trim(res->body).empty()) {
            last_error = "empty response body";
            continue;
        }
        return res->body;
    }
    const auto message = endpoint.url() + ": " + last_error + " after " + std::to_string(attempts) + " attempt(s)";
    throw Error(last_timed_out ? Errc::Timeout : Errc::BackendUnavailable, message);
}

std::string render_request_body(const InferenceRequest& request) {
    nlohmann::ordered_json body;
    body["messages"] = nlohmann::ordered_json::array();
    for (const auto& m : request.messages) {
        body["messages"].push_back({{"role", m.role}, {"content", m.content}});
    }
    body["temperature"] = InferenceRequest::temperature;
    body["max_tokens"] = request.max_tokens;
    return body.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

Completion parse_completion_body(std::string_view body) {
    Completion out;
    const auto parsed = nlohmann::json::parse(body, nullptr, false);
    if (parsed.is_discarded() || !parsed.is_object()) {
        out.text = std::string(body);
        return out;
    }
    auto string_at = [](const nlohmann::json& j, const char* key) -> std::optional<std::string> {
        auto it = j.find(key);
        if (it != j.end() && it->is_string()) return it->get<std::string>();
        return std::nullopt;
    };
    std::optional<std::string> text;
    if (auto it = parsed.find("choices"); it != parsed.end() && it->is_array() && !it->empty()) {
        const auto& first = it->front();
        if (auto msg = first.find("message"); msg != first.end() && msg->is_object()) text = string_at(*msg, "content");
        if (!text) text = string_at(first, "text");
    }
    for (const char* key : {"text", "completion", "content", "response"}) {
        if (!text) text = string_at(parsed, key);
    }
    out.text = text ? *text : std::string(body);
    if (auto it = parsed.find("yes_probability"); it != parsed.end() && it->is_number()) {
        out.yes_probability = it->get<double>();
    }
    return out;
}

Completion HttpChatClient::complete(const InferenceRequest& request) const {
    return parse_completion_body(post_json(endpoint_, render_request_body(request), request.policy));
}

namespace prompts {

std::string_view relevance_judge() { return resources::relevance_judge; }
std::string_view eligibility_reasoning() { return resources::eligibility_reasoning; }
std::string_view query_expansion() { return resources::query_expansion; }

std::string render(std::string_view templ, const std::map<std::string, std::string>& values) {
    std::string out;
    out.reserve(templ.size());
    std::size_t i = 0;
    while (i < templ.size()) {
        if (templ[i] == '{') {
            const auto close = templ.find('}', i + 1);
            if (close != std::string_view::npos) {
                auto it = values.find(std::string(templ.substr(i + 1, close - i - 1)));
                if (it != values.end()) {
                    out += it->second;
                    i = close + 1;
                    continue;
                }
            }
        }
        out.push_back(templ[i]);
        ++i;
    }
    return out;
}

}  // namespace prompts

std::string extract_json_object(std::string_view completion) {
    for (std::size_t start = completion.find('{'); start != std::string_view::npos;
         start = completion.find('{', start + 1)) {
        int depth = 0;
        bool in_string = false;
        bool escaped = false;
        for (std::size_t i = start; i < completion.size(); ++i) {
            const char c = completion[i];
            if (in_string) {
                if (escaped) {
                    escaped = false;
                } else if (c == '\\') {
                    escaped = true;
                } else if (c == '"') {
                    in_string = false;
                }
                continue;
            }
            if (c == '"') {
                in_string = true;
            } else if (c == '{') {
                ++depth;
            } else if (c == '}') {
                if (--depth == 0) {
                    auto candidate = completion.substr(start, i - start + 1);
                    if (nlohmann::json::accept(candidate)) return std::string(candidate);
                    break;
                }
            }
        }
    }
    return {};
}

}  // namespace trialmatch
