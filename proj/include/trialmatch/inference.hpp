#pragma once

#include <chrono>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace trialmatch {

/// "http://host:port/path" split into what the HTTP client needs.
struct Endpoint {
    std::string base;  // scheme://host[:port]
    std::string path = "/";

    static Endpoint parse(std::string_view url);
    std::string url() const { return base + path; }
};

struct RetryPolicy {
    int retries = 2;  // attempts = retries + 1
    std::chrono::milliseconds initial_backoff{200};
    std::chrono::milliseconds timeout{120000};
};

/// POSTs a JSON body, retrying transport failures, non-2xx statuses and empty
/// bodies with exponential backoff. Throws BackendUnavailable, or Timeout when
/// the final attempt timed out.
std::string post_json(const Endpoint& endpoint, const std::string& body, const RetryPolicy& policy);

struct ChatMessage {
    std::string role;
    std::string content;
};

struct InferenceRequest {
    std::vector<ChatMessage> messages;
    int max_tokens = 1024;
    RetryPolicy policy;
    static constexpr double temperature = 0.0;
};

/// Text completion plus, when the backend reports it, P("Yes").
struct Completion {
    std::string text;
    std::optional<double> yes_probability;
};

/// The request body sent to a chat backend; fixed field order so requests
/// are byte-reproducible.
std::string render_request_body(const InferenceRequest& request);

/// Accepts {"choices":[{"message":{"content":..}}]}, {"choices":[{"text":..}]},
/// {"text"|"completion"|"content"|"response": ..}; anything else is taken as
/// raw completion text. A numeric "yes_probability" is picked up if present.
Completion parse_completion_body(std::string_view body);

/// Role-agnostic inference backend.
class ChatClient {
public:
    virtual ~ChatClient() = default;
    virtual Completion complete(const InferenceRequest& request) const = 0;
};

class HttpChatClient final : public ChatClient {
public:
    explicit HttpChatClient(Endpoint endpoint) : endpoint_(std::move(endpoint)) {}
    Completion complete(const InferenceRequest& request) const override;
    const Endpoint& endpoint() const { return endpoint_; }

private:
    Endpoint endpoint_;
};

namespace prompts {

std::string_view relevance_judge();
std::string_view eligibility_reasoning();
std::string_view query_expansion();

/// Replaces {name} for the given names only; other braces are left alone.
std::string render(std::string_view templ, const std::map<std::string, std::string>& values);

}  // namespace prompts

/// First balanced {...} object in a completion (code fences and preambles
/// are skipped). Empty when none is found.
std::string extract_json_object(std::string_view completion);

}  // namespace trialmatch
