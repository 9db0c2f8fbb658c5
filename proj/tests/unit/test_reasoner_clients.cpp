#include <gtest/gtest.h>

#include <atomic>
#include <fstream>
#include <sstream>
#include <thread>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "trialmatch/error.hpp"
#include "trialmatch/inference.hpp"
#include "trialmatch/rank.hpp"

using namespace trialmatch;

namespace {

/// Local HTTP server on an ephemeral port, stopped on destruction.
class StubServer {
public:
    explicit StubServer(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
        server_.Post("/v1/chat", [this, handler](const httplib::Request& req, httplib::Response& res) {
            ++hits;
            {
                std::lock_guard lock(mutex_);
                last_body_ = req.body;
            }
            handler(req, res);
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~StubServer() {
        server_.stop();
        thread_.join();
    }
    Endpoint endpoint() const { return Endpoint::parse("http://127.0.0.1:" + std::to_string(port_) + "/v1/chat"); }
    std::string last_body() const {
        std::lock_guard lock(mutex_);
        return last_body_;
    }
    std::atomic<int> hits{0};

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
    mutable std::mutex mutex_;
    std::string last_body_;
};

RetryPolicy fast(int retries) {
    RetryPolicy p;
    p.retries = retries;
    p.initial_backoff = std::chrono::milliseconds(1);
    p.timeout = std::chrono::milliseconds(2000);
    return p;
}

InferenceRequest request(std::string content, int retries = 2) {
    InferenceRequest r;
    r.messages = {{"user", std::move(content)}};
    r.max_tokens = 8;
    r.policy = fast(retries);
    return r;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::string replace_all(std::string s, const std::string& from, const std::string& to) {
    for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
        s.replace(pos, from.size(), to);
    }
    return s;
}

}  // namespace

TEST(Endpoint, Parse) {
    const auto e = Endpoint::parse("http://localhost:8080/v1/chat/completions");
    EXPECT_EQ(e.base, "http://localhost:8080");
    EXPECT_EQ(e.path, "/v1/chat/completions");
    EXPECT_EQ(Endpoint::parse("http://h:1").path, "/");
    EXPECT_THROW(Endpoint::parse("localhost:8080"), Error);
    EXPECT_THROW(Endpoint::parse("https://h/x"), Error);
}

TEST(HttpClient, EchoYes) {
    StubServer server([](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"choices":[{"message":{"role":"assistant","content":"Yes"}}]})", "application/json");
    });
    const HttpChatClient client(server.endpoint());
    EXPECT_EQ(client.complete(request("hello")).text, "Yes");
    EXPECT_EQ(server.hits, 1);
}

TEST(HttpClient, RawBodyIsCompletionText) {
    StubServer server([](const httplib::Request&, httplib::Response& res) { res.set_content("No", "text/plain"); });
    EXPECT_EQ(HttpChatClient(server.endpoint()).complete(request("x")).text, "No");
}

TEST(HttpClient, ServerErrorsExhaustRetries) {
    StubServer server([](const httplib::Request&, httplib::Response& res) { res.status = 503; });
    try {
        HttpChatClient(server.endpoint()).complete(request("x", 2));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::BackendUnavailable);
    }
    EXPECT_EQ(server.hits, 3);
}

TEST(HttpClient, RecoversAfterEmptyBody) {
    StubServer server([](const httplib::Request&, httplib::Response& res) { res.set_content("", "text/plain"); });
    std::atomic<int> calls{0};
    StubServer flaky([&calls](const httplib::Request&, httplib::Response& res) {
        res.set_content(++calls == 1 ? "" : R"({"text":"Yes","yes_probability":0.9})", "application/json");
    });
    const auto c = HttpChatClient(flaky.endpoint()).complete(request("x", 2));
    EXPECT_EQ(c.text, "Yes");
    EXPECT_EQ(c.yes_probability, 0.9);
    EXPECT_EQ(flaky.hits, 2);
    EXPECT_THROW(HttpChatClient(server.endpoint()).complete(request("x", 0)), Error);
    EXPECT_EQ(server.hits, 1);
}

TEST(HttpClient, ServerDown) {
    // an ephemeral port that was bound and released, so nothing listens there
    int port = 0;
    {
        const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
        ASSERT_EQ(::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr), 0);
        socklen_t len = sizeof addr;
        ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
        port = ntohs(addr.sin_port);
        ::close(fd);
    }
    const HttpChatClient client(Endpoint::parse("http://127.0.0.1:" + std::to_string(port) + "/v1/chat"));
    try {
        client.complete(request("x", 2));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::BackendUnavailable);
        EXPECT_NE(std::string(e.what()).find("after 3 attempt"), std::string::npos);
    }
}

TEST(HttpClient, ConcurrentUse) {
    StubServer server([](const httplib::Request& req, httplib::Response& res) {
        const auto j = nlohmann::json::parse(req.body);
        res.set_content(nlohmann::json{{"text", j["messages"][0]["content"]}}.dump(), "application/json");
    });
    const HttpChatClient client(server.endpoint());
    std::vector<std::thread> threads;
    std::atomic<int> ok{0};
    for (int t = 0; t < 8; ++t) {
        threads.emplace_back([&, t] {
            if (client.complete(request("m" + std::to_string(t))).text == "m" + std::to_string(t)) ++ok;
        });
    }
    for (auto& t : threads) t.join();
    EXPECT_EQ(ok, 8);
}

TEST(Wire, RequestBodyLayout) {
    InferenceRequest r;
    r.messages = {{"system", "s \"q\""}, {"user", "u\nline"}};
    r.max_tokens = 16;
    EXPECT_EQ(render_request_body(r),
              R"({"messages":[{"role":"system","content":"s \"q\""},{"role":"user","content":"u\nline"}],)"
              R"("temperature":0.0,"max_tokens":16})");
}

TEST(Wire, CompletionBodyShapes) {
    EXPECT_EQ(parse_completion_body(R"({"choices":[{"text":"A"}]})").text, "A");
    EXPECT_EQ(parse_completion_body(R"({"completion":"B"})").text, "B");
    EXPECT_EQ(parse_completion_body(R"({"response":"C"})").text, "C");
    EXPECT_EQ(parse_completion_body(R"({"other":1})").text, R"({"other":1})");
    EXPECT_EQ(parse_completion_body("[1]").text, "[1]");
    EXPECT_FALSE(parse_completion_body(R"({"text":"x"})").yes_probability.has_value());
}

TEST(Wire, JudgePromptBytesAreTemplatePlusVariables) {
    StubServer server([](const httplib::Request&, httplib::Response& res) { res.set_content("Yes", "text/plain"); });
    auto client = std::make_shared<HttpChatClient>(server.endpoint());
    Criterion c;
    c.criterion_id = "NCT1-inc-1";
    c.text = "ecog performance status {0-1}";
    const PatientStatement st{"Patient is \"ambulatory\", ECOG 1.\tNo other issues.", {}};
    EXPECT_DOUBLE_EQ(LlmJudge(client, 2, fast(0)).judge(st, c).relevance, 1.0);

    const auto templ = read_file(std::string(TRIALMATCH_RESOURCE_DIR) + "/prompts/relevance_judge.txt");
    ASSERT_FALSE(templ.empty());
    const auto expected_prompt =
        replace_all(replace_all(templ, "{patient_text}", st.text), "{criterion_text}", c.text);
    const auto sent = server.last_body();
    const auto j = nlohmann::json::parse(sent);
    ASSERT_EQ(j["messages"].size(), 1u);
    EXPECT_EQ(j["messages"][0]["content"].get<std::string>(), expected_prompt);
    EXPECT_EQ(j["temperature"], 0.0);

    InferenceRequest same;
    same.messages = {{"user", expected_prompt}};
    same.max_tokens = j["max_tokens"].get<int>();
    EXPECT_EQ(sent, render_request_body(same));
}

TEST(Prompts, ResourcesMatchFiles) {
    const std::string dir = std::string(TRIALMATCH_RESOURCE_DIR) + "/prompts/";
    EXPECT_EQ(prompts::relevance_judge(), read_file(dir + "relevance_judge.txt"));
    EXPECT_EQ(prompts::eligibility_reasoning(), read_file(dir + "eligibility_reasoning.txt"));
    EXPECT_EQ(prompts::query_expansion(), read_file(dir + "query_expansion.txt"));
}

TEST(Prompts, RenderLeavesUnknownBraces) {
    EXPECT_EQ(prompts::render("{a} {b} {\"k\": 1}", {{"a", "X"}}), "X {b} {\"k\": 1}");
    EXPECT_EQ(prompts::render("{a}{a}", {{"a", "{a}"}}), "{a}{a}");
}

TEST(Prompts, ExtractJsonObject) {
    EXPECT_EQ(extract_json_object("Sure!\n```json\n{\"a\": \"}\"}\n```"), "{\"a\": \"}\"}");
    EXPECT_EQ(extract_json_object("{bad} then {\"b\":1}"), "{\"b\":1}");
    EXPECT_EQ(extract_json_object("nothing"), "");
}
