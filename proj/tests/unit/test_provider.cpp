#include <catch_amalgamated.hpp>

#include <atomic>
#include <chrono>
#include <thread>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <httplib.h>

#include "peer/error.hpp"
#include "peer/fault_provider.hpp"
#include "peer/remote_provider.hpp"
#include "peer/rng.hpp"
#include "support.hpp"

using namespace peer;
using nlohmann::json;
using namespace std::chrono_literals;

namespace {

ProviderRequest request(Capability c, json payload) {
    ProviderRequest r;
    r.capability = c;
    r.payload = std::move(payload);
    r.timeout = 2000ms;
    r.trace_id = "test";
    return r;
}

json persuasion_payload(const std::string& text) {
    return {{"text", text}, {"agent_position", "Disagree"}, {"agent_strength", 4.5}, {"speaker_stance", "Agree"}};
}

// Chat-completion stub on an ephemeral port; each request gets the next reply.
class StubServer {
public:
    using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

    explicit StubServer(Handler handler) : handler_(std::move(handler)) {
        server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
            ++requests_;
            last_body_ = req.body;
            handler_(req, res);
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~StubServer() {
        server_.stop();
        thread_.join();
    }

    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }
    int requests() const { return requests_; }
    const std::string& last_body() const { return last_body_; }

private:
    httplib::Server server_;
    Handler handler_;
    int port_ = 0;
    std::thread thread_;
    std::atomic<int> requests_{0};
    std::string last_body_;
};

void reply_with(httplib::Response& res, const std::string& content) {
    json envelope = {{"choices", {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", content}}}}}}};
    res.set_content(envelope.dump(), "application/json");
}

// A loopback port that was free a moment ago and has no listener now.
int closed_port() {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
    socklen_t len = sizeof addr;
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
    ::close(fd);
    return ntohs(addr.sin_port);
}

RemoteProvider remote_for(const StubServer& s) {
    return RemoteProvider({s.url(), "k", "test-model"});
}

} // namespace

TEST_CASE("mock responses are a pure function of the request") {
    auto a = testkit::mock();
    auto b = testkit::mock();
    const auto req = request(Capability::DetectPersuasion,
                             persuasion_payload("Deploying it carefully could save far more lives than it costs."));
    const auto ra = a->call(req);
    CHECK(ra.result == b->call(req).result);
    CHECK(ra.result == a->call(req).result);
    CHECK(ra.result.at("score") == 0.8);
    CHECK(ra.latency.count() == 0);
    CHECK(ra.source == ResponseSource::Mock);

    auto same_side = persuasion_payload("Deploying it carefully could save far more lives than it costs.");
    same_side["speaker_stance"] = "Disagree";
    CHECK(a->call(request(Capability::DetectPersuasion, same_side)).result.at("score") == 0.0);
}

TEST_CASE("mock output conforms to every capability schema") {
    auto mock = testkit::mock();
    Rng rng(3);
    const std::vector<std::string> words = {"safe", "freedom", "rules", "why", "maybe", "definitely", "everyone",
                                            "control", "I", "think", "progress", "people", "equal", "law"};
    for (int i = 0; i < 300; ++i) {
        std::string text;
        const int n = 1 + static_cast<int>(rng() % 12);
        for (int w = 0; w < n; ++w) text += words[rng() % words.size()] + " ";
        REQUIRE_FALSE(schema_violation(Capability::ClassifyValues,
                                       mock->call(request(Capability::ClassifyValues, {{"text", text}})).result));
        REQUIRE_FALSE(schema_violation(Capability::ClassifyAssertiveness,
                                       mock->call(request(Capability::ClassifyAssertiveness, {{"text", text}})).result));
        REQUIRE_FALSE(schema_violation(Capability::DetectPersuasion,
                                       mock->call(request(Capability::DetectPersuasion, persuasion_payload(text))).result));
    }
}

TEST_CASE("schema violations") {
    CHECK(schema_violation(Capability::DetectPersuasion, {{"score", 1.5}}));
    CHECK(schema_violation(Capability::DetectPersuasion, {{"score", "high"}}));
    CHECK(schema_violation(Capability::DetectPersuasion, json::array()));
    CHECK_FALSE(schema_violation(Capability::DetectPersuasion, {{"score", 0}}));
    CHECK(schema_violation(Capability::ClassifyValues, {{"values", {"Greed"}}, {"talk_moves", json::array()}}));
    CHECK(schema_violation(Capability::ClassifyValues, {{"values", json::array()}}));
    CHECK(schema_violation(Capability::Paraphrase, {{"text", "  "}}));
    CHECK(schema_violation(Capability::GenerateThoughts,
                           {{"thoughts", {{{"kind", "Strategic"}, {"content", "x"}}}}}));
    CHECK(schema_violation(Capability::GenerateThoughts, {{"thoughts", {{{"kind", "General"}, {"content", 3}}}}}));
    CHECK_FALSE(schema_violation(Capability::GenerateThoughts, {{"thoughts", json::array()}}));
    CHECK(schema_violation(Capability::ScoreThought,
                           {{"relevance", 0.5}, {"information_gap", 0.5}, {"expected_impact", -0.1}}));
    for (auto c : all_capabilities) CHECK(result_schema(c).is_object());
}

TEST_CASE("off-schema backend output becomes MalformedOutput") {
    testkit::FnProvider p([](const ProviderRequest&) { return json{{"score", 2}}; });
    try {
        p.call(request(Capability::DetectPersuasion, persuasion_payload("x")));
        FAIL("expected a ProviderError");
    } catch (const ProviderError& e) {
        CHECK(e.kind() == ProviderError::Kind::MalformedOutput);
    }
}

TEST_CASE("non-positive timeouts are rejected") {
    auto mock = testkit::mock();
    auto req = request(Capability::ClassifyValues, {{"text", "hi"}});
    req.timeout = 0ms;
    CHECK_THROWS_AS(mock->call(req), Error);
    req.timeout = -5ms;
    CHECK_THROWS_AS(mock->call(req), Error);
}

TEST_CASE("fault injection") {
    auto always = FaultInjectingProvider(testkit::mock(), 1.0, ProviderError::Kind::Timeout);
    for (int i = 0; i < 20; ++i) {
        try {
            always.call(request(Capability::ClassifyValues, {{"text", "hi"}}));
            FAIL("expected a fault");
        } catch (const ProviderError& e) {
            CHECK(e.kind() == ProviderError::Kind::Timeout);
        }
    }
    CHECK(always.failures() == 20);

    FaultInjectingProvider half(testkit::mock(), 0.5, ProviderError::Kind::Transport, 9);
    int failed = 0;
    for (int i = 0; i < 2000; ++i) {
        try {
            half.call(request(Capability::ClassifyValues, {{"text", "hi"}}));
        } catch (const ProviderError&) {
            ++failed;
        }
    }
    CHECK(std::abs(failed / 2000.0 - 0.5) < 0.05);

    FaultInjectingProvider scoped(testkit::mock(), 1.0);
    scoped.only({Capability::Paraphrase});
    CHECK_NOTHROW(scoped.call(request(Capability::ClassifyValues, {{"text", "hi"}})));
    CHECK_THROWS_AS(scoped.call(request(Capability::Paraphrase, {{"content", "x"}})), ProviderError);
    CHECK_THROWS_AS(FaultInjectingProvider(nullptr, 1.5), Error);
}

TEST_CASE("remote provider configuration") {
    CHECK_THROWS_AS(RemoteProvider({"", "", "m"}), Error);
    CHECK_THROWS_AS(RemoteProvider({"localhost:80", "", "m"}), Error);
    CHECK_THROWS_AS(RemoteProvider({"http://localhost:80", "", ""}), Error);
    const auto cfg = RemoteConfig::from_env([](const char* name) -> std::optional<std::string> {
        if (std::string(name) == "PROVIDER_URL") return "http://x";
        if (std::string(name) == "PROVIDER_MODEL") return "m";
        return std::nullopt;
    });
    CHECK(cfg.url == "http://x");
    CHECK(cfg.model == "m");
    CHECK(cfg.key.empty());
    for (auto c : all_capabilities) CHECK(RemoteProvider::instructions(c).find("schema") != std::string::npos);
}

TEST_CASE("remote provider parses a valid completion") {
    StubServer server([](const httplib::Request& req, httplib::Response& res) {
        CHECK(req.get_header_value("Authorization") == "Bearer k");
        reply_with(res, R"({"score": 0.4})");
    });
    auto p = remote_for(server);
    const auto r = p.call(request(Capability::DetectPersuasion, persuasion_payload("x")));
    CHECK(r.result.at("score") == 0.4);
    CHECK(r.source == ResponseSource::Remote);
    CHECK(server.requests() == 1);
    const auto sent = json::parse(server.last_body());
    CHECK(sent.at("model") == "test-model");
    CHECK(sent.at("messages").size() == 2);
}

TEST_CASE("remote provider repairs once, then gives up") {
    std::atomic<int> n{0};
    StubServer repaired([&](const httplib::Request&, httplib::Response& res) {
        reply_with(res, ++n == 1 ? "sure! here you go" : "```json\n{\"assertiveness\": 0.9}\n```");
    });
    auto p = remote_for(repaired);
    CHECK(p.call(request(Capability::ClassifyAssertiveness, {{"text", "x"}})).result.at("assertiveness") == 0.9);
    CHECK(repaired.requests() == 2);
    CHECK(json::parse(repaired.last_body()).at("messages").size() == 4);

    StubServer broken([](const httplib::Request&, httplib::Response& res) { reply_with(res, R"({"assertiveness": 3})"); });
    auto q = remote_for(broken);
    try {
        q.call(request(Capability::ClassifyAssertiveness, {{"text", "x"}}));
        FAIL("expected MalformedOutput");
    } catch (const ProviderError& e) {
        CHECK(e.kind() == ProviderError::Kind::MalformedOutput);
    }
    CHECK(broken.requests() == 2);
}

TEST_CASE("remote provider transport failures") {
    StubServer failing([](const httplib::Request&, httplib::Response& res) {
        res.status = 500;
        res.set_content("oops", "text/plain");
    });
    auto p = remote_for(failing);
    try {
        p.call(request(Capability::ClassifyAssertiveness, {{"text", "x"}}));
        FAIL("expected Transport");
    } catch (const ProviderError& e) {
        CHECK(e.kind() == ProviderError::Kind::Transport);
    }

    const int port = closed_port();
    RemoteProvider refused({"http://127.0.0.1:" + std::to_string(port), "", "m"});
    try {
        refused.call(request(Capability::ClassifyAssertiveness, {{"text", "x"}}));
        FAIL("expected Transport");
    } catch (const ProviderError& e) {
        CHECK(e.kind() == ProviderError::Kind::Transport);
    }
}

TEST_CASE("remote provider honours the deadline") {
    StubServer slow([](const httplib::Request&, httplib::Response& res) {
        std::this_thread::sleep_for(1500ms);
        reply_with(res, R"({"assertiveness": 0.5})");
    });
    auto p = remote_for(slow);
    auto req = request(Capability::ClassifyAssertiveness, {{"text", "x"}});
    req.timeout = 300ms;
    const auto start = std::chrono::steady_clock::now();
    try {
        p.call(req);
        FAIL("expected Timeout");
    } catch (const ProviderError& e) {
        CHECK(e.kind() == ProviderError::Kind::Timeout);
    }
    CHECK(std::chrono::steady_clock::now() - start <= 600ms);
}
