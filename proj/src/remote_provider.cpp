#include "peer/remote_provider.hpp"

#include <chrono>

#include <httplib.h>

#include "peer/error.hpp"

namespace peer {

using nlohmann::json;
using std::chrono::duration_cast;
using std::chrono::milliseconds;
using std::chrono::steady_clock;

RemoteConfig RemoteConfig::from_env(
    const std::function<std::optional<std::string>(const char*)>& getenv) {
    RemoteConfig c;
    c.url = getenv("PROVIDER_URL").value_or("");
    c.key = getenv("PROVIDER_KEY").value_or("");
    c.model = getenv("PROVIDER_MODEL").value_or("");
    return c;
}

RemoteProvider::RemoteProvider(RemoteConfig config) : config_(std::move(config)) {
    const auto scheme_end = config_.url.find("://");
    if (config_.url.empty() || scheme_end == std::string::npos) {
        throw validation_error("PROVIDER_URL must look like http(s)://host[:port][/path]");
    }
    if (config_.model.empty()) {
        throw validation_error("PROVIDER_MODEL is not set");
    }
    const auto path_start = config_.url.find('/', scheme_end + 3);
    scheme_host_port_ = config_.url.substr(0, path_start);
    std::string path = path_start == std::string::npos ? "" : config_.url.substr(path_start);
    while (!path.empty() && path.back() == '/') path.pop_back();
    const std::string suffix = "/chat/completions";
    if (path.size() < suffix.size() || path.compare(path.size() - suffix.size(), suffix.size(), suffix) != 0) {
        path += suffix;
    }
    path_ = path;
}

std::string RemoteProvider::instructions(Capability c) {
    std::string task;
    switch (c) {
    case Capability::GenerateThoughts:
        task =
            "You are the inner voice of a peer taking part in a three-way discussion of an ethical "
            "dilemma with two human players. From the payload (dilemma, your position and opinion "
            "strength, the discussion phase, the triggering utterance with its value tags, recent "
            "turns and retrieved memories) produce up to n_general General thoughts (everyday "
            "conversational reactions) and up to n_strategic Strategic thoughts. Each strategic "
            "thought uses one talk move and must argue for your own position, except "
            "ConcessionAcknowledgment, which is only allowed when pending_shift is not \"None\" or "
            "you have conceded. Content is a short first-person clause without final punctuation. "
            "Set target to a player id when the move addresses that player.";
        break;
    case Capability::ClassifyValues:
        task =
            "Tag the utterance in the payload with the basic human values it appeals to and the "
            "transactive talk moves it performs. Use only the listed names; empty lists are fine.";
        break;
    case Capability::DetectPersuasion:
        task =
            "Rate from 0 to 1 how persuasive the utterance is as an argument against "
            "agent_position (0 = not an argument against it, 1 = compelling). An utterance from a "
            "speaker whose speaker_stance equals agent_position scores 0.";
        break;
    case Capability::ClassifyAssertiveness:
        task =
            "Rate from 0 to 1 how assertively the speaker holds their view in the utterance "
            "(0 = hedging and unsure, 0.5 = neutral, 1 = firmly committed).";
        break;
    case Capability::ScoreThought:
        task =
            "Rate the candidate thought on three criteria from 0 to 1: relevance to the triggering "
            "utterance, information_gap (how much it adds that has not been said), and "
            "expected_impact on moving the discussion forward.";
        break;
    case Capability::Paraphrase:
        task =
            "Turn the inner thought into one natural spoken turn in the voice described by the "
            "persona: a peer, casual and concise. If acknowledgment is not null, open the turn with "
            "exactly that sentence.";
        break;
    }
    return task + "\nReply with a single JSON object matching this schema and nothing else:\n" +
           result_schema(c).dump();
}

namespace {

std::string strip_fences(std::string text) {
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return text;
    text.erase(0, first);
    if (text.rfind("```", 0) == 0) {
        const auto newline = text.find('\n');
        text.erase(0, newline == std::string::npos ? text.size() : newline + 1);
        const auto close = text.rfind("```");
        if (close != std::string::npos) text.erase(close);
    }
    return text;
}

// Content of the first choice, or an explanation of why there is none.
std::pair<std::optional<std::string>, std::string> extract_content(const std::string& body) {
    try {
        const json envelope = json::parse(body);
        const json& message = envelope.at("choices").at(0).at("message");
        if (!message.contains("content") || !message["content"].is_string()) {
            return {std::nullopt, "completion has no text content"};
        }
        return {message["content"].get<std::string>(), ""};
    } catch (const json::exception& e) {
        return {std::nullopt, std::string("unreadable completion envelope: ") + e.what()};
    }
}

} // namespace

ProviderResponse RemoteProvider::do_call(const ProviderRequest& request) {
    const auto start = steady_clock::now();
    const auto deadline = start + request.timeout;

    httplib::Client client(scheme_host_port_);
    httplib::Headers headers{{"Accept", "application/json"}};
    if (!config_.key.empty()) {
        headers.emplace("Authorization", "Bearer " + config_.key);
    }
    if (!request.trace_id.empty()) {
        headers.emplace("X-Trace-Id", request.trace_id);
    }

    json messages = json::array({
        {{"role", "system"}, {"content", instructions(request.capability)}},
        {{"role", "user"}, {"content", request.payload.dump()}},
    });

    std::string last_problem;
    for (int attempt = 0; attempt < 2; ++attempt) {
        const auto remaining = duration_cast<milliseconds>(deadline - steady_clock::now());
        if (remaining.count() <= 0) {
            throw ProviderError(ProviderError::Kind::Timeout, "deadline passed before attempt");
        }
        client.set_connection_timeout(remaining);
        client.set_read_timeout(remaining);
        client.set_write_timeout(remaining);

        const json body = {{"model", config_.model},
                           {"messages", messages},
                           {"temperature", 0},
                           {"response_format", {{"type", "json_object"}}}};
        auto res = client.Post(path_, headers, body.dump(), "application/json");
        if (!res) {
            const auto err = res.error();
            const bool timed_out = err == httplib::Error::ConnectionTimeout ||
                                   steady_clock::now() + milliseconds(5) >= deadline;
            throw ProviderError(timed_out ? ProviderError::Kind::Timeout : ProviderError::Kind::Transport,
                                "request failed: " + httplib::to_string(err));
        }
        if (res->status != 200) {
            throw ProviderError(ProviderError::Kind::Transport,
                                "HTTP " + std::to_string(res->status) + " from provider");
        }

        auto [content, problem] = extract_content(res->body);
        if (content) {
            try {
                json result = json::parse(strip_fences(*content));
                if (auto violation = schema_violation(request.capability, result)) {
                    problem = *violation;
                } else {
                    ProviderResponse response;
                    response.result = std::move(result);
                    response.source = ResponseSource::Remote;
                    response.latency = duration_cast<milliseconds>(steady_clock::now() - start);
                    return response;
                }
            } catch (const json::exception& e) {
                problem = std::string("reply is not JSON: ") + e.what();
            }
            messages.push_back({{"role", "assistant"}, {"content", *content}});
        }
        last_problem = problem;
        messages.push_back(
            {{"role", "user"},
             {"content", "Your previous reply was rejected (" + problem +
                             "). Reply again with only a JSON object matching the schema: " +
                             result_schema(request.capability).dump()}});
    }
    throw ProviderError(ProviderError::Kind::MalformedOutput,
                        std::string(to_string(request.capability)) + " after repair: " + last_problem);
}

} // namespace peer
