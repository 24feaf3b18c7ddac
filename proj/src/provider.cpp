#include "peer/provider.hpp"

#include <map>

#include "peer/error.hpp"
#include "peer/values.hpp"

namespace peer {

using nlohmann::json;

std::string_view to_string(Capability c) noexcept {
    switch (c) {
    case Capability::GenerateThoughts: return "GenerateThoughts";
    case Capability::ClassifyValues: return "ClassifyValues";
    case Capability::DetectPersuasion: return "DetectPersuasion";
    case Capability::ClassifyAssertiveness: return "ClassifyAssertiveness";
    case Capability::ScoreThought: return "ScoreThought";
    case Capability::Paraphrase: return "Paraphrase";
    }
    return "unknown";
}

std::string_view to_string(ProviderError::Kind k) noexcept {
    switch (k) {
    case ProviderError::Kind::Timeout: return "Timeout";
    case ProviderError::Kind::MalformedOutput: return "MalformedOutput";
    case ProviderError::Kind::Transport: return "Transport";
    }
    return "Transport";
}

namespace {

json enum_of(auto const& values) {
    json arr = json::array();
    for (auto v : values) {
        arr.push_back(std::string(to_string(v)));
    }
    return arr;
}

json unit_interval() {
    return {{"type", "number"}, {"minimum", 0}, {"maximum", 1}};
}

json object_schema(json properties, json required) {
    return {{"type", "object"}, {"properties", std::move(properties)}, {"required", std::move(required)}};
}

std::map<Capability, json> build_schemas() {
    const json value_list = {{"type", "array"}, {"items", {{"enum", enum_of(all_schwartz_values)}}}};
    const json move_list = {{"type", "array"}, {"items", {{"enum", enum_of(all_talk_moves)}}}};
    const json thought = object_schema(
        {{"kind", {{"enum", {"General", "Strategic"}}}},
         {"move", {{"enum", enum_of(all_talk_moves)}}},
         {"content", {{"type", "string"}, {"minLength", 1}}},
         {"value_tags", value_list},
         {"template_id", {{"type", "string"}}},
         {"target", {{"type", "string"}}}},
        {"kind", "content"});

    std::map<Capability, json> s;
    s[Capability::GenerateThoughts] =
        object_schema({{"thoughts", {{"type", "array"}, {"items", thought}}}}, {"thoughts"});
    s[Capability::ClassifyValues] =
        object_schema({{"values", value_list}, {"talk_moves", move_list}}, {"values", "talk_moves"});
    s[Capability::DetectPersuasion] = object_schema({{"score", unit_interval()}}, {"score"});
    s[Capability::ClassifyAssertiveness] =
        object_schema({{"assertiveness", unit_interval()}}, {"assertiveness"});
    s[Capability::ScoreThought] = object_schema({{"relevance", unit_interval()},
                                                 {"information_gap", unit_interval()},
                                                 {"expected_impact", unit_interval()}},
                                                {"relevance", "information_gap", "expected_impact"});
    s[Capability::Paraphrase] =
        object_schema({{"text", {{"type", "string"}, {"minLength", 1}}}}, {"text"});
    return s;
}

std::optional<std::string> check_unit(const json& obj, const char* key) {
    if (!obj.contains(key)) {
        return std::string("missing '") + key + "'";
    }
    const auto& v = obj.at(key);
    if (!v.is_number()) {
        return std::string("'") + key + "' is not a number";
    }
    const double d = v.get<double>();
    if (!(d >= 0.0 && d <= 1.0)) {
        return std::string("'") + key + "' outside [0, 1]";
    }
    return std::nullopt;
}

template <typename Parse>
std::optional<std::string> check_names(const json& obj, const char* key, Parse parse) {
    if (!obj.contains(key) || !obj.at(key).is_array()) {
        return std::string("'") + key + "' must be an array";
    }
    for (const auto& item : obj.at(key)) {
        if (!item.is_string() || !parse(item.get<std::string>())) {
            return std::string("'") + key + "' has an unknown entry " + item.dump();
        }
    }
    return std::nullopt;
}

bool non_empty_string(const json& v) {
    return v.is_string() && v.get<std::string>().find_first_not_of(" \t\r\n") != std::string::npos;
}

std::optional<std::string> check_thought(const json& t) {
    if (!t.is_object()) {
        return "thought entry is not an object";
    }
    const auto kind = t.value("kind", std::string{});
    if (kind != "General" && kind != "Strategic") {
        return "thought kind must be General or Strategic";
    }
    if (kind == "Strategic") {
        if (!t.contains("move") || !t["move"].is_string() ||
            !parse_talk_move(t["move"].get<std::string>())) {
            return "strategic thought needs a known move";
        }
    }
    if (!t.contains("content") || !non_empty_string(t["content"])) {
        return "thought content must be a non-empty string";
    }
    if (t.contains("value_tags")) {
        if (auto v = check_names(t, "value_tags", parse_schwartz_value)) return v;
    }
    for (const char* key : {"template_id", "target"}) {
        if (t.contains(key) && !t[key].is_string()) {
            return std::string("'") + key + "' must be a string";
        }
    }
    return std::nullopt;
}

} // namespace

const json& result_schema(Capability c) {
    static const std::map<Capability, json> schemas = build_schemas();
    return schemas.at(c);
}

std::optional<std::string> schema_violation(Capability c, const json& r) {
    if (!r.is_object()) {
        return "result is not a JSON object";
    }
    switch (c) {
    case Capability::GenerateThoughts: {
        if (!r.contains("thoughts") || !r["thoughts"].is_array()) {
            return "'thoughts' must be an array";
        }
        for (const auto& t : r["thoughts"]) {
            if (auto v = check_thought(t)) return v;
        }
        return std::nullopt;
    }
    case Capability::ClassifyValues:
        if (auto v = check_names(r, "values", parse_schwartz_value)) return v;
        return check_names(r, "talk_moves", parse_talk_move);
    case Capability::DetectPersuasion:
        return check_unit(r, "score");
    case Capability::ClassifyAssertiveness:
        return check_unit(r, "assertiveness");
    case Capability::ScoreThought:
        for (const char* key : {"relevance", "information_gap", "expected_impact"}) {
            if (auto v = check_unit(r, key)) return v;
        }
        return std::nullopt;
    case Capability::Paraphrase:
        if (!r.contains("text") || !non_empty_string(r["text"])) {
            return "'text' must be a non-empty string";
        }
        return std::nullopt;
    }
    return "unknown capability";
}

ProviderResponse Provider::call(const ProviderRequest& request) {
    if (request.timeout.count() <= 0) {
        throw validation_error("provider request timeout must be positive");
    }
    ProviderResponse response = do_call(request);
    if (auto violation = schema_violation(request.capability, response.result)) {
        throw ProviderError(ProviderError::Kind::MalformedOutput,
                            std::string(to_string(request.capability)) + ": " + *violation);
    }
    return response;
}

} // namespace peer
