#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "peer/domain.hpp"
#include "peer/provider.hpp"
#include "peer/values.hpp"

namespace peer {

/// Keyword tables for offline value, talk-move and assertiveness cues.
/// A keyword ending in '*' matches any token with that prefix; keywords with
/// spaces match consecutive tokens.
struct Lexicon {
    std::string version;
    std::map<std::string, SchwartzValue> values;
    std::map<std::string, TalkMove> talk_moves;
    std::vector<std::string> assertive;
    std::vector<std::string> hedges;

    static Lexicon from_json(const nlohmann::json& j);
};

struct PersuasionMap {
    std::string version;
    std::map<std::string, double> utterances;  // keyed by normalize_utterance()
    std::map<std::string, double> cues;
    double default_score = 0.0;

    static PersuasionMap from_json(const nlohmann::json& j);
};

struct ThoughtTemplate {
    std::string template_id;
    bool strategic = false;
    std::optional<TalkMove> move;
    std::string text_pattern;
    ValueSet required_value_tags;
    std::optional<Stance> stance;  // absent: usable by either side

    bool uses_value() const;
};

struct TemplateSet {
    std::string version;
    std::vector<ThoughtTemplate> templates;

    static TemplateSet from_json(const nlohmann::json& j);
    const ThoughtTemplate* find(const std::string& id) const;
};

struct Fixtures {
    Lexicon lexicon;
    PersuasionMap persuasion;
    TemplateSet templates;

    /// Combined version tag, e.g. "lexicon-v1+persuasion-v1+templates-v1".
    std::string version() const;

    /// Reads lexicon.json, persuasion.json and templates.json from `dir`.
    static Fixtures load(const std::filesystem::path& dir);
};

/// Lower-cased alphanumeric tokens; apostrophes are kept inside words.
std::vector<std::string> tokenize(std::string_view text);

/// Keyword split on spaces, lower-cased; '*' suffixes are kept.
std::vector<std::string> tokenize_keyword(std::string_view keyword);

/// Lower-case, single-spaced, trailing punctuation stripped.
std::string normalize_utterance(std::string_view text);

/// Deterministic offline backend. Every response is a pure function of the
/// request payload and the loaded fixtures; latency is reported as zero.
class MockProvider final : public Provider {
public:
    explicit MockProvider(Fixtures fixtures) : fixtures_(std::move(fixtures)) {}

    const Fixtures& fixtures() const noexcept { return fixtures_; }

private:
    ProviderResponse do_call(const ProviderRequest& request) override;

    nlohmann::json classify_values(const nlohmann::json& payload) const;
    nlohmann::json detect_persuasion(const nlohmann::json& payload) const;
    nlohmann::json classify_assertiveness(const nlohmann::json& payload) const;
    nlohmann::json generate_thoughts(const nlohmann::json& payload) const;
    nlohmann::json score_thought(const nlohmann::json& payload) const;
    nlohmann::json paraphrase(const nlohmann::json& payload) const;

    Fixtures fixtures_;
};

} // namespace peer
