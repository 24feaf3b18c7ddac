#include "peer/values.hpp"

#include <algorithm>

#include "peer/error.hpp"

namespace peer {

namespace {

constexpr std::array<std::string_view, 10> value_names{
    "SelfDirection", "Stimulation", "Hedonism",  "Achievement", "Power",
    "Security",      "Conformity",  "Tradition", "Benevolence", "Universalism",
};

constexpr std::array<std::string_view, 10> value_phrases{
    "personal freedom", "novelty",   "enjoyment", "achievement",        "power and control",
    "security",         "following the rules", "tradition", "caring for others",
    "fairness for everyone",
};

constexpr std::array<std::string_view, 8> move_names{
    "Challenge",   "CounterArgument",   "JustificationRequest", "Extension",
    "Integration", "PerspectiveTaking", "ConsensusProbe",       "ConcessionAcknowledgment",
};

} // namespace

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::Validation: return "validation";
    case ErrorCode::NotFound: return "not_found";
    case ErrorCode::Conflict: return "conflict";
    case ErrorCode::Forbidden: return "forbidden";
    case ErrorCode::Internal: return "internal";
    }
    return "internal";
}

std::string_view to_string(SchwartzValue value) noexcept {
    return value_names[static_cast<std::size_t>(value)];
}

std::string_view to_string(TalkMove move) noexcept {
    return move_names[static_cast<std::size_t>(move)];
}

std::string_view spoken_name(SchwartzValue value) noexcept {
    return value_phrases[static_cast<std::size_t>(value)];
}

std::optional<SchwartzValue> parse_schwartz_value(std::string_view name) noexcept {
    auto it = std::find(value_names.begin(), value_names.end(), name);
    if (it == value_names.end()) {
        return std::nullopt;
    }
    return all_schwartz_values[static_cast<std::size_t>(it - value_names.begin())];
}

std::optional<TalkMove> parse_talk_move(std::string_view name) noexcept {
    auto it = std::find(move_names.begin(), move_names.end(), name);
    if (it == move_names.end()) {
        return std::nullopt;
    }
    return all_talk_moves[static_cast<std::size_t>(it - move_names.begin())];
}

std::size_t overlap(const ValueSet& a, const ValueSet& b) {
    return static_cast<std::size_t>(std::count_if(
        a.begin(), a.end(), [&b](SchwartzValue v) { return b.count(v) != 0; }));
}

} // namespace peer
