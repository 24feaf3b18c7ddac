#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace peer {

/// Opaque participant identifier. The agent uses `PlayerId::agent()`.
class PlayerId {
public:
    PlayerId() = default;
    explicit PlayerId(std::string value) : value_(std::move(value)) {}

    static PlayerId agent() { return PlayerId("agent"); }

    const std::string& str() const noexcept { return value_; }
    bool empty() const noexcept { return value_.empty(); }
    bool is_agent() const { return value_ == "agent"; }

    auto operator<=>(const PlayerId&) const = default;

private:
    std::string value_;
};

struct DilemmaCard {
    std::string id;
    std::string prompt;
    std::vector<std::string> topic_tags;

    /// Short noun phrase for the dilemma, derived from the first topic tag.
    std::string topic_phrase() const;

    bool operator==(const DilemmaCard&) const = default;
};

enum class Stance { Agree, Disagree };

constexpr Stance opposite(Stance s) noexcept {
    return s == Stance::Agree ? Stance::Disagree : Stance::Agree;
}

std::string_view to_string(Stance s) noexcept;
std::optional<Stance> parse_stance(std::string_view name) noexcept;

/// A player's answer to the two intake questions.
struct OpinionState {
    PlayerId player;
    Stance stance = Stance::Agree;
    int confidence = 3;

    bool operator==(const OpinionState&) const = default;
};

/// Throws a validation error unless confidence is in 1..5 and the id is set.
void validate(const OpinionState& opinion);

enum class PositionMode { Oppose, AmplifyMinority, TieBreak };

std::string_view to_string(PositionMode m) noexcept;
std::optional<PositionMode> parse_position_mode(std::string_view name) noexcept;

struct AgentPositioning {
    Stance stance = Stance::Agree;
    PositionMode mode = PositionMode::Oppose;
    std::optional<PlayerId> aligned_with;

    bool operator==(const AgentPositioning&) const = default;
};

/// Picks the agent's side from the two intake answers.
///
/// Same stance: the agent takes the opposite one. Different stances with
/// different confidence: the agent joins the less confident player. Different
/// stances with equal confidence: a coin drawn from `seed` decides.
AgentPositioning assign_agent_position(const OpinionState& p1, const OpinionState& p2,
                                       std::uint64_t seed);

/// Mean of the two confidences, in [1, 5].
double initial_opinion_strength(const OpinionState& p1, const OpinionState& p2);

/// Dilemma cards indexed by id, loaded from JSON Lines.
class DilemmaCatalog {
public:
    DilemmaCatalog() = default;

    static DilemmaCatalog from_jsonl(std::istream& in);
    static DilemmaCatalog load(const std::filesystem::path& path);

    void add(DilemmaCard card);
    const DilemmaCard& at(const std::string& id) const;
    bool contains(const std::string& id) const { return cards_.count(id) != 0; }
    std::size_t size() const noexcept { return cards_.size(); }
    std::vector<std::string> ids() const;

private:
    std::map<std::string, DilemmaCard> cards_;
};

} // namespace peer
