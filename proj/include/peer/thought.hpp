#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "peer/agent_state.hpp"
#include "peer/context.hpp"
#include "peer/domain.hpp"
#include "peer/values.hpp"

namespace peer {

class Provider;

/// General thought, or strategic thought carrying its talk move.
class ThoughtKind {
public:
    static ThoughtKind general() { return ThoughtKind(std::nullopt); }
    static ThoughtKind strategic(TalkMove move) { return ThoughtKind(move); }

    bool is_general() const noexcept { return !move_.has_value(); }
    bool is_strategic() const noexcept { return move_.has_value(); }
    std::optional<TalkMove> move() const noexcept { return move_; }

    bool operator==(const ThoughtKind&) const = default;

private:
    explicit ThoughtKind(std::optional<TalkMove> move) : move_(move) {}
    std::optional<TalkMove> move_;
};

/// Round of evaluation plus position in that round's candidate list.
struct ThoughtId {
    std::uint64_t round = 0;
    std::uint32_t index = 0;

    std::string str() const;
    static std::optional<ThoughtId> parse(std::string_view text);

    auto operator<=>(const ThoughtId&) const = default;
};

struct Grounding {
    std::vector<std::uint64_t> memory_seqs;
    ValueSet value_tags;

    bool operator==(const Grounding&) const = default;
};

struct Thought {
    ThoughtId id;
    ThoughtKind kind = ThoughtKind::general();
    std::string content;
    std::optional<double> motivation;
    Grounding grounding;
    std::string template_id;
    std::optional<PlayerId> target;

    bool operator==(const Thought&) const = default;
};

/// Opinion change the agent has not yet voiced.
enum class ShiftNotice { None, Adjusted, Conceded };

std::string_view to_string(ShiftNotice s) noexcept;
std::optional<ShiftNotice> parse_shift_notice(std::string_view name) noexcept;

struct DeliberationContext {
    DilemmaCard dilemma;
    std::vector<Utterance> transcript_window;
    AgentState agent;
    Phase phase = Phase::Early;
    std::vector<PlayerStrengthEstimate> player_estimates;
    std::vector<MemoryEntry> retrieved_memories;
    std::uint64_t triggering_seq = 0;
    std::uint64_t round = 0;
    ShiftNotice pending_shift = ShiftNotice::None;
    std::uint64_t seed = 0;
    std::map<PlayerId, std::string> player_names;
    std::chrono::milliseconds provider_timeout{10000};

    /// The utterance with `triggering_seq`, if it is inside the window.
    const Utterance* trigger() const;

    /// Tags voiced in the window before the trigger.
    ValueSet voiced_before_trigger() const;

    /// Mean of the players' strength estimates; 3.0 when there are none.
    double mean_player_estimate() const;

    std::string display_name(const PlayerId& id) const;
};

struct GenerationBudget {
    int n_general = 3;
    int n_strategic = 3;
};

/// Candidate thoughts for the current trigger. Provider failure is
/// retried once; a second failure yields an empty list. Entries that do not
/// parse are dropped and the kind counts are capped at the budget.
std::vector<Thought> generate_thoughts(const DeliberationContext& ctx, Provider& provider,
                                       const GenerationBudget& budget = {});

/// Moves that address the speaker of the triggering utterance.
bool move_targets_speaker(TalkMove move) noexcept;

} // namespace peer
