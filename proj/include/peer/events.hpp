#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "peer/agent_state.hpp"
#include "peer/config.hpp"
#include "peer/context.hpp"
#include "peer/domain.hpp"
#include "peer/thought.hpp"

namespace peer {

enum class EventType {
    SessionCreated,
    PlayerJoined,
    StanceSubmitted,
    AgentPositioned,
    UtterancePosted,
    ThoughtsEvaluated,
    AgentSpoke,
    OpinionAdjusted,
    Concession,
    PhaseChanged,
    SessionClosed,
};

std::string_view to_string(EventType t) noexcept;
std::optional<EventType> parse_event_type(std::string_view name) noexcept;

struct SessionEvent {
    std::uint64_t seq = 0;
    std::string ts;
    EventType type = EventType::SessionCreated;
    nlohmann::json payload = nlohmann::json::object();

    /// {"seq", "ts", "type", "payload"} as one compact JSON line (no newline).
    std::string to_line() const;
    nlohmann::json to_json() const;
    static SessionEvent from_json(const nlohmann::json& j);
    static SessionEvent from_line(const std::string& line);
};

/// Replaces every timestamp with an empty string, for comparisons.
std::vector<SessionEvent> mask_timestamps(std::span<const SessionEvent> events);

/// The log as JSON Lines, one event per line.
std::string to_jsonl(std::span<const SessionEvent> events);

/// Parses JSON Lines. A final line without a trailing newline that fails to
/// parse is treated as a torn write and dropped when `tolerate_torn_tail`.
std::vector<SessionEvent> read_event_log(std::istream& in, bool tolerate_torn_tail = false);
std::vector<SessionEvent> read_event_log(const std::filesystem::path& path,
                                         bool tolerate_torn_tail = false);

enum class SessionStatus { AwaitingStances, Active, Closed };

std::string_view to_string(SessionStatus s) noexcept;

struct LastEvaluation {
    std::uint64_t event_seq = 0;
    std::uint64_t trigger_seq = 0;
    std::uint64_t round = 0;

    bool operator==(const LastEvaluation&) const = default;
};

struct Participant {
    PlayerId id;
    std::string name;

    bool operator==(const Participant&) const = default;
};

/// Everything a session knows; obtained by folding its event log.
struct SessionState {
    std::string session_id;
    std::uint64_t seed = 0;
    EngineConfig config;
    DilemmaCard dilemma;
    AgentPersona persona;
    std::vector<Participant> participants;
    std::map<PlayerId, OpinionState> opinions;
    std::optional<AgentPositioning> positioning;
    std::optional<AgentState> agent;
    std::map<PlayerId, PlayerStrengthEstimate> player_estimates;
    Phase phase = Phase::Early;
    Transcript transcript;
    SessionStatus status = SessionStatus::AwaitingStances;
    int human_turns = 0;
    int agent_turns = 0;
    std::uint64_t evaluation_rounds = 0;
    std::optional<LastEvaluation> last_evaluation;
    ShiftNotice pending_shift = ShiftNotice::None;
    std::uint64_t last_seq = 0;

    const Participant* participant(const PlayerId& id) const;
    std::map<PlayerId, std::string> player_names() const;

    nlohmann::json to_json() const;

    bool operator==(const SessionState& other) const;
};

/// Applies one event. Throws peer::Error if the event is not valid in `state`.
void apply_event(SessionState& state, const SessionEvent& event);

/// Pure left fold of `events` from the empty state. Never calls a provider.
SessionState replay(std::span<const SessionEvent> events);

// Payload helpers shared by the live session and its tests.
nlohmann::json to_json(const Utterance& u);
Utterance utterance_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Thought& t);
Thought thought_from_json(const nlohmann::json& j);
nlohmann::json to_json(const AgentPersona& p);
AgentPersona persona_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DilemmaCard& d);
DilemmaCard dilemma_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ValueSet& values);
ValueSet values_from_json(const nlohmann::json& j);
nlohmann::json to_json(const AgentState& a);
nlohmann::json to_json(const MemoryEntry& m);

} // namespace peer
