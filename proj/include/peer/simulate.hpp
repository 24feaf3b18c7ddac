#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "peer/events.hpp"
#include "peer/provider.hpp"
#include "peer/session.hpp"

namespace peer {

struct ScriptedPlayer {
    PlayerId id;
    std::string name;
    Stance stance = Stance::Agree;
    int confidence = 3;
};

struct ScriptedTurn {
    PlayerId player;
    std::string text;
};

/// A two-player transcript to run through the engine in batch.
struct Script {
    DilemmaCard dilemma;
    std::vector<ScriptedPlayer> players;
    std::vector<ScriptedTurn> turns;
    nlohmann::json config = nlohmann::json::object();

    /// {"dilemma": {...} | "dilemma_id": "...", "players": [...], "turns": [...],
    ///  "config": {...}}. `catalog` resolves "dilemma_id".
    static Script from_json(const nlohmann::json& j, const DilemmaCatalog* catalog = nullptr);
    static Script load(const std::filesystem::path& path, const DilemmaCatalog* catalog = nullptr);
};

struct SimulationOptions {
    std::uint64_t seed = 0;
    std::string session_id = "sim";
    EngineConfig base_config;
    AgentPersona persona = AgentPersona::default_peer();
    Clock clock = utc_timestamp;
};

/// Runs the whole script in one fresh session and returns its event log.
/// Rejected turns (e.g. after close) propagate as exceptions.
std::vector<SessionEvent> run_script(const Script& script, Provider& provider,
                                     const SimulationOptions& options);

struct LogSummary {
    std::string session_id;
    std::string dilemma_id;
    std::size_t events = 0;
    int human_turns = 0;
    int agent_turns = 0;
    int silences = 0;
    bool conceded = false;
    std::optional<std::string> agent_stance;
    std::optional<std::string> positioning_mode;
    std::vector<double> strength_trajectory;
    std::vector<std::uint64_t> phase_changes;  // trigger seqs
    std::string final_status;

    nlohmann::json to_json() const;
};

LogSummary summarize_log(const std::vector<SessionEvent>& events);

} // namespace peer
