#include "peer/simulate.hpp"

#include <fstream>

#include "peer/error.hpp"
#include "peer/session.hpp"

namespace peer {

using nlohmann::json;

Script Script::from_json(const json& j, const DilemmaCatalog* catalog) {
    try {
        Script s;
        if (j.contains("dilemma")) {
            s.dilemma = dilemma_from_json(j["dilemma"]);
        } else if (j.contains("dilemma_id")) {
            if (!catalog) throw validation_error("script names a dilemma_id but no catalog was given");
            s.dilemma = catalog->at(j["dilemma_id"].get<std::string>());
        } else {
            throw validation_error("script needs \"dilemma\" or \"dilemma_id\"");
        }
        for (const auto& p : j.at("players")) {
            ScriptedPlayer player;
            player.id = PlayerId(p.at("id").get<std::string>());
            player.name = p.value("name", player.id.str());
            auto stance = parse_stance(p.at("stance").get<std::string>());
            if (!stance) throw validation_error("unknown stance in script");
            player.stance = *stance;
            player.confidence = p.at("confidence").get<int>();
            s.players.push_back(std::move(player));
        }
        if (s.players.size() != 2) throw validation_error("a script has exactly two players");
        for (const auto& t : j.value("turns", json::array())) {
            s.turns.push_back({PlayerId(t.at("player").get<std::string>()), t.at("text").get<std::string>()});
        }
        s.config = j.value("config", json::object());
        return s;
    } catch (const json::exception& e) {
        throw validation_error(std::string("malformed script: ") + e.what());
    }
}

Script Script::load(const std::filesystem::path& path, const DilemmaCatalog* catalog) {
    std::ifstream in(path);
    if (!in) throw not_found("cannot open script " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw validation_error("script " + path.string() + " is not JSON: " + e.what());
    }
    return from_json(j, catalog);
}

std::vector<SessionEvent> run_script(const Script& script, Provider& provider, const SimulationOptions& options) {
    SessionSetup setup;
    setup.session_id = options.session_id;
    setup.dilemma = script.dilemma;
    setup.config = EngineConfig::from_json(script.config, options.base_config);
    setup.seed = options.seed;
    setup.persona = options.persona;

    // Non-owning handle: the caller keeps the provider alive.
    std::shared_ptr<Provider> handle(std::shared_ptr<Provider>{}, &provider);
    auto session = Session::create(std::move(setup), handle, nullptr, options.clock);
    for (const auto& p : script.players) session->register_player(p.name, p.id);
    for (const auto& p : script.players) session->submit_stance({p.id, p.stance, p.confidence});
    for (const auto& t : script.turns) session->post_utterance(t.player, t.text);
    session->close("script complete");
    return session->events();
}

json LogSummary::to_json() const {
    return {{"session_id", session_id},
            {"dilemma_id", dilemma_id},
            {"events", events},
            {"human_turns", human_turns},
            {"agent_turns", agent_turns},
            {"silences", silences},
            {"conceded", conceded},
            {"agent_stance", agent_stance ? json(*agent_stance) : json(nullptr)},
            {"positioning_mode", positioning_mode ? json(*positioning_mode) : json(nullptr)},
            {"strength_trajectory", strength_trajectory},
            {"phase_changes", phase_changes},
            {"final_status", final_status}};
}

LogSummary summarize_log(const std::vector<SessionEvent>& events) {
    LogSummary s;
    s.events = events.size();
    s.final_status = std::string(to_string(SessionStatus::AwaitingStances));
    for (const auto& e : events) {
        const json& p = e.payload;
        switch (e.type) {
        case EventType::SessionCreated:
            s.session_id = p.value("session_id", std::string{});
            s.dilemma_id = p.value("dilemma", json::object()).value("id", std::string{});
            break;
        case EventType::AgentPositioned:
            s.agent_stance = p.value("stance", std::string{});
            s.positioning_mode = p.value("mode", std::string{});
            s.strength_trajectory.push_back(p.value("opinion_strength", 0.0));
            s.final_status = std::string(to_string(SessionStatus::Active));
            break;
        case EventType::UtterancePosted: ++s.human_turns; break;
        case EventType::AgentSpoke: ++s.agent_turns; break;
        case EventType::ThoughtsEvaluated:
            if (p.value("outcome", json::object()).value("kind", std::string{}) == "Silence") ++s.silences;
            break;
        case EventType::OpinionAdjusted: s.strength_trajectory.push_back(p.value("new_strength", 0.0)); break;
        case EventType::Concession: s.conceded = true; break;
        case EventType::PhaseChanged: s.phase_changes.push_back(p.value("trigger_seq", std::uint64_t{0})); break;
        case EventType::SessionClosed: s.final_status = std::string(to_string(SessionStatus::Closed)); break;
        default: break;
        }
    }
    return s;
}

} // namespace peer
