#include "peer/agent_state.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "peer/error.hpp"

namespace peer {

AgentPersona AgentPersona::default_peer() {
    return {"Sam",
            {"curious", "casual", "candid"},
            "a fellow player who thinks out loud, pushes back when something seems off, "
            "and admits it when a good argument lands"};
}

AgentPersona AgentPersona::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw not_found("cannot open persona file " + path.string());
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
        AgentPersona p;
        p.name = j.at("name").get<std::string>();
        p.tone = j.value("tone", std::vector<std::string>{});
        p.self_description = j.value("self_description", std::string{});
        if (p.name.empty()) {
            throw validation_error("persona name is empty");
        }
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw validation_error("persona file " + path.string() + ": " + e.what());
    }
}

AgentState init_agent_state(const AgentPositioning& positioning, const OpinionState& p1,
                            const OpinionState& p2, AgentPersona persona) {
    if (persona.name.empty()) {
        throw validation_error("persona name is empty");
    }
    AgentState state;
    state.position = positioning.stance;
    state.opinion_strength = initial_opinion_strength(p1, p2);
    state.persona = std::move(persona);
    return state;
}

PersuasionOutcome apply_persuasion(const AgentState& state, double persuasion_score,
                                   std::uint64_t trigger_seq, const PersuasionConfig& config) {
    if (!(persuasion_score >= 0.0 && persuasion_score <= 1.0)) {
        throw validation_error("persuasion score must be in [0, 1]");
    }
    PersuasionOutcome out{state, std::nullopt, false};
    if (persuasion_score == 0.0) {
        return out;
    }

    const double old_strength = state.opinion_strength;
    const double new_strength =
        std::clamp(old_strength - config.sensitivity * persuasion_score, 1.0, 5.0);
    if (new_strength < old_strength) {
        out.state.opinion_strength = new_strength;
        out.adjusted = OpinionAdjustment{trigger_seq, persuasion_score, old_strength, new_strength};
    }
    if (old_strength <= 1.0 && !state.conceded &&
        persuasion_score >= config.concession_threshold) {
        out.state.conceded = true;
        out.concession = true;
    }
    return out;
}

std::string summarize_offline(const std::string& text, std::size_t max_chars) {
    std::istringstream words(text);
    std::string word;
    std::string out;
    while (words >> word) {
        const std::size_t extra = out.empty() ? word.size() : word.size() + 1;
        if (out.size() + extra > max_chars) {
            if (out.empty()) {
                out = word.substr(0, max_chars);
            }
            out += "...";
            return out;
        }
        if (!out.empty()) {
            out += ' ';
        }
        out += word;
    }
    return out;
}

AgentState store_memory(const AgentState& state, const Utterance& utterance, double salience,
                        std::optional<std::string> summary) {
    if (!(salience >= 0.0 && salience <= 1.0)) {
        throw validation_error("salience must be in [0, 1]");
    }
    const bool stored = std::any_of(state.memory.begin(), state.memory.end(),
                                    [&](const MemoryEntry& m) { return m.seq == utterance.seq; });
    if (stored) {
        return state;
    }
    AgentState next = state;
    next.memory.push_back(MemoryEntry{utterance.seq,
                                      summary ? std::move(*summary) : summarize_offline(utterance.text),
                                      salience, utterance.value_tags});
    return next;
}

std::vector<MemoryEntry> retrieve_memories(const AgentState& state, const ValueSet& query_tags,
                                           std::size_t k) {
    if (k < 1) {
        throw validation_error("retrieval needs k >= 1");
    }
    struct Ranked {
        std::size_t overlap;
        const MemoryEntry* entry;
    };
    std::vector<Ranked> ranked;
    ranked.reserve(state.memory.size());
    for (const auto& m : state.memory) {
        ranked.push_back({overlap(m.value_tags, query_tags), &m});
    }
    const auto better = [](const Ranked& a, const Ranked& b) {
        if (a.overlap != b.overlap) return a.overlap > b.overlap;
        if (a.entry->salience != b.entry->salience) return a.entry->salience > b.entry->salience;
        return a.entry->seq > b.entry->seq;
    };
    const std::size_t n = std::min(k, ranked.size());
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(n),
                      ranked.end(), better);
    std::vector<MemoryEntry> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(*ranked[i].entry);
    }
    return out;
}

} // namespace peer
