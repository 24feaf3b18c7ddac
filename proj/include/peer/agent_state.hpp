#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "peer/context.hpp"
#include "peer/domain.hpp"
#include "peer/values.hpp"

namespace peer {

struct AgentPersona {
    std::string name;
    std::vector<std::string> tone;
    std::string self_description;

    static AgentPersona default_peer();
    static AgentPersona load(const std::filesystem::path& path);

    bool operator==(const AgentPersona&) const = default;
};

struct MemoryEntry {
    std::uint64_t seq = 0;
    std::string summary;
    double salience = 0.0;
    ValueSet value_tags;

    bool operator==(const MemoryEntry&) const = default;
};

struct AgentState {
    Stance position = Stance::Agree;
    double opinion_strength = 3.0;
    AgentPersona persona;
    std::vector<MemoryEntry> memory;
    bool conceded = false;

    bool operator==(const AgentState&) const = default;
};

AgentState init_agent_state(const AgentPositioning& positioning, const OpinionState& p1,
                            const OpinionState& p2, AgentPersona persona);

struct PersuasionConfig {
    double sensitivity = 1.0;
    double concession_threshold = 0.7;
};

struct OpinionAdjustment {
    std::uint64_t trigger_seq = 0;
    double score = 0.0;
    double old_strength = 0.0;
    double new_strength = 0.0;
};

struct PersuasionOutcome {
    AgentState state;
    std::optional<OpinionAdjustment> adjusted;
    bool concession = false;
};

/// Lowers strength by sensitivity * score (clamped to [1, 5]). At the floor, a
/// score at or above the concession threshold latches `conceded`. Strength
/// never rises and position never changes.
PersuasionOutcome apply_persuasion(const AgentState& state, double persuasion_score,
                                   std::uint64_t trigger_seq,
                                   const PersuasionConfig& config = {});

/// Offline memory summary: whitespace-collapsed text cut at a word boundary.
std::string summarize_offline(const std::string& text, std::size_t max_chars = 120);

/// Appends a memory for `utterance`. A second store for the same seq is a no-op.
AgentState store_memory(const AgentState& state, const Utterance& utterance, double salience,
                        std::optional<std::string> summary = std::nullopt);

/// Top-k by (tag overlap, salience, recency), all descending.
std::vector<MemoryEntry> retrieve_memories(const AgentState& state, const ValueSet& query_tags,
                                           std::size_t k);

} // namespace peer
