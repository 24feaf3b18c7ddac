#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "peer/thought.hpp"

namespace peer {

class Provider;

struct MotivationWeights {
    double relevance = 1.0 / 3.0;
    double information_gap = 1.0 / 3.0;
    double expected_impact = 1.0 / 3.0;

    /// Non-negative and summing to 1 within 1e-9, else a validation error.
    void validate() const;
};

struct SubScores {
    double relevance = 0.0;
    double information_gap = 0.0;
    double expected_impact = 0.0;
};

/// 1 + 4 * (weighted sum of sub-scores). Lands in [1, 5] for sub-scores in [0, 1].
double motivation_from(const SubScores& scores, const MotivationWeights& weights);

enum class ScoreSource { Provider, Heuristic };

std::string_view to_string(ScoreSource s) noexcept;

struct MotivationBreakdown {
    double relevance = 0.0;
    double information_gap = 0.0;
    double expected_impact = 0.0;
    double motivation = 1.0;
    bool gated = false;
    std::optional<std::string> gate_reason;
    ScoreSource source = ScoreSource::Heuristic;

    bool operator==(const MotivationBreakdown&) const = default;
};

/// Inputs of the lexical scoring heuristics, shared with the mock provider.
struct HeuristicInputs {
    ValueSet thought_tags;
    ValueSet trigger_tags;
    ValueSet voiced_tags;
    double agent_strength = 3.0;
    double mean_player_estimate = 3.0;
};

/// relevance: Jaccard overlap of thought and trigger tags (0 if both empty).
/// information_gap: share of the thought's tags not yet voiced (0 if untagged).
/// expected_impact: |agent strength - mean player estimate| / 4.
SubScores heuristic_subscores(const HeuristicInputs& in);

HeuristicInputs heuristic_inputs(const Thought& thought, const DeliberationContext& ctx);

MotivationBreakdown score_thought(const Thought& thought, const DeliberationContext& ctx,
                                  Provider& provider, const MotivationWeights& weights);

struct GateDecision {
    bool gated = false;
    std::optional<std::string> reason;
};

inline constexpr double default_collapsed_strength_floor = 1.5;

/// Phase and strength rules for strategic thoughts:
///  - Challenge and CounterArgument wait for the Late phase;
///  - ConsensusProbe and Integration wait for the Late phase;
///  - a move aimed at a player whose estimate is at or below the floor is held back;
///  - ConcessionAcknowledgment always passes.
GateDecision gate_strategic(const Thought& thought, Phase phase,
                            std::span<const PlayerStrengthEstimate> player_estimates,
                            const AgentState& agent,
                            double collapsed_strength_floor = default_collapsed_strength_floor);

struct EvaluatorConfig {
    MotivationWeights weights;
    double collapsed_strength_floor = default_collapsed_strength_floor;
};

struct EvaluatedThought {
    Thought thought;
    MotivationBreakdown breakdown;
};

/// Scores every thought and gates the strategic ones; output order matches input.
std::vector<EvaluatedThought> evaluate_all(std::span<const Thought> thoughts,
                                           const DeliberationContext& ctx, Provider& provider,
                                           const EvaluatorConfig& config = {});

} // namespace peer
