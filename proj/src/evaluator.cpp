#include "peer/evaluator.hpp"

#include <algorithm>
#include <cmath>

#include "peer/error.hpp"
#include "peer/provider.hpp"

namespace peer {

void MotivationWeights::validate() const {
    if (relevance < 0.0 || information_gap < 0.0 || expected_impact < 0.0) {
        throw validation_error("motivation weights must be non-negative");
    }
    if (std::abs(relevance + information_gap + expected_impact - 1.0) > 1e-9) {
        throw validation_error("motivation weights must sum to 1");
    }
}

double motivation_from(const SubScores& s, const MotivationWeights& w) {
    return 1.0 + 4.0 * (w.relevance * s.relevance + w.information_gap * s.information_gap +
                        w.expected_impact * s.expected_impact);
}

std::string_view to_string(ScoreSource s) noexcept {
    return s == ScoreSource::Provider ? "provider" : "heuristic";
}

SubScores heuristic_subscores(const HeuristicInputs& in) {
    SubScores s;

    ValueSet all = in.thought_tags;
    all.insert(in.trigger_tags.begin(), in.trigger_tags.end());
    if (!all.empty()) {
        s.relevance = static_cast<double>(overlap(in.thought_tags, in.trigger_tags)) /
                      static_cast<double>(all.size());
    }

    if (!in.thought_tags.empty()) {
        const double voiced = static_cast<double>(overlap(in.thought_tags, in.voiced_tags));
        s.information_gap = 1.0 - voiced / static_cast<double>(in.thought_tags.size());
    }

    s.expected_impact =
        std::clamp(std::abs(in.agent_strength - in.mean_player_estimate) / 4.0, 0.0, 1.0);
    return s;
}

HeuristicInputs heuristic_inputs(const Thought& thought, const DeliberationContext& ctx) {
    HeuristicInputs in;
    in.thought_tags = thought.grounding.value_tags;
    if (const Utterance* t = ctx.trigger()) {
        in.trigger_tags = t->value_tags;
    }
    in.voiced_tags = ctx.voiced_before_trigger();
    in.agent_strength = ctx.agent.opinion_strength;
    in.mean_player_estimate = ctx.mean_player_estimate();
    return in;
}

namespace {

nlohmann::json tags_json(const ValueSet& tags) {
    auto arr = nlohmann::json::array();
    for (auto v : tags) {
        arr.push_back(std::string(to_string(v)));
    }
    return arr;
}

MotivationBreakdown breakdown_of(const SubScores& s, const MotivationWeights& w,
                                 ScoreSource source) {
    MotivationBreakdown b;
    b.relevance = s.relevance;
    b.information_gap = s.information_gap;
    b.expected_impact = s.expected_impact;
    b.motivation = motivation_from(s, w);
    b.source = source;
    return b;
}

} // namespace

MotivationBreakdown score_thought(const Thought& thought, const DeliberationContext& ctx,
                                  Provider& provider, const MotivationWeights& weights) {
    weights.validate();
    const HeuristicInputs in = heuristic_inputs(thought, ctx);

    nlohmann::json thought_json = {
        {"kind", thought.kind.is_general() ? "General" : "Strategic"},
        {"content", thought.content},
        {"value_tags", tags_json(thought.grounding.value_tags)},
    };
    if (auto move = thought.kind.move()) {
        thought_json["move"] = std::string(to_string(*move));
    }
    ProviderRequest req;
    req.capability = Capability::ScoreThought;
    req.payload = {
        {"thought", thought_json},
        {"trigger_value_tags", tags_json(in.trigger_tags)},
        {"voiced_value_tags", tags_json(in.voiced_tags)},
        {"agent_strength", in.agent_strength},
        {"mean_player_estimate", in.mean_player_estimate},
        {"agent_position", std::string(to_string(ctx.agent.position))},
        {"phase", std::string(to_string(ctx.phase))},
        {"dilemma", ctx.dilemma.prompt},
    };
    req.timeout = ctx.provider_timeout;
    req.trace_id = "score:" + thought.id.str();

    try {
        const auto response = provider.call(req);
        SubScores s{response.result.at("relevance").get<double>(),
                    response.result.at("information_gap").get<double>(),
                    response.result.at("expected_impact").get<double>()};
        return breakdown_of(s, weights, ScoreSource::Provider);
    } catch (const std::exception&) {
        return breakdown_of(heuristic_subscores(in), weights, ScoreSource::Heuristic);
    }
}

GateDecision gate_strategic(const Thought& thought, Phase phase,
                            std::span<const PlayerStrengthEstimate> player_estimates,
                            const AgentState& /*agent*/, double collapsed_strength_floor) {
    const auto move = thought.kind.move();
    if (!move) {
        throw validation_error("gating applies to strategic thoughts only");
    }
    if (*move == TalkMove::ConcessionAcknowledgment) {
        return {};
    }
    if (phase == Phase::Early) {
        if (*move == TalkMove::Challenge || *move == TalkMove::CounterArgument) {
            return {true, "confrontational move before Early/Late boundary"};
        }
        if (*move == TalkMove::ConsensusProbe || *move == TalkMove::Integration) {
            return {true, "convergence move before Early/Late boundary"};
        }
    }
    if (thought.target) {
        for (const auto& e : player_estimates) {
            if (e.player == *thought.target && e.estimate <= collapsed_strength_floor) {
                return {true, "avoid piling on a collapsed position"};
            }
        }
    }
    return {};
}

std::vector<EvaluatedThought> evaluate_all(std::span<const Thought> thoughts,
                                           const DeliberationContext& ctx, Provider& provider,
                                           const EvaluatorConfig& config) {
    config.weights.validate();
    std::vector<EvaluatedThought> out;
    out.reserve(thoughts.size());
    for (const auto& thought : thoughts) {
        EvaluatedThought e{thought, score_thought(thought, ctx, provider, config.weights)};
        if (thought.kind.is_strategic()) {
            auto gate = gate_strategic(thought, ctx.phase, ctx.player_estimates, ctx.agent,
                                       config.collapsed_strength_floor);
            e.breakdown.gated = gate.gated;
            e.breakdown.gate_reason = std::move(gate.reason);
        }
        e.thought.motivation = e.breakdown.motivation;
        out.push_back(std::move(e));
    }
    return out;
}

} // namespace peer
