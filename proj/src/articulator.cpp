#include "peer/articulator.hpp"

#include <cctype>

#include "peer/error.hpp"
#include "peer/provider.hpp"

namespace peer {

void ArticulationPolicy::validate() const {
    if (!(threshold >= 1.0 && threshold <= 5.0)) {
        throw validation_error("articulation threshold must be in [1, 5]");
    }
    if (!(p_general >= 0.0 && p_general <= 1.0)) {
        throw validation_error("p_general must be in [0, 1]");
    }
}

namespace {

// Higher motivation first, then lower id.
bool preferred(const EvaluatedThought& a, const EvaluatedThought& b) {
    if (a.breakdown.motivation != b.breakdown.motivation) {
        return a.breakdown.motivation > b.breakdown.motivation;
    }
    return a.thought.id < b.thought.id;
}

std::string_view frame_for(const ThoughtKind& kind) {
    const auto move = kind.move();
    if (!move) {
        return "Hmm, I feel like {}.";
    }
    switch (*move) {
    case TalkMove::Challenge: return "Hold on, {}.";
    case TalkMove::CounterArgument: return "I see it differently: {}.";
    case TalkMove::JustificationRequest: return "Can I ask, {}?";
    case TalkMove::Extension: return "Building on that, {}.";
    case TalkMove::Integration: return "What if we put these together: {}.";
    case TalkMove::PerspectiveTaking: return "Let's look at it from another side: {}.";
    case TalkMove::ConsensusProbe: return "So where are we landing, {}?";
    case TalkMove::ConcessionAcknowledgment: return "Honestly, {}.";
    }
    return "{}.";
}

std::string trimmed_content(const std::string& content) {
    const auto first = content.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) {
        return {};
    }
    auto last = content.find_last_not_of(" \t\r\n.?!");
    if (last == std::string::npos || last < first) {
        return content.substr(first);
    }
    return content.substr(first, last - first + 1);
}

} // namespace

SelectionOutcome select_thought(std::span<const EvaluatedThought> evaluated,
                                const ArticulationPolicy& policy, Rng& rng) {
    policy.validate();
    if (evaluated.empty()) {
        return Silence{std::string(silence_no_candidates)};
    }

    const EvaluatedThought* best_strategic = nullptr;
    for (const auto& e : evaluated) {
        if (!e.thought.kind.is_strategic() || e.breakdown.gated ||
            e.breakdown.motivation < policy.threshold) {
            continue;
        }
        if (!best_strategic || preferred(e, *best_strategic)) {
            best_strategic = &e;
        }
    }
    if (best_strategic) {
        return Speak{best_strategic->thought.id, {}};
    }

    if (!rng.bernoulli(policy.p_general)) {
        return Silence{std::string(silence_below_threshold)};
    }
    const EvaluatedThought* best_general = nullptr;
    for (const auto& e : evaluated) {
        if (e.thought.kind.is_general() && (!best_general || preferred(e, *best_general))) {
            best_general = &e;
        }
    }
    if (!best_general) {
        return Silence{std::string(silence_no_general)};
    }
    return Speak{best_general->thought.id, {}};
}

std::optional<AcknowledgmentClause> acknowledgment_for(ShiftNotice notice) noexcept {
    switch (notice) {
    case ShiftNotice::None: return std::nullopt;
    case ShiftNotice::Adjusted:
        return AcknowledgmentClause{"ack.adjusted",
                                    "Okay, you've made me a bit less sure of my position."};
    case ShiftNotice::Conceded:
        return AcknowledgmentClause{
            "ack.concession", "I have to admit, your arguments have really shifted where I stand."};
    }
    return std::nullopt;
}

std::string render_template(const std::string& content, const ThoughtKind& kind,
                            ShiftNotice notice) {
    const std::string body = trimmed_content(content);
    if (body.empty()) {
        throw Error(ErrorCode::Internal, "cannot articulate a thought without content");
    }
    std::string frame(frame_for(kind));
    std::string text = frame.replace(frame.find("{}"), 2, body);
    text[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(text[0])));
    if (auto clause = acknowledgment_for(notice)) {
        text = std::string(clause->text) + " " + text;
    }
    return text;
}

Articulation articulate(const Thought& thought, const AgentPersona& persona,
                        const DeliberationContext& ctx, Provider& provider) {
    if (!has_content(thought.content)) {
        throw Error(ErrorCode::Internal, "precondition violated: selected thought has no content");
    }
    const auto clause = acknowledgment_for(ctx.pending_shift);

    Articulation out;
    if (clause) {
        out.clause_id = std::string(clause->id);
    }

    ProviderRequest req;
    req.capability = Capability::Paraphrase;
    req.payload = {
        {"content", thought.content},
        {"kind", thought.kind.is_general() ? "General" : "Strategic"},
        {"move", thought.kind.move() ? nlohmann::json(std::string(to_string(*thought.kind.move())))
                                     : nlohmann::json(nullptr)},
        {"persona",
         {{"name", persona.name}, {"tone", persona.tone}, {"self_description", persona.self_description}}},
        {"pending_shift", std::string(to_string(ctx.pending_shift))},
        {"acknowledgment", clause ? nlohmann::json(std::string(clause->text)) : nlohmann::json(nullptr)},
        {"dilemma", ctx.dilemma.prompt},
    };
    req.timeout = ctx.provider_timeout;
    req.trace_id = "paraphrase:" + thought.id.str();

    try {
        const auto response = provider.call(req);
        out.text = response.result.at("text").get<std::string>();
        out.source = RenderSource::Provider;
        if (clause && out.text.find(clause->text) == std::string::npos) {
            out.text = std::string(clause->text) + " " + out.text;
        }
    } catch (const std::exception&) {
        out.text = render_template(thought.content, thought.kind, ctx.pending_shift);
        out.source = RenderSource::Template;
    }
    return out;
}

} // namespace peer
