#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>

#include "peer/evaluator.hpp"
#include "peer/rng.hpp"
#include "peer/thought.hpp"

namespace peer {

class Provider;

struct ArticulationPolicy {
    double threshold = 3.5;
    double p_general = 0.6;
    std::uint64_t rng_seed = 0;

    void validate() const;
};

struct Speak {
    ThoughtId thought;
    std::string rendered_text;

    bool operator==(const Speak&) const = default;
};

struct Silence {
    std::string reason;

    bool operator==(const Silence&) const = default;
};

using SelectionOutcome = std::variant<Speak, Silence>;

inline constexpr std::string_view silence_no_candidates = "no candidates";
inline constexpr std::string_view silence_below_threshold = "below threshold";
inline constexpr std::string_view silence_no_general = "no general thought";

/// Ungated strategic thoughts at or above the threshold win by motivation
/// (lowest id on ties). Otherwise one coin with probability p_general decides
/// whether the best general thought is spoken. The coin is drawn whenever the
/// list is non-empty and no strategic thought qualifies.
SelectionOutcome select_thought(std::span<const EvaluatedThought> evaluated,
                                const ArticulationPolicy& policy, Rng& rng);

/// Acknowledgment clause prefixed to the first turn after an opinion shift.
struct AcknowledgmentClause {
    std::string_view id;
    std::string_view text;
};

std::optional<AcknowledgmentClause> acknowledgment_for(ShiftNotice notice) noexcept;

/// Deterministic peer-toned rendering: a per-move frame around the content,
/// with the acknowledgment clause in front when a shift is pending.
std::string render_template(const std::string& content, const ThoughtKind& kind,
                            ShiftNotice notice);

enum class RenderSource { Provider, Template };

struct Articulation {
    std::string text;
    RenderSource source = RenderSource::Template;
    std::optional<std::string> clause_id;
};

/// Paraphrases through the provider, falling back to `render_template` on
/// failure. The acknowledgment clause is enforced on whatever comes back.
Articulation articulate(const Thought& thought, const AgentPersona& persona,
                        const DeliberationContext& ctx, Provider& provider);

} // namespace peer
