#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "peer/domain.hpp"
#include "peer/values.hpp"

namespace peer {

class Provider;

struct Utterance {
    std::uint64_t seq = 0;
    PlayerId speaker;
    std::string text;
    ValueSet value_tags;
    TalkMoveSet talk_moves;

    bool operator==(const Utterance&) const = default;
};

enum class Phase { Early, Late };

std::string_view to_string(Phase p) noexcept;
std::optional<Phase> parse_phase(std::string_view name) noexcept;

struct PlayerStrengthEstimate {
    PlayerId player;
    double estimate = 3.0;
    std::uint64_t last_updated_seq = 0;

    bool operator==(const PlayerStrengthEstimate&) const = default;
};

/// Early while `turn_index < boundary`, Late from the boundary on.
Phase update_phase(int turn_index, int boundary);

/// Linear cue update: estimate + beta * (2 * assertiveness - 1), clamped to [1, 5].
PlayerStrengthEstimate update_player_strength(const PlayerStrengthEstimate& estimate,
                                              const Utterance& utterance,
                                              double assertiveness, double beta = 0.25);

/// Ordered utterance list with dense 1-based sequence numbers.
class Transcript {
public:
    std::uint64_t next_seq() const noexcept { return utterances_.size() + 1; }

    /// Appends; the utterance must carry `next_seq()` and non-blank text.
    void append(Utterance utterance);

    std::span<const Utterance> all() const noexcept { return utterances_; }
    std::size_t size() const noexcept { return utterances_.size(); }
    bool empty() const noexcept { return utterances_.empty(); }
    const Utterance& back() const { return utterances_.back(); }
    const Utterance* find(std::uint64_t seq) const;

    /// The last `width` utterances, oldest first.
    std::vector<Utterance> window(std::size_t width) const;

    bool operator==(const Transcript&) const = default;

private:
    std::vector<Utterance> utterances_;
};

/// Provider-side analysis of one utterance. A failed classifier leaves the
/// sets empty and fills `warning`.
struct UtteranceAnalysis {
    ValueSet value_tags;
    TalkMoveSet talk_moves;
    std::optional<std::string> warning;
};

UtteranceAnalysis classify_utterance(const std::string& text, Provider& provider,
                                     const std::string& trace_id,
                                     std::chrono::milliseconds timeout = std::chrono::milliseconds{10000});

/// Validates, classifies and appends a raw turn to `transcript`.
Utterance ingest_utterance(Transcript& transcript, const PlayerId& speaker,
                           const std::string& text, Provider& provider,
                           std::vector<std::string>* warnings = nullptr);

/// True when `text` has at least one non-whitespace character.
bool has_content(const std::string& text);

} // namespace peer
