#pragma once

#include <array>
#include <optional>
#include <set>
#include <string>
#include <string_view>

namespace peer {

/// The ten basic human values used to tag value-laden utterance content.
enum class SchwartzValue {
    SelfDirection,
    Stimulation,
    Hedonism,
    Achievement,
    Power,
    Security,
    Conformity,
    Tradition,
    Benevolence,
    Universalism,
};

inline constexpr std::array<SchwartzValue, 10> all_schwartz_values{
    SchwartzValue::SelfDirection, SchwartzValue::Stimulation, SchwartzValue::Hedonism,
    SchwartzValue::Achievement,   SchwartzValue::Power,       SchwartzValue::Security,
    SchwartzValue::Conformity,    SchwartzValue::Tradition,   SchwartzValue::Benevolence,
    SchwartzValue::Universalism,
};

/// Transactive talk moves. Closed set; the evaluator's gate table is total over it.
enum class TalkMove {
    Challenge,
    CounterArgument,
    JustificationRequest,
    Extension,
    Integration,
    PerspectiveTaking,
    ConsensusProbe,
    ConcessionAcknowledgment,
};

inline constexpr std::array<TalkMove, 8> all_talk_moves{
    TalkMove::Challenge,         TalkMove::CounterArgument,
    TalkMove::JustificationRequest, TalkMove::Extension,
    TalkMove::Integration,       TalkMove::PerspectiveTaking,
    TalkMove::ConsensusProbe,    TalkMove::ConcessionAcknowledgment,
};

using ValueSet = std::set<SchwartzValue>;
using TalkMoveSet = std::set<TalkMove>;

std::string_view to_string(SchwartzValue value) noexcept;
std::string_view to_string(TalkMove move) noexcept;

std::optional<SchwartzValue> parse_schwartz_value(std::string_view name) noexcept;
std::optional<TalkMove> parse_talk_move(std::string_view name) noexcept;

/// Lower-case phrase used when a value is spoken about ("caring for others").
std::string_view spoken_name(SchwartzValue value) noexcept;

std::size_t overlap(const ValueSet& a, const ValueSet& b);

} // namespace peer
