#include "peer/context.hpp"

#include <algorithm>

#include "peer/error.hpp"
#include "peer/provider.hpp"

namespace peer {

std::string_view to_string(Phase p) noexcept {
    return p == Phase::Early ? "Early" : "Late";
}

std::optional<Phase> parse_phase(std::string_view name) noexcept {
    if (name == "Early") return Phase::Early;
    if (name == "Late") return Phase::Late;
    return std::nullopt;
}

Phase update_phase(int turn_index, int boundary) {
    if (turn_index < 0) {
        throw validation_error("turn index must be non-negative");
    }
    return turn_index < boundary ? Phase::Early : Phase::Late;
}

PlayerStrengthEstimate update_player_strength(const PlayerStrengthEstimate& estimate,
                                              const Utterance& utterance,
                                              double assertiveness, double beta) {
    if (utterance.speaker != estimate.player) {
        throw validation_error("utterance speaker " + utterance.speaker.str() +
                               " does not match estimate for " + estimate.player.str());
    }
    if (!(assertiveness >= 0.0 && assertiveness <= 1.0)) {
        throw validation_error("assertiveness must be in [0, 1]");
    }
    PlayerStrengthEstimate next = estimate;
    next.estimate = std::clamp(estimate.estimate + beta * (2.0 * assertiveness - 1.0), 1.0, 5.0);
    next.last_updated_seq = utterance.seq;
    return next;
}

bool has_content(const std::string& text) {
    return text.find_first_not_of(" \t\r\n\f\v") != std::string::npos;
}

void Transcript::append(Utterance utterance) {
    if (utterance.seq != next_seq()) {
        throw validation_error("utterance seq " + std::to_string(utterance.seq) +
                               " out of order, expected " + std::to_string(next_seq()));
    }
    if (!has_content(utterance.text)) {
        throw validation_error("utterance text is empty");
    }
    utterances_.push_back(std::move(utterance));
}

const Utterance* Transcript::find(std::uint64_t seq) const {
    if (seq == 0 || seq > utterances_.size()) {
        return nullptr;
    }
    return &utterances_[seq - 1];
}

std::vector<Utterance> Transcript::window(std::size_t width) const {
    const std::size_t start = utterances_.size() > width ? utterances_.size() - width : 0;
    return {utterances_.begin() + static_cast<std::ptrdiff_t>(start), utterances_.end()};
}

UtteranceAnalysis classify_utterance(const std::string& text, Provider& provider,
                                     const std::string& trace_id,
                                     std::chrono::milliseconds timeout) {
    UtteranceAnalysis analysis;
    try {
        ProviderRequest req;
        req.capability = Capability::ClassifyValues;
        req.payload = {{"text", text}};
        req.trace_id = trace_id;
        req.timeout = timeout;
        const auto response = provider.call(req);
        for (const auto& name : response.result.at("values")) {
            if (auto v = parse_schwartz_value(name.get<std::string>())) {
                analysis.value_tags.insert(*v);
            }
        }
        for (const auto& name : response.result.at("talk_moves")) {
            if (auto m = parse_talk_move(name.get<std::string>())) {
                analysis.talk_moves.insert(*m);
            }
        }
    } catch (const std::exception& e) {
        analysis.value_tags.clear();
        analysis.talk_moves.clear();
        analysis.warning = std::string("value classification failed: ") + e.what();
    }
    return analysis;
}

Utterance ingest_utterance(Transcript& transcript, const PlayerId& speaker,
                           const std::string& text, Provider& provider,
                           std::vector<std::string>* warnings) {
    if (!has_content(text)) {
        throw validation_error("utterance text is empty");
    }
    if (speaker.empty()) {
        throw validation_error("utterance has no speaker");
    }
    auto analysis = classify_utterance(text, provider,
                                       "ingest:" + std::to_string(transcript.next_seq()));
    if (analysis.warning && warnings) {
        warnings->push_back(*analysis.warning);
    }
    Utterance u{transcript.next_seq(), speaker, text, std::move(analysis.value_tags),
                std::move(analysis.talk_moves)};
    transcript.append(u);
    return u;
}

} // namespace peer
