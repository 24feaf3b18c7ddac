#include "peer/thought.hpp"

#include <charconv>

#include "peer/error.hpp"
#include "peer/provider.hpp"

namespace peer {

std::string ThoughtId::str() const {
    return "t" + std::to_string(round) + "." + std::to_string(index);
}

std::optional<ThoughtId> ThoughtId::parse(std::string_view text) {
    if (text.size() < 4 || text.front() != 't') {
        return std::nullopt;
    }
    const auto dot = text.find('.');
    if (dot == std::string_view::npos) {
        return std::nullopt;
    }
    ThoughtId id;
    const char* first = text.data() + 1;
    const char* mid = text.data() + dot;
    const char* last = text.data() + text.size();
    auto r1 = std::from_chars(first, mid, id.round);
    if (r1.ec != std::errc{} || r1.ptr != mid) {
        return std::nullopt;
    }
    auto r2 = std::from_chars(mid + 1, last, id.index);
    if (r2.ec != std::errc{} || r2.ptr != last || mid + 1 == last) {
        return std::nullopt;
    }
    return id;
}

std::string_view to_string(ShiftNotice s) noexcept {
    switch (s) {
    case ShiftNotice::None: return "None";
    case ShiftNotice::Adjusted: return "Adjusted";
    case ShiftNotice::Conceded: return "Conceded";
    }
    return "None";
}

std::optional<ShiftNotice> parse_shift_notice(std::string_view name) noexcept {
    if (name == "None") return ShiftNotice::None;
    if (name == "Adjusted") return ShiftNotice::Adjusted;
    if (name == "Conceded") return ShiftNotice::Conceded;
    return std::nullopt;
}

const Utterance* DeliberationContext::trigger() const {
    for (const auto& u : transcript_window) {
        if (u.seq == triggering_seq) {
            return &u;
        }
    }
    return nullptr;
}

ValueSet DeliberationContext::voiced_before_trigger() const {
    ValueSet voiced;
    for (const auto& u : transcript_window) {
        if (u.seq < triggering_seq) {
            voiced.insert(u.value_tags.begin(), u.value_tags.end());
        }
    }
    return voiced;
}

double DeliberationContext::mean_player_estimate() const {
    if (player_estimates.empty()) {
        return 3.0;
    }
    double sum = 0.0;
    for (const auto& e : player_estimates) {
        sum += e.estimate;
    }
    return sum / static_cast<double>(player_estimates.size());
}

std::string DeliberationContext::display_name(const PlayerId& id) const {
    auto it = player_names.find(id);
    return it != player_names.end() && !it->second.empty() ? it->second : id.str();
}

bool move_targets_speaker(TalkMove move) noexcept {
    switch (move) {
    case TalkMove::Challenge:
    case TalkMove::CounterArgument:
    case TalkMove::JustificationRequest:
    case TalkMove::Extension:
        return true;
    default:
        return false;
    }
}

namespace {

nlohmann::json tags_json(const ValueSet& tags) {
    auto arr = nlohmann::json::array();
    for (auto v : tags) {
        arr.push_back(std::string(to_string(v)));
    }
    return arr;
}

nlohmann::json generation_payload(const DeliberationContext& ctx, const GenerationBudget& budget) {
    nlohmann::json trigger = nullptr;
    if (const Utterance* t = ctx.trigger()) {
        trigger = {{"seq", t->seq},
                   {"speaker", t->speaker.str()},
                   {"speaker_name", ctx.display_name(t->speaker)},
                   {"text", t->text},
                   {"value_tags", tags_json(t->value_tags)}};
    }
    auto window = nlohmann::json::array();
    for (const auto& u : ctx.transcript_window) {
        window.push_back({{"seq", u.seq},
                          {"speaker", u.speaker.str()},
                          {"speaker_name", ctx.display_name(u.speaker)},
                          {"text", u.text}});
    }
    auto memories = nlohmann::json::array();
    for (const auto& m : ctx.retrieved_memories) {
        memories.push_back(
            {{"seq", m.seq}, {"summary", m.summary}, {"value_tags", tags_json(m.value_tags)}});
    }
    return {
        {"dilemma",
         {{"id", ctx.dilemma.id}, {"prompt", ctx.dilemma.prompt}, {"topic", ctx.dilemma.topic_phrase()}}},
        {"agent",
         {{"position", std::string(to_string(ctx.agent.position))},
          {"strength", ctx.agent.opinion_strength},
          {"conceded", ctx.agent.conceded},
          {"persona", ctx.agent.persona.name}}},
        {"phase", std::string(to_string(ctx.phase))},
        {"trigger", trigger},
        {"voiced_value_tags", tags_json(ctx.voiced_before_trigger())},
        {"window", window},
        {"memories", memories},
        {"pending_shift", std::string(to_string(ctx.pending_shift))},
        {"n_general", budget.n_general},
        {"n_strategic", budget.n_strategic},
        {"seed", ctx.seed},
    };
}

std::optional<Thought> parse_candidate(const nlohmann::json& j, const DeliberationContext& ctx) {
    if (!j.is_object()) {
        return std::nullopt;
    }
    Thought t;
    const auto kind = j.value("kind", std::string{});
    if (kind == "General") {
        t.kind = ThoughtKind::general();
    } else if (kind == "Strategic") {
        auto move = parse_talk_move(j.value("move", std::string{}));
        if (!move) {
            return std::nullopt;
        }
        if (*move == TalkMove::ConcessionAcknowledgment && !ctx.agent.conceded &&
            ctx.pending_shift == ShiftNotice::None) {
            return std::nullopt;
        }
        t.kind = ThoughtKind::strategic(*move);
    } else {
        return std::nullopt;
    }
    if (!j.contains("content") || !j["content"].is_string() ||
        !has_content(j["content"].get<std::string>())) {
        return std::nullopt;
    }
    t.content = j["content"].get<std::string>();
    if (j.contains("value_tags") && j["value_tags"].is_array()) {
        for (const auto& name : j["value_tags"]) {
            if (name.is_string()) {
                if (auto v = parse_schwartz_value(name.get<std::string>())) {
                    t.grounding.value_tags.insert(*v);
                }
            }
        }
    }
    if (j.contains("template_id") && j["template_id"].is_string()) {
        t.template_id = j["template_id"].get<std::string>();
    }
    if (j.contains("target") && j["target"].is_string()) {
        PlayerId target(j["target"].get<std::string>());
        if (ctx.player_names.count(target) != 0) {
            t.target = std::move(target);
        }
    }
    for (const auto& m : ctx.retrieved_memories) {
        t.grounding.memory_seqs.push_back(m.seq);
    }
    return t;
}

} // namespace

std::vector<Thought> generate_thoughts(const DeliberationContext& ctx, Provider& provider,
                                       const GenerationBudget& budget) {
    if (budget.n_general < 0 || budget.n_strategic < 0 ||
        budget.n_general + budget.n_strategic < 1) {
        throw validation_error("generation budget must request at least one thought");
    }

    ProviderRequest req;
    req.capability = Capability::GenerateThoughts;
    req.payload = generation_payload(ctx, budget);
    req.timeout = ctx.provider_timeout;
    req.trace_id = "generate:" + std::to_string(ctx.round);

    std::optional<ProviderResponse> response;
    for (int attempt = 0; attempt < 2 && !response; ++attempt) {
        try {
            response = provider.call(req);
        } catch (const std::exception&) {
        }
    }
    std::vector<Thought> out;
    if (!response) {
        return out;
    }

    int general = 0;
    int strategic = 0;
    for (const auto& entry : response->result.at("thoughts")) {
        auto t = parse_candidate(entry, ctx);
        if (!t) {
            continue;
        }
        int& count = t->kind.is_general() ? general : strategic;
        const int cap = t->kind.is_general() ? budget.n_general : budget.n_strategic;
        if (count >= cap) {
            continue;
        }
        ++count;
        t->id = ThoughtId{ctx.round, static_cast<std::uint32_t>(out.size())};
        out.push_back(std::move(*t));
    }
    return out;
}

} // namespace peer
