#include "peer/events.hpp"

#include <fstream>
#include <sstream>

#include "peer/error.hpp"

namespace peer {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 11> event_names{
    "SessionCreated",    "PlayerJoined", "StanceSubmitted", "AgentPositioned",
    "UtterancePosted",   "ThoughtsEvaluated", "AgentSpoke", "OpinionAdjusted",
    "Concession",        "PhaseChanged", "SessionClosed",
};

template <typename T>
T require(std::optional<T> value, const std::string& what) {
    if (!value) throw validation_error("unknown " + what);
    return *value;
}

} // namespace

std::string_view to_string(EventType t) noexcept {
    return event_names[static_cast<std::size_t>(t)];
}

std::optional<EventType> parse_event_type(std::string_view name) noexcept {
    for (std::size_t i = 0; i < event_names.size(); ++i) {
        if (event_names[i] == name) return static_cast<EventType>(i);
    }
    return std::nullopt;
}

std::string_view to_string(SessionStatus s) noexcept {
    switch (s) {
    case SessionStatus::AwaitingStances: return "AwaitingStances";
    case SessionStatus::Active: return "Active";
    case SessionStatus::Closed: return "Closed";
    }
    return "Closed";
}

json SessionEvent::to_json() const {
    return {{"seq", seq}, {"ts", ts}, {"type", std::string(peer::to_string(type))}, {"payload", payload}};
}

std::string SessionEvent::to_line() const {
    return to_json().dump();
}

SessionEvent SessionEvent::from_json(const json& j) {
    try {
        SessionEvent e;
        e.seq = j.at("seq").get<std::uint64_t>();
        e.ts = j.value("ts", std::string{});
        e.type = require(parse_event_type(j.at("type").get<std::string>()), "event type");
        e.payload = j.value("payload", json::object());
        return e;
    } catch (const json::exception& e) {
        throw validation_error(std::string("malformed event: ") + e.what());
    }
}

SessionEvent SessionEvent::from_line(const std::string& line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        throw validation_error(std::string("event line is not JSON: ") + e.what());
    }
    return from_json(j);
}

std::vector<SessionEvent> mask_timestamps(std::span<const SessionEvent> events) {
    std::vector<SessionEvent> out(events.begin(), events.end());
    for (auto& e : out) e.ts.clear();
    return out;
}

std::string to_jsonl(std::span<const SessionEvent> events) {
    std::string out;
    for (const auto& e : events) {
        out += e.to_line();
        out += '\n';
    }
    return out;
}

std::vector<SessionEvent> read_event_log(std::istream& in, bool tolerate_torn_tail) {
    std::vector<SessionEvent> events;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            events.push_back(SessionEvent::from_line(line));
        } catch (const Error& e) {
            const bool last_without_newline = in.eof();
            if (tolerate_torn_tail && last_without_newline) break;
            throw ReplayError(events.empty() ? 1 : events.back().seq + 1,
                              "line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return events;
}

std::vector<SessionEvent> read_event_log(const std::filesystem::path& path, bool tolerate_torn_tail) {
    std::ifstream in(path);
    if (!in) throw not_found("cannot open event log " + path.string());
    return read_event_log(in, tolerate_torn_tail);
}

// ---------------------------------------------------------------- payloads

json to_json(const ValueSet& values) {
    json arr = json::array();
    for (auto v : values) arr.push_back(std::string(to_string(v)));
    return arr;
}

ValueSet values_from_json(const json& j) {
    ValueSet out;
    for (const auto& name : j) {
        out.insert(require(parse_schwartz_value(name.get<std::string>()), "value tag"));
    }
    return out;
}

namespace {

json moves_json(const TalkMoveSet& moves) {
    json arr = json::array();
    for (auto m : moves) arr.push_back(std::string(to_string(m)));
    return arr;
}

TalkMoveSet moves_from_json(const json& j) {
    TalkMoveSet out;
    for (const auto& name : j) out.insert(require(parse_talk_move(name.get<std::string>()), "talk move"));
    return out;
}

} // namespace

json to_json(const Utterance& u) {
    return {{"seq", u.seq},
            {"speaker", u.speaker.str()},
            {"text", u.text},
            {"value_tags", to_json(u.value_tags)},
            {"talk_moves", moves_json(u.talk_moves)}};
}

Utterance utterance_from_json(const json& j) {
    Utterance u;
    u.seq = j.at("seq").get<std::uint64_t>();
    u.speaker = PlayerId(j.at("speaker").get<std::string>());
    u.text = j.at("text").get<std::string>();
    u.value_tags = values_from_json(j.value("value_tags", json::array()));
    u.talk_moves = moves_from_json(j.value("talk_moves", json::array()));
    return u;
}

json to_json(const Thought& t) {
    json j = {{"id", t.id.str()},
              {"kind", t.kind.is_general() ? "General" : "Strategic"},
              {"content", t.content},
              {"grounding",
               {{"memory_seqs", t.grounding.memory_seqs}, {"value_tags", to_json(t.grounding.value_tags)}}}};
    if (auto m = t.kind.move()) j["move"] = std::string(to_string(*m));
    if (t.motivation) j["motivation"] = *t.motivation;
    if (!t.template_id.empty()) j["template_id"] = t.template_id;
    if (t.target) j["target"] = t.target->str();
    return j;
}

Thought thought_from_json(const json& j) {
    Thought t;
    t.id = require(ThoughtId::parse(j.at("id").get<std::string>()), "thought id");
    if (j.at("kind").get<std::string>() == "Strategic") {
        t.kind = ThoughtKind::strategic(require(parse_talk_move(j.at("move").get<std::string>()), "talk move"));
    }
    t.content = j.at("content").get<std::string>();
    if (j.contains("motivation")) t.motivation = j["motivation"].get<double>();
    const json& g = j.value("grounding", json::object());
    t.grounding.memory_seqs = g.value("memory_seqs", std::vector<std::uint64_t>{});
    t.grounding.value_tags = values_from_json(g.value("value_tags", json::array()));
    t.template_id = j.value("template_id", std::string{});
    if (j.contains("target")) t.target = PlayerId(j["target"].get<std::string>());
    return t;
}

json to_json(const AgentPersona& p) {
    return {{"name", p.name}, {"tone", p.tone}, {"self_description", p.self_description}};
}

AgentPersona persona_from_json(const json& j) {
    AgentPersona p;
    p.name = j.at("name").get<std::string>();
    p.tone = j.value("tone", std::vector<std::string>{});
    p.self_description = j.value("self_description", std::string{});
    return p;
}

json to_json(const DilemmaCard& d) {
    return {{"id", d.id}, {"prompt", d.prompt}, {"topic_tags", d.topic_tags}};
}

DilemmaCard dilemma_from_json(const json& j) {
    DilemmaCard d;
    d.id = j.at("id").get<std::string>();
    d.prompt = j.at("prompt").get<std::string>();
    d.topic_tags = j.value("topic_tags", std::vector<std::string>{});
    return d;
}

json to_json(const MemoryEntry& m) {
    return {{"seq", m.seq}, {"summary", m.summary}, {"salience", m.salience}, {"value_tags", to_json(m.value_tags)}};
}

json to_json(const AgentState& a) {
    json memory = json::array();
    for (const auto& m : a.memory) memory.push_back(to_json(m));
    return {{"position", std::string(to_string(a.position))},
            {"opinion_strength", a.opinion_strength},
            {"persona", to_json(a.persona)},
            {"memory", memory},
            {"conceded", a.conceded}};
}

// ---------------------------------------------------------------- state

const Participant* SessionState::participant(const PlayerId& id) const {
    for (const auto& p : participants) {
        if (p.id == id) return &p;
    }
    return nullptr;
}

std::map<PlayerId, std::string> SessionState::player_names() const {
    std::map<PlayerId, std::string> names;
    for (const auto& p : participants) names.emplace(p.id, p.name);
    return names;
}

json SessionState::to_json() const {
    json participants_json = json::array();
    for (const auto& p : participants) participants_json.push_back({{"id", p.id.str()}, {"name", p.name}});
    json opinions_json = json::array();
    for (const auto& [id, o] : opinions) {
        opinions_json.push_back(
            {{"player_id", id.str()}, {"stance", std::string(peer::to_string(o.stance))}, {"confidence", o.confidence}});
    }
    json estimates_json = json::array();
    for (const auto& [id, e] : player_estimates) {
        estimates_json.push_back(
            {{"player_id", id.str()}, {"estimate", e.estimate}, {"last_updated_seq", e.last_updated_seq}});
    }
    json transcript_json = json::array();
    for (const auto& u : transcript.all()) transcript_json.push_back(peer::to_json(u));

    json positioning_json = nullptr;
    if (positioning) {
        positioning_json = {{"stance", std::string(peer::to_string(positioning->stance))},
                            {"mode", std::string(peer::to_string(positioning->mode))},
                            {"aligned_with", positioning->aligned_with ? json(positioning->aligned_with->str()) : json(nullptr)}};
    }
    json last_eval = nullptr;
    if (last_evaluation) {
        last_eval = {{"event_seq", last_evaluation->event_seq},
                     {"trigger_seq", last_evaluation->trigger_seq},
                     {"round", last_evaluation->round}};
    }
    return {{"session_id", session_id},
            {"seed", seed},
            {"status", std::string(peer::to_string(status))},
            {"config", config.to_json()},
            {"dilemma", peer::to_json(dilemma)},
            {"persona", peer::to_json(persona)},
            {"participants", participants_json},
            {"opinions", opinions_json},
            {"positioning", positioning_json},
            {"agent", agent ? peer::to_json(*agent) : json(nullptr)},
            {"player_estimates", estimates_json},
            {"phase", std::string(peer::to_string(phase))},
            {"transcript", transcript_json},
            {"human_turns", human_turns},
            {"agent_turns", agent_turns},
            {"evaluation_rounds", evaluation_rounds},
            {"last_evaluation", last_eval},
            {"pending_shift", std::string(peer::to_string(pending_shift))},
            {"last_seq", last_seq}};
}

bool SessionState::operator==(const SessionState& o) const {
    return session_id == o.session_id && seed == o.seed && config.to_json() == o.config.to_json() &&
           dilemma == o.dilemma && persona == o.persona && participants == o.participants &&
           opinions == o.opinions && positioning == o.positioning && agent == o.agent &&
           player_estimates == o.player_estimates && phase == o.phase && transcript == o.transcript &&
           status == o.status && human_turns == o.human_turns && agent_turns == o.agent_turns &&
           evaluation_rounds == o.evaluation_rounds && last_evaluation == o.last_evaluation &&
           pending_shift == o.pending_shift && last_seq == o.last_seq;
}

// ---------------------------------------------------------------- reducer

namespace {

void expect(bool condition, const std::string& message) {
    if (!condition) throw conflict(message);
}

void expect_status(const SessionState& s, SessionStatus status, EventType type) {
    expect(s.status == status, std::string(to_string(type)) + " not allowed while " +
                                   std::string(to_string(s.status)));
}

void apply_created(SessionState& s, const json& p) {
    expect(s.last_seq == 0 && s.session_id.empty(), "SessionCreated must be the first event");
    s.session_id = p.at("session_id").get<std::string>();
    s.seed = p.at("seed").get<std::uint64_t>();
    s.config = EngineConfig::from_json(p.at("config"));
    s.dilemma = dilemma_from_json(p.at("dilemma"));
    s.persona = persona_from_json(p.at("persona"));
    s.status = SessionStatus::AwaitingStances;
}

void apply_player_joined(SessionState& s, const json& p) {
    expect_status(s, SessionStatus::AwaitingStances, EventType::PlayerJoined);
    expect(s.participants.size() < 2, "a session has exactly two human players");
    Participant part{PlayerId(p.at("player_id").get<std::string>()), p.value("name", std::string{})};
    if (part.id.empty() || part.id.is_agent()) throw validation_error("invalid player id");
    expect(s.participant(part.id) == nullptr, "player " + part.id.str() + " already joined");
    s.participants.push_back(std::move(part));
}

void apply_stance(SessionState& s, const json& p) {
    expect_status(s, SessionStatus::AwaitingStances, EventType::StanceSubmitted);
    OpinionState o{PlayerId(p.at("player_id").get<std::string>()),
                   require(parse_stance(p.at("stance").get<std::string>()), "stance"),
                   p.at("confidence").get<int>()};
    validate(o);
    if (!s.participant(o.player)) throw not_found("player " + o.player.str() + " is not registered");
    expect(s.opinions.count(o.player) == 0, "player " + o.player.str() + " already submitted a stance");
    s.opinions.emplace(o.player, o);
}

void apply_positioned(SessionState& s, const json& p) {
    expect_status(s, SessionStatus::AwaitingStances, EventType::AgentPositioned);
    expect(s.opinions.size() == 2, "AgentPositioned needs both stances");
    AgentPositioning pos;
    pos.stance = require(parse_stance(p.at("stance").get<std::string>()), "stance");
    pos.mode = require(parse_position_mode(p.at("mode").get<std::string>()), "positioning mode");
    if (p.contains("aligned_with") && !p["aligned_with"].is_null()) {
        pos.aligned_with = PlayerId(p["aligned_with"].get<std::string>());
    }
    const OpinionState& a = s.opinions.begin()->second;
    const OpinionState& b = std::next(s.opinions.begin())->second;
    switch (pos.mode) {
    case PositionMode::Oppose:
        expect(a.stance == b.stance && pos.stance == opposite(a.stance) && !pos.aligned_with,
               "Oppose positioning inconsistent with stances");
        break;
    case PositionMode::AmplifyMinority: {
        expect(a.stance != b.stance && a.confidence != b.confidence, "AmplifyMinority needs split stances");
        const OpinionState& weaker = a.confidence < b.confidence ? a : b;
        expect(pos.aligned_with == weaker.player && pos.stance == weaker.stance,
               "AmplifyMinority must align with the less confident player");
        break;
    }
    case PositionMode::TieBreak:
        expect(a.stance != b.stance && a.confidence == b.confidence && !pos.aligned_with,
               "TieBreak needs split stances with equal confidence");
        break;
    }
    AgentState agent = init_agent_state(pos, a, b, s.persona);
    expect(agent.opinion_strength == p.at("opinion_strength").get<double>(),
           "recorded opinion strength differs from the intake mean");
    s.positioning = pos;
    s.agent = std::move(agent);
    for (const auto& [id, o] : s.opinions) {
        s.player_estimates[id] = PlayerStrengthEstimate{id, static_cast<double>(o.confidence), 0};
    }
    s.phase = Phase::Early;
    s.status = SessionStatus::Active;
}

void apply_utterance(SessionState& s, const json& p) {
    expect_status(s, SessionStatus::Active, EventType::UtterancePosted);
    Utterance u = utterance_from_json(p.at("utterance"));
    if (!s.participant(u.speaker)) throw not_found("speaker " + u.speaker.str() + " is not a player");
    s.transcript.append(u);
    if (p.contains("player_estimate")) {
        const double estimate = p["player_estimate"].get<double>();
        if (!(estimate >= 1.0 && estimate <= 5.0)) throw validation_error("player estimate outside [1, 5]");
        s.player_estimates[u.speaker] = PlayerStrengthEstimate{u.speaker, estimate, u.seq};
    }
    if (p.contains("memory") && !p["memory"].is_null()) {
        const json& m = p["memory"];
        s.agent = store_memory(*s.agent, u, m.at("salience").get<double>(), m.at("summary").get<std::string>());
    }
    ++s.human_turns;
}

void apply_phase(SessionState& s, const json& p) {
    expect_status(s, SessionStatus::Active, EventType::PhaseChanged);
    const Phase from = require(parse_phase(p.at("from").get<std::string>()), "phase");
    const Phase to = require(parse_phase(p.at("to").get<std::string>()), "phase");
    expect(from == s.phase && from == Phase::Early && to == Phase::Late, "phase may only move Early -> Late");
    s.phase = to;
}

void apply_adjusted(SessionState& s, const json& p) {
    expect_status(s, SessionStatus::Active, EventType::OpinionAdjusted);
    const double old_strength = p.at("old_strength").get<double>();
    const double new_strength = p.at("new_strength").get<double>();
    expect(old_strength == s.agent->opinion_strength, "OpinionAdjusted old strength does not match state");
    expect(new_strength < old_strength && new_strength >= 1.0, "opinion strength may only decrease within [1, 5]");
    s.agent->opinion_strength = new_strength;
    if (s.pending_shift == ShiftNotice::None) s.pending_shift = ShiftNotice::Adjusted;
}

void apply_concession(SessionState& s, const json&) {
    expect_status(s, SessionStatus::Active, EventType::Concession);
    expect(!s.agent->conceded, "the agent can concede only once");
    expect(s.agent->opinion_strength == 1.0, "concession requires strength at the floor");
    s.agent->conceded = true;
    s.pending_shift = ShiftNotice::Conceded;
}

void apply_evaluated(SessionState& s, std::uint64_t seq, const json& p) {
    expect_status(s, SessionStatus::Active, EventType::ThoughtsEvaluated);
    const auto round = p.at("round").get<std::uint64_t>();
    expect(round == s.evaluation_rounds + 1, "evaluation rounds must be consecutive");
    s.evaluation_rounds = round;
    s.last_evaluation = LastEvaluation{seq, p.at("trigger_seq").get<std::uint64_t>(), round};
}

void apply_spoke(SessionState& s, const json& p) {
    expect_status(s, SessionStatus::Active, EventType::AgentSpoke);
    expect(s.last_evaluation && s.last_evaluation->event_seq == p.at("evaluation_seq").get<std::uint64_t>() &&
               s.last_evaluation->trigger_seq == p.at("trigger_seq").get<std::uint64_t>(),
           "AgentSpoke must follow the ThoughtsEvaluated of its trigger");
    Utterance u = utterance_from_json(p.at("utterance"));
    expect(u.speaker.is_agent(), "AgentSpoke utterance must come from the agent");
    s.transcript.append(std::move(u));
    ++s.agent_turns;
    s.pending_shift = ShiftNotice::None;
}

} // namespace

void apply_event(SessionState& state, const SessionEvent& event) {
    if (event.seq != state.last_seq + 1) {
        throw conflict("event seq " + std::to_string(event.seq) + " does not follow " +
                       std::to_string(state.last_seq));
    }
    if (event.type != EventType::SessionCreated && state.session_id.empty()) {
        throw conflict("log does not start with SessionCreated");
    }
    try {
        const json& p = event.payload;
        switch (event.type) {
        case EventType::SessionCreated: apply_created(state, p); break;
        case EventType::PlayerJoined: apply_player_joined(state, p); break;
        case EventType::StanceSubmitted: apply_stance(state, p); break;
        case EventType::AgentPositioned: apply_positioned(state, p); break;
        case EventType::UtterancePosted: apply_utterance(state, p); break;
        case EventType::PhaseChanged: apply_phase(state, p); break;
        case EventType::OpinionAdjusted: apply_adjusted(state, p); break;
        case EventType::Concession: apply_concession(state, p); break;
        case EventType::ThoughtsEvaluated: apply_evaluated(state, event.seq, p); break;
        case EventType::AgentSpoke: apply_spoke(state, p); break;
        case EventType::SessionClosed:
            expect(state.status != SessionStatus::Closed, "session already closed");
            state.status = SessionStatus::Closed;
            break;
        }
    } catch (const json::exception& e) {
        throw validation_error(std::string(to_string(event.type)) + " payload: " + e.what());
    }
    state.last_seq = event.seq;
}

SessionState replay(std::span<const SessionEvent> events) {
    if (events.empty()) {
        throw ReplayError(1, "empty log (missing SessionCreated)");
    }
    SessionState state;
    for (const auto& e : events) {
        try {
            apply_event(state, e);
        } catch (const Error& err) {
            throw ReplayError(e.seq == state.last_seq + 1 ? e.seq : state.last_seq + 1, err.what());
        }
    }
    return state;
}

} // namespace peer
