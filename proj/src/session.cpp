#include "peer/session.hpp"

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <ctime>
#include <random>

#include <unistd.h>

#include "peer/articulator.hpp"
#include "peer/error.hpp"
#include "peer/evaluator.hpp"
#include "peer/rng.hpp"

namespace peer {

using nlohmann::json;

FileEventSink::FileEventSink(const std::filesystem::path& path) {
    file_ = std::fopen(path.c_str(), "ab");
    if (!file_) {
        throw Error(ErrorCode::Internal, "cannot open event log " + path.string() + ": " + std::strerror(errno));
    }
}

FileEventSink::~FileEventSink() {
    if (file_) std::fclose(file_);
}

void FileEventSink::append(const SessionEvent& event) {
    const std::string line = event.to_line() + "\n";
    if (std::fwrite(line.data(), 1, line.size(), file_) != line.size() || std::fflush(file_) != 0 ||
        ::fsync(::fileno(file_)) != 0) {
        throw Error(ErrorCode::Internal, std::string("event log write failed: ") + std::strerror(errno));
    }
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t secs = std::chrono::system_clock::to_time_t(now);
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
    char out[40];
    std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
    return out;
}

namespace {

std::uint64_t random_token_key() {
    std::random_device rd;
    return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

json outcome_json(const SelectionOutcome& outcome) {
    if (const auto* speak = std::get_if<Speak>(&outcome)) {
        return {{"kind", "Speak"}, {"thought_id", speak->thought.str()}};
    }
    return {{"kind", "Silence"}, {"reason", std::get<Silence>(outcome).reason}};
}

json breakdown_json(const MotivationBreakdown& b) {
    return {{"relevance", b.relevance},
            {"information_gap", b.information_gap},
            {"expected_impact", b.expected_impact},
            {"motivation", b.motivation},
            {"gated", b.gated},
            {"gate_reason", b.gate_reason ? json(*b.gate_reason) : json(nullptr)},
            {"source", std::string(to_string(b.source))}};
}

} // namespace

Session::Session(std::shared_ptr<Provider> provider, std::unique_ptr<EventSink> sink, Clock clock)
    : provider_(std::move(provider)),
      sink_(std::move(sink)),
      clock_(clock ? std::move(clock) : Clock(utc_timestamp)),
      token_key_(random_token_key()),
      last_activity_(std::chrono::steady_clock::now()) {
    if (!provider_) throw validation_error("session needs a provider");
}

std::unique_ptr<Session> Session::create(SessionSetup setup, std::shared_ptr<Provider> provider,
                                         std::unique_ptr<EventSink> sink, Clock clock) {
    if (setup.session_id.empty()) throw validation_error("session id is empty");
    if (!has_content(setup.dilemma.prompt)) throw validation_error("dilemma prompt is empty");
    if (setup.persona.name.empty()) throw validation_error("persona name is empty");
    setup.config.validate();

    std::unique_ptr<Session> s(new Session(std::move(provider), std::move(sink), std::move(clock)));
    s->id_ = setup.session_id;
    s->config_ = setup.config;
    std::vector<SessionEvent> out;
    std::lock_guard lock(s->mu_);
    s->emit(EventType::SessionCreated,
            {{"session_id", setup.session_id},
             {"dilemma", to_json(setup.dilemma)},
             {"config", setup.config.to_json()},
             {"seed", setup.seed},
             {"persona", to_json(setup.persona)}},
            out);
    return s;
}

std::unique_ptr<Session> Session::resume(std::vector<SessionEvent> log, std::shared_ptr<Provider> provider,
                                         std::unique_ptr<EventSink> sink, Clock clock) {
    SessionState state = replay(log);
    std::unique_ptr<Session> s(new Session(std::move(provider), std::move(sink), std::move(clock)));
    s->id_ = state.session_id;
    s->config_ = state.config;
    s->state_ = std::move(state);
    s->log_ = std::move(log);
    return s;
}

const SessionEvent& Session::emit(EventType type, json payload, std::vector<SessionEvent>& out) {
    SessionEvent event{state_.last_seq + 1, clock_(), type, std::move(payload)};
    SessionState next = state_;
    apply_event(next, event);
    if (sink_) sink_->append(event);
    state_ = std::move(next);
    log_.push_back(event);
    out.push_back(event);
    for (const auto& [id, listener] : listeners_) listener(event);
    return log_.back();
}

void Session::require_status(SessionStatus expected, std::string_view action) const {
    if (state_.status != expected) {
        throw conflict(std::string(action) + " requires status " + std::string(to_string(expected)) +
                       ", session is " + std::string(to_string(state_.status)));
    }
}

ProviderRequest Session::request(Capability capability, json payload, std::string_view label) const {
    ProviderRequest req;
    req.capability = capability;
    req.payload = std::move(payload);
    req.timeout = config_.provider_timeout;
    req.trace_id = id_ + ":" + std::string(label);
    return req;
}

Participant Session::register_player(std::optional<std::string> name, std::optional<PlayerId> id) {
    std::lock_guard command(command_mu_);
    std::lock_guard lock(mu_);
    require_status(SessionStatus::AwaitingStances, "registering a player");
    if (state_.participants.size() >= 2) throw conflict("session already has two players");
    PlayerId player;
    if (id) {
        player = *id;
        if (player.empty() || player.is_agent()) throw validation_error("invalid player id");
    } else {
        for (int n = 1;; ++n) {
            player = PlayerId("p" + std::to_string(n));
            if (!state_.participant(player)) break;
        }
    }
    if (state_.participant(player)) throw conflict("player " + player.str() + " already joined");
    Participant p{player, name.value_or(player.str())};
    std::vector<SessionEvent> out;
    emit(EventType::PlayerJoined, {{"player_id", p.id.str()}, {"name", p.name}}, out);
    last_activity_ = std::chrono::steady_clock::now();
    return p;
}

std::vector<SessionEvent> Session::submit_stance(const OpinionState& opinion) {
    std::lock_guard command(command_mu_);
    std::lock_guard lock(mu_);
    validate(opinion);
    require_status(SessionStatus::AwaitingStances, "submitting a stance");
    if (!state_.participant(opinion.player)) throw not_found("player " + opinion.player.str() + " is not registered");
    if (state_.opinions.count(opinion.player)) {
        throw conflict("player " + opinion.player.str() + " already submitted a stance");
    }
    std::vector<SessionEvent> out;
    emit(EventType::StanceSubmitted,
         {{"player_id", opinion.player.str()},
          {"stance", std::string(to_string(opinion.stance))},
          {"confidence", opinion.confidence}},
         out);
    if (state_.opinions.size() == 2) {
        const OpinionState& p1 = state_.opinions.at(state_.participants[0].id);
        const OpinionState& p2 = state_.opinions.at(state_.participants[1].id);
        const AgentPositioning pos = assign_agent_position(p1, p2, derive_seed(state_.seed, "tiebreak"));
        emit(EventType::AgentPositioned,
             {{"stance", std::string(to_string(pos.stance))},
              {"mode", std::string(to_string(pos.mode))},
              {"aligned_with", pos.aligned_with ? json(pos.aligned_with->str()) : json(nullptr)},
              {"opinion_strength", initial_opinion_strength(p1, p2)}},
             out);
    }
    last_activity_ = std::chrono::steady_clock::now();
    return out;
}

std::vector<SessionEvent> Session::post_utterance(const PlayerId& player, const std::string& text) {
    std::lock_guard command(command_mu_);
    std::vector<SessionEvent> out;

    std::uint64_t seq = 0;
    Stance agent_position;
    Stance speaker_stance;
    double agent_strength = 0.0;
    {
        std::lock_guard lock(mu_);
        require_status(SessionStatus::Active, "posting an utterance");
        if (!state_.participant(player)) throw not_found("player " + player.str() + " is not in this session");
        if (!has_content(text)) throw validation_error("utterance text is empty");
        seq = state_.transcript.next_seq();
        agent_position = state_.agent->position;
        agent_strength = state_.agent->opinion_strength;
        speaker_stance = state_.opinions.at(player).stance;
        last_activity_ = std::chrono::steady_clock::now();
    }

    // Provider analysis runs outside the state lock.
    std::vector<std::string> warnings;
    const std::string label = "utterance:" + std::to_string(seq);
    UtteranceAnalysis analysis =
        classify_utterance(text, *provider_, id_ + ":" + label + ":values", config_.provider_timeout);
    if (analysis.warning) warnings.push_back(*analysis.warning);

    double assertiveness = 0.5;
    try {
        assertiveness = provider_->call(request(Capability::ClassifyAssertiveness, {{"text", text}}, label + ":assertiveness"))
                            .result.at("assertiveness")
                            .get<double>();
    } catch (const std::exception& e) {
        warnings.push_back(std::string("assertiveness classification failed: ") + e.what());
    }

    double persuasion = 0.0;
    try {
        persuasion = provider_
                         ->call(request(Capability::DetectPersuasion,
                                        {{"text", text},
                                         {"agent_position", std::string(to_string(agent_position))},
                                         {"agent_strength", agent_strength},
                                         {"speaker_stance", std::string(to_string(speaker_stance))}},
                                        label + ":persuasion"))
                         .result.at("score")
                         .get<double>();
    } catch (const std::exception& e) {
        warnings.push_back(std::string("persuasion detection failed: ") + e.what());
    }

    {
        std::lock_guard lock(mu_);
        require_status(SessionStatus::Active, "posting an utterance");
        if (state_.transcript.next_seq() != seq) throw conflict("transcript changed during analysis");

        Utterance u{seq, player, text, analysis.value_tags, analysis.talk_moves};
        const auto estimate = update_player_strength(state_.player_estimates.at(player), u, assertiveness,
                                                     state_.config.interpreter_beta);
        const double tag_weight = std::min(1.0, static_cast<double>(u.value_tags.size()) / 2.0);
        const double salience = std::clamp(0.5 * tag_weight + 0.5 * persuasion, 0.0, 1.0);
        const int turn_index = state_.human_turns;

        json payload = {{"utterance", to_json(u)},
                        {"assertiveness", assertiveness},
                        {"persuasion_score", persuasion},
                        {"player_estimate", estimate.estimate},
                        {"memory", {{"summary", summarize_offline(text)}, {"salience", salience}}}};
        if (!warnings.empty()) payload["warnings"] = warnings;
        emit(EventType::UtterancePosted, std::move(payload), out);

        const Phase phase = update_phase(turn_index, state_.config.phase.effective_boundary());
        if (phase == Phase::Late && state_.phase == Phase::Early) {
            emit(EventType::PhaseChanged,
                 {{"trigger_seq", seq}, {"from", "Early"}, {"to", "Late"}, {"turn_index", turn_index}}, out);
        }

        const PersuasionOutcome outcome = apply_persuasion(*state_.agent, persuasion, seq, state_.config.agent);
        if (outcome.adjusted) {
            emit(EventType::OpinionAdjusted,
                 {{"trigger_seq", seq},
                  {"score", outcome.adjusted->score},
                  {"old_strength", outcome.adjusted->old_strength},
                  {"new_strength", outcome.adjusted->new_strength}},
                 out);
        }
        if (outcome.concession) {
            emit(EventType::Concession,
                 {{"trigger_seq", seq}, {"score", persuasion}, {"strength", outcome.state.opinion_strength}}, out);
        }
    }

    run_thought_pipeline(seq, "utterance", out);
    return out;
}

std::vector<SessionEvent> Session::heartbeat() {
    std::lock_guard command(command_mu_);
    std::vector<SessionEvent> out;
    std::uint64_t trigger_seq = 0;
    {
        std::lock_guard lock(mu_);
        if (state_.status != SessionStatus::Active) return out;
        // A lull after the agent's own turn is left to the players.
        if (!state_.transcript.empty() && state_.transcript.back().speaker.is_agent()) return out;
        trigger_seq = state_.transcript.empty() ? 0 : state_.transcript.back().seq;
        ++heartbeats_;
        last_activity_ = std::chrono::steady_clock::now();
    }
    run_thought_pipeline(trigger_seq, "heartbeat", out);
    return out;
}

std::vector<SessionEvent> Session::close(const std::string& reason) {
    // Only the state lock: closing never waits for a pipeline in flight.
    std::lock_guard lock(mu_);
    if (state_.status == SessionStatus::Closed) throw conflict("session already closed");
    std::vector<SessionEvent> out;
    emit(EventType::SessionClosed, {{"reason", reason}}, out);
    last_activity_ = std::chrono::steady_clock::now();
    return out;
}

DeliberationContext Session::build_context(std::uint64_t trigger_seq, std::uint64_t round) const {
    const EngineConfig& cfg = state_.config;
    DeliberationContext ctx;
    ctx.dilemma = state_.dilemma;
    ctx.transcript_window = state_.transcript.window(static_cast<std::size_t>(cfg.generator.window));
    ctx.agent = *state_.agent;
    ctx.phase = state_.phase;
    for (const auto& [id, e] : state_.player_estimates) ctx.player_estimates.push_back(e);

    AgentState recall = *state_.agent;
    std::erase_if(recall.memory, [&](const MemoryEntry& m) { return m.seq == trigger_seq; });
    ValueSet query;
    if (const Utterance* t = state_.transcript.find(trigger_seq)) query = t->value_tags;
    ctx.retrieved_memories = retrieve_memories(recall, query, static_cast<std::size_t>(cfg.generator.memory_k));

    ctx.triggering_seq = trigger_seq;
    ctx.round = round;
    ctx.pending_shift = state_.pending_shift;
    ctx.seed = derive_seed(state_.seed, "generate:" + std::to_string(round));
    ctx.player_names = state_.player_names();
    ctx.provider_timeout = cfg.provider_timeout;
    return ctx;
}

void Session::run_thought_pipeline(std::uint64_t trigger_seq, std::string_view trigger_kind,
                                   std::vector<SessionEvent>& out) {
    DeliberationContext ctx;
    EngineConfig cfg;
    std::uint64_t seed = 0;
    std::uint64_t observed_seq = 0;
    {
        std::lock_guard lock(mu_);
        if (state_.status != SessionStatus::Active) return;
        ctx = build_context(trigger_seq, state_.evaluation_rounds + 1);
        cfg = state_.config;
        seed = state_.seed;
        observed_seq = state_.last_seq;
    }

    const auto thoughts = generate_thoughts(ctx, *provider_, cfg.generator.budget);
    const auto evaluated = evaluate_all(thoughts, ctx, *provider_, cfg.evaluator);
    Rng rng(derive_seed(seed, "select:" + std::to_string(ctx.round)));
    SelectionOutcome outcome =
        select_thought(evaluated, ArticulationPolicy{cfg.articulator_threshold, cfg.articulator_p_general, seed}, rng);

    std::optional<Articulation> spoken;
    const Thought* chosen = nullptr;
    if (auto* speak = std::get_if<Speak>(&outcome)) {
        for (const auto& e : evaluated) {
            if (e.thought.id == speak->thought) chosen = &e.thought;
        }
        spoken = articulate(*chosen, ctx.agent.persona, ctx, *provider_);
        speak->rendered_text = spoken->text;
    }

    std::lock_guard lock(mu_);
    // Staleness: drop results whose session closed or whose state moved on.
    if (state_.status != SessionStatus::Active || state_.last_seq != observed_seq) return;

    json candidates = json::array();
    for (const auto& e : evaluated) {
        Thought t = e.thought;
        t.motivation = e.breakdown.motivation;
        candidates.push_back({{"thought", to_json(t)}, {"breakdown", breakdown_json(e.breakdown)}});
    }
    const SessionEvent& evaluation = emit(EventType::ThoughtsEvaluated,
                                          {{"debug", true},
                                           {"trigger_seq", trigger_seq},
                                           {"round", ctx.round},
                                           {"trigger", std::string(trigger_kind)},
                                           {"candidates", candidates},
                                           {"outcome", outcome_json(outcome)}},
                                          out);
    if (!spoken) return;
    const std::uint64_t evaluation_seq = evaluation.seq;
    Utterance u{state_.transcript.next_seq(), PlayerId::agent(), spoken->text, chosen->grounding.value_tags, {}};
    if (auto move = chosen->kind.move()) u.talk_moves.insert(*move);
    emit(EventType::AgentSpoke,
         {{"trigger_seq", trigger_seq},
          {"evaluation_seq", evaluation_seq},
          {"thought_id", chosen->id.str()},
          {"text", spoken->text},
          {"render_source", spoken->source == RenderSource::Provider ? "provider" : "template"},
          {"acknowledged", spoken->clause_id ? json(*spoken->clause_id) : json(nullptr)},
          {"utterance", to_json(u)}},
         out);
}

SessionState Session::state() const {
    std::lock_guard lock(mu_);
    return state_;
}

std::vector<SessionEvent> Session::events() const {
    std::lock_guard lock(mu_);
    return log_;
}

void Session::set_token_key(std::uint64_t key) {
    std::lock_guard lock(mu_);
    token_key_ = key;
}

std::string Session::player_token(const PlayerId& player) const {
    std::lock_guard lock(mu_);
    if (!state_.participant(player)) throw not_found("player " + player.str() + " is not in this session");
    const std::uint64_t a = derive_seed(token_key_, id_ + "/" + player.str());
    return hex64(mix64(a)) + hex64(mix64(a ^ 0x9e3779b97f4a7c15ULL));
}

std::optional<PlayerId> Session::player_for_token(const std::string& token) const {
    std::vector<PlayerId> players;
    {
        std::lock_guard lock(mu_);
        for (const auto& p : state_.participants) players.push_back(p.id);
    }
    for (const auto& p : players) {
        if (player_token(p) == token) return p;
    }
    return std::nullopt;
}

std::pair<std::vector<SessionEvent>, std::uint64_t> Session::subscribe(Listener listener, std::uint64_t after_seq) {
    std::lock_guard lock(mu_);
    std::vector<SessionEvent> backlog;
    for (const auto& e : log_) {
        if (e.seq > after_seq) backlog.push_back(e);
    }
    const std::uint64_t id = next_listener_++;
    listeners_.emplace(id, std::move(listener));
    return {std::move(backlog), id};
}

void Session::unsubscribe(std::uint64_t listener_id) {
    std::lock_guard lock(mu_);
    listeners_.erase(listener_id);
}

std::chrono::steady_clock::time_point Session::last_activity() const {
    std::lock_guard lock(mu_);
    return last_activity_;
}

} // namespace peer
