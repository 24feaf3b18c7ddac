#include <catch_amalgamated.hpp>

#include <condition_variable>
#include <fstream>
#include <future>
#include <sstream>
#include <thread>

#include "peer/error.hpp"
#include "peer/events.hpp"
#include "peer/rng.hpp"
#include "peer/service.hpp"
#include "peer/session.hpp"
#include "support.hpp"

using namespace peer;
using nlohmann::json;
using namespace std::chrono_literals;

namespace {

const std::string kPersuasive = "If the rules are strict and humans stay in the loop, the risks shrink a lot.";
const std::string kStrong = "Deploying it carefully could save far more lives than it costs.";

constexpr std::uint64_t SILENT_SEED = 0;

std::string fixed_clock() {
    return "2026-01-01T00:00:00.000Z";
}

std::unique_ptr<Session> make_session(std::uint64_t seed, EngineConfig config = {},
                                      std::shared_ptr<Provider> provider = testkit::mock(),
                                      std::unique_ptr<EventSink> sink = nullptr) {
    SessionSetup setup{"s1", testkit::robots(), config, seed, AgentPersona::default_peer()};
    return Session::create(setup, std::move(provider), std::move(sink), fixed_clock);
}

void join_both(Session& s, int c1 = 4, int c2 = 5, Stance s1 = Stance::Agree, Stance s2 = Stance::Agree) {
    s.register_player("Alice");
    s.register_player("Ben");
    s.submit_stance({PlayerId("p1"), s1, c1});
    s.submit_stance({PlayerId("p2"), s2, c2});
}

std::vector<EventType> types(const std::vector<SessionEvent>& events) {
    std::vector<EventType> out;
    for (const auto& e : events) out.push_back(e.type);
    return out;
}

const SessionEvent* first_of(const std::vector<SessionEvent>& events, EventType t) {
    for (const auto& e : events)
        if (e.type == t) return &e;
    return nullptr;
}

int count_of(const std::vector<SessionEvent>& events, EventType t) {
    int n = 0;
    for (const auto& e : events) n += e.type == t;
    return n;
}

// Session invariants checked on every accepted log.
void check_log_invariants(const std::vector<SessionEvent>& log) {
    for (std::size_t i = 0; i < log.size(); ++i) REQUIRE(log[i].seq == i + 1);
    REQUIRE(count_of(log, EventType::AgentPositioned) <= 1);
    if (const auto* pos = first_of(log, EventType::AgentPositioned)) {
        int stances_before = 0;
        for (const auto& e : log) {
            if (e.seq >= pos->seq) break;
            stances_before += e.type == EventType::StanceSubmitted;
        }
        REQUIRE(stances_before == 2);
    }
    for (const auto& e : log) {
        if (e.type != EventType::AgentSpoke) continue;
        const auto eval_seq = e.payload.at("evaluation_seq").get<std::uint64_t>();
        REQUIRE(eval_seq >= 1);
        REQUIRE(eval_seq < e.seq);
        const auto& eval = log[eval_seq - 1];
        REQUIRE(eval.type == EventType::ThoughtsEvaluated);
        REQUIRE(eval.payload.at("trigger_seq") == e.payload.at("trigger_seq"));
        REQUIRE(eval.payload.at("outcome").at("kind") == "Speak");
        REQUIRE(eval.payload.at("outcome").at("thought_id") == e.payload.at("thought_id"));
    }
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("intake flow") {
    auto s = make_session(1);
    CHECK(s->state().status == SessionStatus::AwaitingStances);
    CHECK(s->register_player("Alice").id == PlayerId("p1"));
    CHECK(s->register_player("Ben").id == PlayerId("p2"));
    CHECK_THROWS_AS(s->register_player("Cara"), Error);

    auto first = s->submit_stance({PlayerId("p1"), Stance::Agree, 4});
    CHECK(types(first) == std::vector{EventType::StanceSubmitted});
    CHECK(s->state().status == SessionStatus::AwaitingStances);

    auto second = s->submit_stance({PlayerId("p2"), Stance::Agree, 5});
    REQUIRE(types(second) == std::vector{EventType::StanceSubmitted, EventType::AgentPositioned});
    const auto& p = second[1].payload;
    CHECK(p.at("stance") == "Disagree");
    CHECK(p.at("mode") == "Oppose");
    CHECK(p.at("aligned_with").is_null());
    CHECK(p.at("opinion_strength") == 4.5);
    const auto st = s->state();
    CHECK(st.status == SessionStatus::Active);
    CHECK(st.agent->opinion_strength == 4.5);
    CHECK(st.agent->position == Stance::Disagree);

    const auto before = s->events();
    try {
        s->submit_stance({PlayerId("p1"), Stance::Disagree, 2});
        FAIL("third stance accepted");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Conflict);
    }
    CHECK(s->events().size() == before.size());
    CHECK(s->state() == st);
}

TEST_CASE("stance validation") {
    auto s = make_session(1);
    s->register_player("Alice");
    CHECK_THROWS_AS(s->submit_stance({PlayerId("p9"), Stance::Agree, 3}), Error);
    CHECK_THROWS_AS(s->submit_stance({PlayerId("p1"), Stance::Agree, 7}), Error);
    s->submit_stance({PlayerId("p1"), Stance::Agree, 3});
    CHECK_THROWS_AS(s->submit_stance({PlayerId("p1"), Stance::Agree, 3}), Error);
    CHECK_THROWS_AS(s->post_utterance(PlayerId("p1"), "too early"), Error);
    CHECK(s->events().size() == 3);
}

TEST_CASE("persuasive utterance lowers the agent's strength") {
    auto s = make_session(3);
    join_both(*s);
    const auto events = s->post_utterance(PlayerId("p2"), kPersuasive);
    REQUIRE(events.size() >= 3);
    CHECK(events[0].type == EventType::UtterancePosted);
    const auto* adj = first_of(events, EventType::OpinionAdjusted);
    REQUIRE(adj);
    CHECK(adj->payload.at("old_strength") == 4.5);
    CHECK(adj->payload.at("new_strength") == 4.0);
    const auto trigger = events[0].payload.at("utterance").at("seq");
    for (const auto& e : events) {
        if (e.type != EventType::UtterancePosted) CHECK(e.payload.at("trigger_seq") == trigger);
    }
    CHECK(s->state().agent->opinion_strength == 4.0);
    if (const auto* spoke = first_of(events, EventType::AgentSpoke)) {
        CHECK(spoke->payload.at("acknowledged") == "ack.adjusted");
        CHECK(s->state().pending_shift == ShiftNotice::None);
    } else {
        CHECK(s->state().pending_shift == ShiftNotice::Adjusted);
    }
}

TEST_CASE("utterance validation and closed sessions") {
    auto s = make_session(3);
    join_both(*s);
    CHECK_THROWS_AS(s->post_utterance(PlayerId("p1"), "  "), Error);
    CHECK_THROWS_AS(s->post_utterance(PlayerId("zed"), "hello"), Error);
    s->close("done");
    const auto n = s->events().size();
    try {
        s->post_utterance(PlayerId("p1"), "hello?");
        FAIL("closed session accepted an utterance");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Conflict);
    }
    CHECK(s->events().size() == n);
    CHECK_THROWS_AS(s->close(), Error);
    CHECK(s->heartbeat().empty());
}

TEST_CASE("replay equals the live state across seeded sessions") {
    const std::vector<std::string> pool = {
        "We must protect national security at all costs.", kPersuasive, kStrong,
        "Everyone deserves equal rights and the freedom to choose.", "Why do you say that?",
        "I am not sure, maybe it depends.", "Clearly the efficiency gains are worth it.",
        "Think about the innocent civilians who could be harmed by machines that cannot show mercy."};
    for (std::uint64_t seed = 0; seed < 12; ++seed) {
        EngineConfig cfg;
        cfg.phase.max_turns = 6;
        cfg.articulator_threshold = 2.0 + 0.25 * static_cast<double>(seed % 8);
        auto s = make_session(seed, cfg);
        Rng rng(seed);
        join_both(*s, 1 + static_cast<int>(rng() % 5), 1 + static_cast<int>(rng() % 5),
                  rng.bernoulli(0.5) ? Stance::Agree : Stance::Disagree,
                  rng.bernoulli(0.5) ? Stance::Agree : Stance::Disagree);
        for (int turn = 0; turn < 10; ++turn) {
            s->post_utterance(PlayerId(turn % 2 ? "p2" : "p1"), pool[rng() % pool.size()]);
            if (rng.bernoulli(0.2)) s->heartbeat();
        }
        if (seed % 2) s->close("done");
        const auto log = s->events();
        check_log_invariants(log);
        REQUIRE(replay(log) == s->state());
        std::istringstream in(to_jsonl(log));
        REQUIRE(replay(read_event_log(in)) == s->state());
    }
}

TEST_CASE("replay rejects broken logs") {
    try {
        replay(std::vector<SessionEvent>{});
        FAIL("empty log accepted");
    } catch (const ReplayError& e) {
        CHECK(e.seq() == 1);
        CHECK(std::string(e.what()).find("SessionCreated") != std::string::npos);
    }
    auto s = make_session(1);
    join_both(*s);
    s->post_utterance(PlayerId("p1"), "We must keep people safe");
    auto log = s->events();
    auto gapped = log;
    gapped.erase(gapped.begin() + 3);
    try {
        replay(gapped);
        FAIL("gap accepted");
    } catch (const ReplayError& e) {
        CHECK(e.seq() == 4);
    }
    auto forged = log;
    forged.push_back({log.size() + 1, "", EventType::AgentPositioned,
                      {{"stance", "Agree"}, {"mode", "Oppose"}, {"aligned_with", nullptr}, {"opinion_strength", 3.0}}});
    CHECK_THROWS_AS(replay(forged), ReplayError);
    CHECK_THROWS_AS(SessionEvent::from_line("{\"seq\":1}"), Error);
}

TEST_CASE("silent turn matches the pinned log") {
    // Untagged turn: every candidate stays below the threshold; under this seed the coin says no.
    auto s = make_session(SILENT_SEED);
    join_both(*s);
    const auto events = s->post_utterance(PlayerId("p1"), "I am not sure about this.");
    CHECK(count_of(events, EventType::AgentSpoke) == 0);
    const auto* eval = first_of(events, EventType::ThoughtsEvaluated);
    REQUIRE(eval);
    CHECK(eval->payload.at("outcome").at("reason") == "below threshold");
    const std::string text = to_jsonl(s->events());
    CHECK(text == testkit::golden("session_silent.jsonl", text));
}

TEST_CASE("concession fires once and is acknowledged") {
    EngineConfig cfg;
    cfg.articulator_threshold = 1.0;
    auto s = make_session(2, cfg);
    join_both(*s, 1, 1);
    REQUIRE(s->state().agent->opinion_strength == 1.0);

    auto events = s->post_utterance(PlayerId("p1"), kStrong);
    REQUIRE(count_of(events, EventType::Concession) == 1);
    CHECK(count_of(events, EventType::OpinionAdjusted) == 0);
    const auto* spoke = first_of(events, EventType::AgentSpoke);
    REQUIRE(spoke);
    CHECK(spoke->payload.at("acknowledged") == "ack.concession");
    CHECK(spoke->payload.at("text").get<std::string>().rfind(
              "I have to admit, your arguments have really shifted where I stand.", 0) == 0);
    CHECK(s->state().pending_shift == ShiftNotice::None);
    CHECK(s->state().agent->position == Stance::Disagree);

    events = s->post_utterance(PlayerId("p2"), kStrong);
    CHECK(count_of(events, EventType::Concession) == 0);
    if (const auto* next = first_of(events, EventType::AgentSpoke)) CHECK(next->payload.at("acknowledged").is_null());
    CHECK(count_of(s->events(), EventType::Concession) == 1);
}

TEST_CASE("heartbeat runs the pipeline without a new utterance") {
    EngineConfig cfg;
    cfg.articulator_p_general = 0.0;
    cfg.articulator_threshold = 5.0;
    auto s = make_session(1, cfg);
    join_both(*s);
    auto events = s->heartbeat();
    REQUIRE(events.size() == 1);
    CHECK(events[0].payload.at("trigger") == "heartbeat");
    CHECK(events[0].payload.at("trigger_seq") == 0);
    s->post_utterance(PlayerId("p1"), "We must keep people safe");
    events = s->heartbeat();
    REQUIRE(events.size() == 1);
    CHECK(events[0].payload.at("trigger_seq") == 1);
    CHECK(s->state().transcript.size() == 1);
}

TEST_CASE("classifier failures degrade to warnings") {
    auto s = make_session(1, {}, testkit::failing_provider());
    join_both(*s);
    const auto events = s->post_utterance(PlayerId("p1"), "We must keep people safe");
    REQUIRE(events[0].type == EventType::UtterancePosted);
    CHECK(events[0].payload.at("warnings").size() == 3);
    CHECK(events[0].payload.at("assertiveness") == 0.5);
    CHECK(events[0].payload.at("persuasion_score") == 0.0);
    const auto* eval = first_of(events, EventType::ThoughtsEvaluated);
    REQUIRE(eval);
    CHECK(eval->payload.at("outcome").at("reason") == "no candidates");
    CHECK(s->state().transcript.size() == 1);
}

TEST_CASE("closing while the pipeline is in flight discards its result") {
    std::mutex m;
    std::condition_variable cv;
    bool entered = false;
    bool release = false;
    auto mock = testkit::mock();
    auto gate = std::make_shared<testkit::FnProvider>([&](const ProviderRequest& r) {
        if (r.capability == Capability::GenerateThoughts) {
            std::unique_lock lock(m);
            entered = true;
            cv.notify_all();
            cv.wait(lock, [&] { return release; });
        }
        return mock->call(r).result;
    });
    EngineConfig cfg;
    cfg.articulator_threshold = 1.0;
    auto s = make_session(1, cfg, gate);
    join_both(*s);
    auto pending = std::async(std::launch::async, [&] { return s->post_utterance(PlayerId("p1"), "We must keep people safe"); });
    {
        std::unique_lock lock(m);
        REQUIRE(cv.wait_for(lock, 5s, [&] { return entered; }));
    }
    const auto t0 = std::chrono::steady_clock::now();
    s->close("teacher ended the round");
    CHECK(std::chrono::steady_clock::now() - t0 < 1s);
    CHECK(s->state().status == SessionStatus::Closed);
    {
        std::lock_guard lock(m);
        release = true;
    }
    cv.notify_all();
    const auto events = pending.get();
    CHECK(count_of(events, EventType::ThoughtsEvaluated) == 0);
    CHECK(count_of(events, EventType::AgentSpoke) == 0);
    const auto log = s->events();
    CHECK(log.back().type == EventType::SessionClosed);
    CHECK(replay(log) == s->state());
}

TEST_CASE("subscribers get the backlog then live events") {
    auto s = make_session(1);
    join_both(*s);
    std::vector<SessionEvent> live;
    auto [backlog, id] = s->subscribe([&](const SessionEvent& e) { live.push_back(e); }, 2);
    REQUIRE_FALSE(backlog.empty());
    CHECK(backlog.front().seq == 3);
    CHECK(backlog.back().seq == s->events().back().seq);
    s->post_utterance(PlayerId("p1"), "We must keep people safe");
    REQUIRE_FALSE(live.empty());
    CHECK(live.front().seq == backlog.back().seq + 1);
    s->unsubscribe(id);
    const auto seen = live.size();
    s->close();
    CHECK(live.size() == seen);
}

TEST_CASE("player tokens") {
    auto s = make_session(1);
    join_both(*s);
    s->set_token_key(42);
    const auto t1 = s->player_token(PlayerId("p1"));
    const auto t2 = s->player_token(PlayerId("p2"));
    CHECK(t1.size() == 32);
    CHECK(t1 != t2);
    CHECK(s->player_for_token(t1) == PlayerId("p1"));
    CHECK_FALSE(s->player_for_token("nope"));
    for (const auto& e : s->events()) CHECK(e.to_line().find(t1) == std::string::npos);
    s->set_token_key(43);
    CHECK(s->player_token(PlayerId("p1")) != t1);
}

TEST_CASE("file-backed registry survives a crash with a torn tail") {
    testkit::TempDir dir;
    DilemmaCatalog catalog;
    catalog.add(testkit::robots());
    ServiceOptions opts;
    opts.data_dir = dir.path();
    opts.clock = fixed_clock;

    std::string id;
    SessionState before;
    std::string token;
    {
        SessionRegistry reg(catalog, testkit::mock(), opts);
        id = reg.create_session("killer-robots", std::nullopt, 5);
        auto s = reg.get(id);
        join_both(*s);
        s->post_utterance(PlayerId("p1"), "We must keep people safe");
        before = s->state();
        token = s->player_token(PlayerId("p1"));
        CHECK_THROWS_AS(reg.create_session("nope"), Error);
        CHECK_THROWS_AS(reg.get("s999"), Error);
    }
    const auto log_path = dir.path() / (id + ".jsonl");
    REQUIRE(std::filesystem::exists(log_path));
    {
        std::ofstream torn(log_path, std::ios::app | std::ios::binary);
        torn << R"({"seq":)" << before.last_seq + 1 << R"(,"ts":"x","type":"UtterancePos)";
    }

    SessionRegistry reg(catalog, testkit::mock(), opts);
    auto s = reg.get(id);
    CHECK(s->state() == before);
    CHECK(s->player_for_token(token) == PlayerId("p1"));
    s->post_utterance(PlayerId("p2"), kPersuasive);
    const auto on_disk = read_event_log(log_path);
    check_log_invariants(on_disk);
    CHECK(replay(on_disk) == s->state());
    CHECK(read_file(log_path) == to_jsonl(s->events()));

    const auto next = reg.create_session("killer-robots");
    CHECK(next != id);
    CHECK(reg.ids().size() == 2);
}

TEST_CASE("sink failures leave the state untouched") {
    struct FailingSink : EventSink {
        bool fail = false;
        void append(const SessionEvent&) override {
            if (fail) throw Error(ErrorCode::Internal, "disk full");
        }
    };
    auto sink = std::make_unique<FailingSink>();
    auto* raw = sink.get();
    auto s = make_session(1, {}, testkit::mock(), std::move(sink));
    s->register_player("Alice");
    raw->fail = true;
    const auto st = s->state();
    CHECK_THROWS_AS(s->register_player("Ben"), Error);
    CHECK(s->state() == st);
    raw->fail = false;
    CHECK(s->register_player("Ben").id == PlayerId("p2"));
}
