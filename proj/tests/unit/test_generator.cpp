#include <catch_amalgamated.hpp>

#include "peer/error.hpp"
#include "peer/events.hpp"
#include "peer/thought.hpp"
#include "support.hpp"

using namespace peer;
using nlohmann::json;

namespace {

DeliberationContext security_ctx(Phase phase = Phase::Early) {
    DeliberationContext ctx;
    ctx.dilemma = testkit::robots();
    ctx.transcript_window = {testkit::utt(1, "p2", "I think it could work"),
                             testkit::utt(2, "p1", "We must keep people safe", {SchwartzValue::Security})};
    ctx.agent.position = Stance::Disagree;
    ctx.agent.opinion_strength = 4.5;
    ctx.agent.persona = AgentPersona::default_peer();
    ctx.phase = phase;
    ctx.player_estimates = {{PlayerId("p1"), 4.0, 0}, {PlayerId("p2"), 5.0, 0}};
    ctx.triggering_seq = 2;
    ctx.round = 1;
    ctx.seed = 7;
    ctx.player_names = {{PlayerId("p1"), "Alice"}, {PlayerId("p2"), "Ben"}};
    return ctx;
}

std::string dump(const std::vector<Thought>& thoughts) {
    json arr = json::array();
    for (const auto& t : thoughts) arr.push_back(to_json(t));
    return arr.dump(2) + "\n";
}

int count_kind(const std::vector<Thought>& v, bool general) {
    int n = 0;
    for (const auto& t : v) n += t.kind.is_general() == general;
    return n;
}

json fake_thought(const std::string& kind, const std::string& content, const char* move = nullptr) {
    json j = {{"kind", kind}, {"content", content}};
    if (move) j["move"] = move;
    return j;
}

} // namespace

TEST_CASE("mock generation is pinned for a Security trigger") {
    auto provider = testkit::mock();
    const auto thoughts = generate_thoughts(security_ctx(), *provider, {2, 2});
    const std::string text = dump(thoughts);
    CHECK(text == testkit::golden("generator_security.json", text));
    CHECK(count_kind(thoughts, true) == 2);
    CHECK(count_kind(thoughts, false) == 2);
    for (std::size_t i = 0; i < thoughts.size(); ++i) {
        CHECK(thoughts[i].id == ThoughtId{1, static_cast<std::uint32_t>(i)});
        CHECK_FALSE(thoughts[i].motivation);
    }
}

TEST_CASE("generation is deterministic for a fixed context") {
    auto provider = testkit::mock();
    const auto a = generate_thoughts(security_ctx(), *provider, {3, 3});
    const auto b = generate_thoughts(security_ctx(), *provider, {3, 3});
    CHECK(a == b);
}

TEST_CASE("strategic templates never argue the other side") {
    auto provider = testkit::mock();
    const auto& templates = testkit::fixtures().templates;
    for (Stance side : {Stance::Agree, Stance::Disagree}) {
        for (std::uint64_t seed = 0; seed < 50; ++seed) {
            auto ctx = security_ctx(Phase::Late);
            ctx.agent.position = side;
            ctx.seed = seed;
            for (const auto& t : generate_thoughts(ctx, *provider, {3, 5})) {
                const auto* tpl = templates.find(t.template_id);
                REQUIRE(tpl);
                if (tpl->stance) REQUIRE(*tpl->stance == side);
            }
        }
    }
}

TEST_CASE("kind counts are capped at the budget") {
    json reply = {{"thoughts",
                   {fake_thought("General", "a"), fake_thought("General", "b"), fake_thought("General", "c"),
                    fake_thought("Strategic", "d", "Challenge"), fake_thought("Strategic", "e", "Extension"),
                    fake_thought("Strategic", "f", "Integration")}}};
    testkit::FnProvider provider([&](const ProviderRequest&) { return reply; });
    const auto out = generate_thoughts(security_ctx(), provider, {2, 1});
    REQUIRE(out.size() == 3);
    CHECK(out[0].content == "a");
    CHECK(out[1].content == "b");
    CHECK(out[2].content == "d");
    CHECK(out[2].kind.move() == TalkMove::Challenge);
    CHECK_THROWS_AS(generate_thoughts(security_ctx(), provider, {0, 0}), Error);
}

TEST_CASE("off-schema replies are discarded whole") {
    json bad = {{"thoughts", {fake_thought("Other", "y"), fake_thought("General", "fine")}}};
    testkit::FnProvider off_schema([&](const ProviderRequest&) { return bad; });
    CHECK(generate_thoughts(security_ctx(), off_schema, {3, 3}).empty());
    CHECK(off_schema.calls() == 2);

    json blank = {{"thoughts", {fake_thought("General", "   "), fake_thought("General", "kept")}}};
    testkit::FnProvider blank_provider([&](const ProviderRequest&) { return blank; });
    CHECK(generate_thoughts(security_ctx(), blank_provider, {3, 3}).empty());
}

TEST_CASE("ids stay dense when entries are dropped") {
    json reply = {{"thoughts",
                   {fake_thought("Strategic", "too early", "ConcessionAcknowledgment"), fake_thought("General", "kept"),
                    fake_thought("Strategic", "also kept", "Extension")}}};
    testkit::FnProvider provider([&](const ProviderRequest&) { return reply; });
    const auto out = generate_thoughts(security_ctx(), provider, {3, 3});
    REQUIRE(out.size() == 2);
    CHECK(out[0].content == "kept");
    CHECK(out[0].id == ThoughtId{1, 0});
    CHECK(out[1].id == ThoughtId{1, 1});
}

TEST_CASE("acknowledgment thoughts need a shift") {
    json reply = {{"thoughts", {fake_thought("Strategic", "you got me", "ConcessionAcknowledgment")}}};
    testkit::FnProvider provider([&](const ProviderRequest&) { return reply; });
    auto ctx = security_ctx();
    CHECK(generate_thoughts(ctx, provider, {1, 1}).empty());
    ctx.pending_shift = ShiftNotice::Adjusted;
    CHECK(generate_thoughts(ctx, provider, {1, 1}).size() == 1);

    auto mock = testkit::mock();
    auto plain = security_ctx(Phase::Late);
    for (const auto& t : generate_thoughts(plain, *mock, {3, 8})) {
        CHECK(t.kind.move() != TalkMove::ConcessionAcknowledgment);
    }
    plain.agent.conceded = true;
    plain.agent.opinion_strength = 1.0;
    plain.pending_shift = ShiftNotice::Conceded;
    bool saw_ack = false;
    for (const auto& t : generate_thoughts(plain, *mock, {3, 3})) {
        saw_ack |= t.kind.move() == TalkMove::ConcessionAcknowledgment;
    }
    CHECK(saw_ack);
}

TEST_CASE("provider failure is retried once, then yields nothing") {
    int calls = 0;
    testkit::FnProvider flaky([&](const ProviderRequest&) -> json {
        if (++calls == 1) throw ProviderError(ProviderError::Kind::Timeout, "slow");
        return {{"thoughts", {fake_thought("General", "second try")}}};
    });
    const auto out = generate_thoughts(security_ctx(), flaky, {1, 1});
    CHECK(flaky.calls() == 2);
    REQUIRE(out.size() == 1);
    CHECK(out[0].content == "second try");

    auto dead = testkit::failing_provider();
    CHECK(generate_thoughts(security_ctx(), *dead, {2, 2}).empty());
    CHECK(dead->calls() == 2);
}

TEST_CASE("targets must name a known player") {
    json reply = {{"thoughts",
                   {{{"kind", "Strategic"}, {"move", "Challenge"}, {"content", "a"}, {"target", "p1"}},
                    {{"kind", "Strategic"}, {"move", "Extension"}, {"content", "b"}, {"target", "zed"}}}}};
    testkit::FnProvider provider([&](const ProviderRequest&) { return reply; });
    const auto out = generate_thoughts(security_ctx(), provider, {0, 2});
    REQUIRE(out.size() == 2);
    CHECK(out[0].target == PlayerId("p1"));
    CHECK_FALSE(out[1].target);
}

TEST_CASE("thought ids round trip") {
    CHECK(ThoughtId{12, 3}.str() == "t12.3");
    CHECK(ThoughtId::parse("t12.3") == ThoughtId{12, 3});
    CHECK_FALSE(ThoughtId::parse("t12"));
    CHECK_FALSE(ThoughtId::parse("x1.2"));
    CHECK_FALSE(ThoughtId::parse("t1."));
}
