#include <catch_amalgamated.hpp>

#include <sstream>

#include "peer/domain.hpp"
#include "peer/error.hpp"
#include "peer/rng.hpp"
#include "support.hpp"

using namespace peer;

namespace {

OpinionState op(const char* id, Stance s, int c) {
    return {PlayerId(id), s, c};
}

// Rule table for the intake answers, written out case by case.
struct Expected {
    bool tie = false;
    Stance stance = Stance::Agree;
    PositionMode mode = PositionMode::Oppose;
    std::optional<PlayerId> aligned;
};

Expected table(const OpinionState& a, const OpinionState& b) {
    if (a.stance == Stance::Agree && b.stance == Stance::Agree) return {false, Stance::Disagree, PositionMode::Oppose, {}};
    if (a.stance == Stance::Disagree && b.stance == Stance::Disagree) return {false, Stance::Agree, PositionMode::Oppose, {}};
    if (a.confidence < b.confidence) return {false, a.stance, PositionMode::AmplifyMinority, a.player};
    if (b.confidence < a.confidence) return {false, b.stance, PositionMode::AmplifyMinority, b.player};
    return {true, Stance::Agree, PositionMode::TieBreak, {}};
}

} // namespace

TEST_CASE("positioning examples") {
    auto r = assign_agent_position(op("p1", Stance::Agree, 4), op("p2", Stance::Agree, 5), 1);
    CHECK(r.stance == Stance::Disagree);
    CHECK(r.mode == PositionMode::Oppose);
    CHECK_FALSE(r.aligned_with);

    r = assign_agent_position(op("p1", Stance::Agree, 5), op("p2", Stance::Disagree, 2), 1);
    CHECK(r.stance == Stance::Disagree);
    CHECK(r.mode == PositionMode::AmplifyMinority);
    CHECK(r.aligned_with == PlayerId("p2"));

    r = assign_agent_position(op("p1", Stance::Disagree, 1), op("p2", Stance::Disagree, 1), 1);
    CHECK(r.stance == Stance::Agree);
    CHECK(r.mode == PositionMode::Oppose);
}

TEST_CASE("positioning matches the rule table on every input") {
    const Stance stances[] = {Stance::Agree, Stance::Disagree};
    int combos = 0;
    for (Stance s1 : stances)
        for (int c1 = 1; c1 <= 5; ++c1)
            for (Stance s2 : stances)
                for (int c2 = 1; c2 <= 5; ++c2) {
                    ++combos;
                    const auto a = op("p1", s1, c1);
                    const auto b = op("p2", s2, c2);
                    const auto got = assign_agent_position(a, b, 42);
                    const auto want = table(a, b);
                    CHECK(got.mode == want.mode);
                    if (!want.tie) {
                        CHECK(got.stance == want.stance);
                        CHECK(got.aligned_with == want.aligned);
                    } else {
                        CHECK_FALSE(got.aligned_with);
                        CHECK(assign_agent_position(a, b, 42).stance == got.stance);
                    }
                    if (got.mode == PositionMode::Oppose) CHECK_FALSE(got.aligned_with);
                    // Relabeling the players never changes the chosen side.
                    if (got.mode != PositionMode::TieBreak) {
                        CHECK(assign_agent_position(b, a, 42).stance == got.stance);
                    }
                }
    CHECK(combos == 100);
}

TEST_CASE("tie-break coin is fair and seed-determined") {
    const auto a = op("p1", Stance::Agree, 3);
    const auto b = op("p2", Stance::Disagree, 3);
    int agree = 0;
    for (std::uint64_t seed = 0; seed < 10000; ++seed) {
        const auto r = assign_agent_position(a, b, seed);
        REQUIRE(r.mode == PositionMode::TieBreak);
        REQUIRE(assign_agent_position(a, b, seed).stance == r.stance);
        agree += r.stance == Stance::Agree;
    }
    CHECK(std::abs(agree / 10000.0 - 0.5) <= 0.05);
}

TEST_CASE("positioning rejects invalid input") {
    CHECK_THROWS_AS(assign_agent_position(op("p1", Stance::Agree, 0), op("p2", Stance::Agree, 3), 1), Error);
    CHECK_THROWS_AS(assign_agent_position(op("p1", Stance::Agree, 6), op("p2", Stance::Agree, 3), 1), Error);
    CHECK_THROWS_AS(assign_agent_position(op("p1", Stance::Agree, 3), op("p1", Stance::Agree, 3), 1), Error);
}

TEST_CASE("initial strength is the mean of confidences") {
    CHECK(initial_opinion_strength(op("a", Stance::Agree, 4), op("b", Stance::Agree, 5)) == 4.5);
    CHECK(initial_opinion_strength(op("a", Stance::Agree, 1), op("b", Stance::Agree, 1)) == 1.0);
    CHECK(initial_opinion_strength(op("a", Stance::Agree, 2), op("b", Stance::Agree, 5)) == 3.5);
    for (int c1 = 1; c1 <= 5; ++c1)
        for (int c2 = 1; c2 <= 5; ++c2) {
            const double s = initial_opinion_strength(op("a", Stance::Agree, c1), op("b", Stance::Disagree, c2));
            CHECK(s == initial_opinion_strength(op("b", Stance::Disagree, c2), op("a", Stance::Agree, c1)));
            CHECK(s >= 1.0);
            CHECK(s <= 5.0);
        }
}

TEST_CASE("stance helpers") {
    CHECK(opposite(Stance::Agree) == Stance::Disagree);
    CHECK(opposite(Stance::Disagree) == Stance::Agree);
    CHECK(parse_stance("Agree") == Stance::Agree);
    CHECK_FALSE(parse_stance("agree"));
}

TEST_CASE("dilemma catalog") {
    const auto catalog = DilemmaCatalog::load(testkit::data_path("dilemmas.jsonl"));
    CHECK(catalog.size() >= 3);
    CHECK(catalog.at("killer-robots").prompt == "Should we allow the development of AI killer robots?");
    CHECK(catalog.at("killer-robots").topic_phrase() == "AI killer robots");
    CHECK_THROWS_AS(catalog.at("nope"), Error);

    std::istringstream dup(R"({"id":"a","prompt":"x?"})" "\n" R"({"id":"a","prompt":"y?"})");
    CHECK_THROWS_AS(DilemmaCatalog::from_jsonl(dup), Error);
    std::istringstream empty_prompt(R"({"id":"a","prompt":"  "})");
    CHECK_THROWS_AS(DilemmaCatalog::from_jsonl(empty_prompt), Error);
    std::istringstream garbage("{not json");
    CHECK_THROWS_AS(DilemmaCatalog::from_jsonl(garbage), Error);
}

TEST_CASE("labelled sub-streams are independent and stable") {
    CHECK(derive_seed(1, "tiebreak") == derive_seed(1, "tiebreak"));
    CHECK(derive_seed(1, "tiebreak") != derive_seed(1, "select:1"));
    CHECK(derive_seed(1, "tiebreak") != derive_seed(2, "tiebreak"));
    // FNV-1a reference vectors.
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    Rng r(7);
    for (int i = 0; i < 1000; ++i) {
        const double u = r.uniform01();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
    }
}
