#include "peer/domain.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "peer/error.hpp"
#include "peer/rng.hpp"

namespace peer {

std::string DilemmaCard::topic_phrase() const {
    if (topic_tags.empty() || topic_tags.front().empty()) {
        return "this";
    }
    std::string phrase = topic_tags.front();
    for (char& c : phrase) {
        if (c == '-' || c == '_') {
            c = ' ';
        }
    }
    return phrase;
}

std::string_view to_string(Stance s) noexcept {
    return s == Stance::Agree ? "Agree" : "Disagree";
}

std::optional<Stance> parse_stance(std::string_view name) noexcept {
    if (name == "Agree") return Stance::Agree;
    if (name == "Disagree") return Stance::Disagree;
    return std::nullopt;
}

std::string_view to_string(PositionMode m) noexcept {
    switch (m) {
    case PositionMode::Oppose: return "Oppose";
    case PositionMode::AmplifyMinority: return "AmplifyMinority";
    case PositionMode::TieBreak: return "TieBreak";
    }
    return "Oppose";
}

std::optional<PositionMode> parse_position_mode(std::string_view name) noexcept {
    if (name == "Oppose") return PositionMode::Oppose;
    if (name == "AmplifyMinority") return PositionMode::AmplifyMinority;
    if (name == "TieBreak") return PositionMode::TieBreak;
    return std::nullopt;
}

void validate(const OpinionState& opinion) {
    if (opinion.player.empty()) {
        throw validation_error("opinion state has no player id");
    }
    if (opinion.confidence < 1 || opinion.confidence > 5) {
        throw validation_error("confidence must be in 1..5, got " +
                               std::to_string(opinion.confidence));
    }
}

AgentPositioning assign_agent_position(const OpinionState& p1, const OpinionState& p2,
                                       std::uint64_t seed) {
    validate(p1);
    validate(p2);
    if (p1.player == p2.player) {
        throw validation_error("positioning needs two distinct players");
    }

    if (p1.stance == p2.stance) {
        return {opposite(p1.stance), PositionMode::Oppose, std::nullopt};
    }
    if (p1.confidence != p2.confidence) {
        const OpinionState& weaker = p1.confidence < p2.confidence ? p1 : p2;
        return {weaker.stance, PositionMode::AmplifyMinority, weaker.player};
    }
    Rng rng(seed);
    Stance coin = rng.bernoulli(0.5) ? Stance::Agree : Stance::Disagree;
    return {coin, PositionMode::TieBreak, std::nullopt};
}

double initial_opinion_strength(const OpinionState& p1, const OpinionState& p2) {
    validate(p1);
    validate(p2);
    return (p1.confidence + p2.confidence) / 2.0;
}

DilemmaCatalog DilemmaCatalog::from_jsonl(std::istream& in) {
    DilemmaCatalog catalog;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw validation_error("catalog line " + std::to_string(line_no) + ": " + e.what());
        }
        DilemmaCard card;
        try {
            card.id = j.at("id").get<std::string>();
            card.prompt = j.at("prompt").get<std::string>();
            card.topic_tags = j.value("topic_tags", std::vector<std::string>{});
        } catch (const nlohmann::json::exception& e) {
            throw validation_error("catalog line " + std::to_string(line_no) + ": " + e.what());
        }
        catalog.add(std::move(card));
    }
    return catalog;
}

DilemmaCatalog DilemmaCatalog::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw not_found("cannot open dilemma catalog " + path.string());
    }
    return from_jsonl(in);
}

void DilemmaCatalog::add(DilemmaCard card) {
    if (card.id.empty()) {
        throw validation_error("dilemma id is empty");
    }
    if (card.prompt.find_first_not_of(" \t\r\n") == std::string::npos) {
        throw validation_error("dilemma " + card.id + " has an empty prompt");
    }
    if (cards_.count(card.id) != 0) {
        throw validation_error("duplicate dilemma id " + card.id);
    }
    std::string id = card.id;
    cards_.emplace(std::move(id), std::move(card));
}

const DilemmaCard& DilemmaCatalog::at(const std::string& id) const {
    auto it = cards_.find(id);
    if (it == cards_.end()) {
        throw not_found("unknown dilemma " + id);
    }
    return it->second;
}

std::vector<std::string> DilemmaCatalog::ids() const {
    std::vector<std::string> out;
    out.reserve(cards_.size());
    for (const auto& [id, card] : cards_) {
        out.push_back(id);
    }
    return out;
}

} // namespace peer
