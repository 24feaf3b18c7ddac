#include "peer/mock_provider.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "peer/articulator.hpp"
#include "peer/error.hpp"
#include "peer/evaluator.hpp"
#include "peer/rng.hpp"

namespace peer {

using nlohmann::json;

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    const auto flush = [&] {
        while (!current.empty() && current.back() == '\'') current.pop_back();
        if (!current.empty()) tokens.push_back(std::move(current));
        current.clear();
    };
    for (char raw : text) {
        const auto c = static_cast<unsigned char>(raw);
        if (std::isalnum(c)) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else if (raw == '\'' && !current.empty()) {
            current.push_back('\'');
        } else {
            flush();
        }
    }
    flush();
    return tokens;
}

std::string normalize_utterance(std::string_view text) {
    std::string out;
    bool space = false;
    for (char raw : text) {
        const auto c = static_cast<unsigned char>(raw);
        if (std::isspace(c)) {
            space = !out.empty();
            continue;
        }
        if (space) {
            out.push_back(' ');
            space = false;
        }
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    while (!out.empty() && std::ispunct(static_cast<unsigned char>(out.back()))) {
        out.pop_back();
    }
    return out;
}

namespace {

bool token_matches(const std::string& token, std::string_view pattern) {
    if (!pattern.empty() && pattern.back() == '*') {
        pattern.remove_suffix(1);
        return token.size() >= pattern.size() && token.compare(0, pattern.size(), pattern) == 0;
    }
    return token == pattern;
}

// Occurrences of a (possibly multi-word) keyword in the token stream.
int count_matches(const std::vector<std::string>& tokens, const std::string& keyword) {
    const auto parts = tokenize_keyword(keyword);
    if (parts.empty() || parts.size() > tokens.size()) {
        return 0;
    }
    int n = 0;
    for (std::size_t i = 0; i + parts.size() <= tokens.size(); ++i) {
        bool all = true;
        for (std::size_t k = 0; k < parts.size() && all; ++k) {
            all = token_matches(tokens[i + k], parts[k]);
        }
        n += all ? 1 : 0;
    }
    return n;
}

ValueSet values_of(const json& arr) {
    ValueSet out;
    if (!arr.is_array()) {
        return out;
    }
    for (const auto& name : arr) {
        if (name.is_string()) {
            if (auto v = parse_schwartz_value(name.get<std::string>())) out.insert(*v);
        }
    }
    return out;
}

json values_json(const ValueSet& values) {
    json arr = json::array();
    for (auto v : values) arr.push_back(std::string(to_string(v)));
    return arr;
}

void replace_all(std::string& text, std::string_view from, std::string_view to) {
    for (auto pos = text.find(from); pos != std::string::npos; pos = text.find(from, pos + to.size())) {
        text.replace(pos, from.size(), to);
    }
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw not_found("cannot open fixture " + path.string());
    }
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw validation_error("fixture " + path.string() + ": " + e.what());
    }
}

} // namespace

std::vector<std::string> tokenize_keyword(std::string_view keyword) {
    std::vector<std::string> parts;
    std::string current;
    for (char raw : keyword) {
        if (raw == ' ') {
            if (!current.empty()) parts.push_back(std::move(current));
            current.clear();
        } else {
            current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(raw))));
        }
    }
    if (!current.empty()) parts.push_back(std::move(current));
    return parts;
}

Lexicon Lexicon::from_json(const json& j) {
    Lexicon lex;
    lex.version = j.at("version").get<std::string>();
    for (const auto& [kw, name] : j.at("values").items()) {
        auto v = parse_schwartz_value(name.get<std::string>());
        if (!v) throw validation_error("lexicon: unknown value " + name.dump());
        lex.values.emplace(kw, *v);
    }
    const json moves = j.value("talk_moves", json::object());
    for (const auto& [kw, name] : moves.items()) {
        auto m = parse_talk_move(name.get<std::string>());
        if (!m) throw validation_error("lexicon: unknown talk move " + name.dump());
        lex.talk_moves.emplace(kw, *m);
    }
    lex.assertive = j.value("assertive", std::vector<std::string>{});
    lex.hedges = j.value("hedges", std::vector<std::string>{});
    return lex;
}

PersuasionMap PersuasionMap::from_json(const json& j) {
    PersuasionMap map;
    map.version = j.at("version").get<std::string>();
    const json utterances = j.value("utterances", json::object());
    const json cues = j.value("cues", json::object());
    for (const auto& [text, score] : utterances.items()) {
        map.utterances.emplace(normalize_utterance(text), score.get<double>());
    }
    for (const auto& [cue, score] : cues.items()) {
        map.cues.emplace(cue, score.get<double>());
    }
    map.default_score = j.value("default", 0.0);
    const auto in_range = [](double s) { return s >= 0.0 && s <= 1.0; };
    for (const auto* table : {&map.utterances, &map.cues}) {
        for (const auto& [key, score] : *table) {
            if (!in_range(score)) throw validation_error("persuasion score out of range for " + key);
        }
    }
    if (!in_range(map.default_score)) throw validation_error("persuasion default out of range");
    return map;
}

bool ThoughtTemplate::uses_value() const {
    return text_pattern.find("{value}") != std::string::npos;
}

TemplateSet TemplateSet::from_json(const json& j) {
    TemplateSet set;
    set.version = j.at("version").get<std::string>();
    for (const auto& t : j.at("templates")) {
        ThoughtTemplate tpl;
        tpl.template_id = t.at("template_id").get<std::string>();
        const auto kind = t.at("kind").get<std::string>();
        if (kind != "General" && kind != "Strategic") {
            throw validation_error("template " + tpl.template_id + ": bad kind " + kind);
        }
        tpl.strategic = kind == "Strategic";
        if (tpl.strategic) {
            tpl.move = parse_talk_move(t.at("move").get<std::string>());
            if (!tpl.move) throw validation_error("template " + tpl.template_id + ": bad move");
        }
        tpl.text_pattern = t.at("text_pattern").get<std::string>();
        tpl.required_value_tags = values_of(t.value("required_value_tags", json::array()));
        const auto stance = t.value("stance", std::string("any"));
        if (stance != "any") {
            tpl.stance = parse_stance(stance);
            if (!tpl.stance) throw validation_error("template " + tpl.template_id + ": bad stance");
        }
        if (set.find(tpl.template_id)) {
            throw validation_error("duplicate template id " + tpl.template_id);
        }
        set.templates.push_back(std::move(tpl));
    }
    return set;
}

const ThoughtTemplate* TemplateSet::find(const std::string& id) const {
    for (const auto& t : templates) {
        if (t.template_id == id) return &t;
    }
    return nullptr;
}

std::string Fixtures::version() const {
    return lexicon.version + "+" + persuasion.version + "+" + templates.version;
}

Fixtures Fixtures::load(const std::filesystem::path& dir) {
    return {Lexicon::from_json(read_json_file(dir / "lexicon.json")),
            PersuasionMap::from_json(read_json_file(dir / "persuasion.json")),
            TemplateSet::from_json(read_json_file(dir / "templates.json"))};
}

ProviderResponse MockProvider::do_call(const ProviderRequest& request) {
    const json& p = request.payload;
    ProviderResponse response;
    response.source = ResponseSource::Mock;
    try {
        switch (request.capability) {
        case Capability::ClassifyValues: response.result = classify_values(p); break;
        case Capability::DetectPersuasion: response.result = detect_persuasion(p); break;
        case Capability::ClassifyAssertiveness: response.result = classify_assertiveness(p); break;
        case Capability::GenerateThoughts: response.result = generate_thoughts(p); break;
        case Capability::ScoreThought: response.result = score_thought(p); break;
        case Capability::Paraphrase: response.result = paraphrase(p); break;
        }
    } catch (const json::exception& e) {
        throw validation_error(std::string("mock ") + std::string(to_string(request.capability)) +
                               " payload: " + e.what());
    }
    return response;
}

json MockProvider::classify_values(const json& p) const {
    const auto tokens = tokenize(p.at("text").get<std::string>());
    ValueSet values;
    for (const auto& [kw, value] : fixtures_.lexicon.values) {
        if (count_matches(tokens, kw) > 0) values.insert(value);
    }
    TalkMoveSet moves;
    for (const auto& [cue, move] : fixtures_.lexicon.talk_moves) {
        if (count_matches(tokens, cue) > 0) moves.insert(move);
    }
    json move_arr = json::array();
    for (auto m : moves) move_arr.push_back(std::string(to_string(m)));
    return {{"values", values_json(values)}, {"talk_moves", move_arr}};
}

json MockProvider::detect_persuasion(const json& p) const {
    const auto text = p.at("text").get<std::string>();
    const auto agent = p.value("agent_position", std::string{});
    const auto speaker = p.value("speaker_stance", std::string{});
    if (!speaker.empty() && speaker == agent) {
        return {{"score", 0.0}};
    }
    const auto& map = fixtures_.persuasion;
    if (auto it = map.utterances.find(normalize_utterance(text)); it != map.utterances.end()) {
        return {{"score", it->second}};
    }
    const auto tokens = tokenize(text);
    double score = map.default_score;
    bool cued = false;
    for (const auto& [cue, s] : map.cues) {
        if (count_matches(tokens, cue) > 0) {
            score = cued ? std::max(score, s) : s;
            cued = true;
        }
    }
    return {{"score", score}};
}

json MockProvider::classify_assertiveness(const json& p) const {
    const auto tokens = tokenize(p.at("text").get<std::string>());
    int assertive = 0;
    int hedges = 0;
    for (const auto& kw : fixtures_.lexicon.assertive) assertive += count_matches(tokens, kw);
    for (const auto& kw : fixtures_.lexicon.hedges) hedges += count_matches(tokens, kw);
    const double a = std::clamp(0.5 + 0.25 * (assertive - hedges), 0.0, 1.0);
    return {{"assertiveness", a}};
}

json MockProvider::generate_thoughts(const json& p) const {
    const std::uint64_t seed = p.value("seed", std::uint64_t{0});
    const json& agent = p.at("agent");
    const Stance position = parse_stance(agent.value("position", std::string{})).value_or(Stance::Agree);
    const bool ack_ok = agent.value("conceded", false) || p.value("pending_shift", std::string("None")) != "None";
    const int n_general = p.value("n_general", 0);
    const int n_strategic = p.value("n_strategic", 0);
    const std::string topic = p.at("dilemma").value("topic", std::string("this"));

    ValueSet trigger_tags;
    std::string speaker_id;
    std::string speaker_name;
    if (p.contains("trigger") && p["trigger"].is_object()) {
        const json& t = p["trigger"];
        trigger_tags = values_of(t.value("value_tags", json::array()));
        speaker_id = t.value("speaker", std::string{});
        speaker_name = t.value("speaker_name", speaker_id);
    }
    const bool human_speaker = !speaker_id.empty() && speaker_id != PlayerId::agent().str();

    const auto key = [&](const ThoughtTemplate& t) { return mix64(seed ^ fnv1a64(t.template_id)); };
    const auto eligible = [&](const ThoughtTemplate& t) {
        if (t.stance && *t.stance != position) return false;
        if (!std::includes(trigger_tags.begin(), trigger_tags.end(), t.required_value_tags.begin(),
                           t.required_value_tags.end())) {
            return false;
        }
        if (t.move == TalkMove::ConcessionAcknowledgment && !ack_ok) return false;
        if (t.uses_value() && t.required_value_tags.empty() && trigger_tags.empty()) return false;
        if (t.text_pattern.find("{speaker}") != std::string::npos && !human_speaker) return false;
        return true;
    };
    const auto rank = [&](const ThoughtTemplate* a, const ThoughtTemplate* b) {
        const bool ack_a = a->move == TalkMove::ConcessionAcknowledgment;
        const bool ack_b = b->move == TalkMove::ConcessionAcknowledgment;
        if (ack_a != ack_b) return ack_a;
        if (a->required_value_tags.size() != b->required_value_tags.size()) {
            return a->required_value_tags.size() > b->required_value_tags.size();
        }
        return key(*a) < key(*b);
    };

    std::vector<const ThoughtTemplate*> generals;
    std::vector<const ThoughtTemplate*> strategics;
    for (const auto& t : fixtures_.templates.templates) {
        if (eligible(t)) (t.strategic ? strategics : generals).push_back(&t);
    }
    std::sort(generals.begin(), generals.end(), rank);
    std::sort(strategics.begin(), strategics.end(), rank);

    std::vector<const ThoughtTemplate*> chosen;
    for (std::size_t i = 0; i < generals.size() && static_cast<int>(i) < n_general; ++i) {
        chosen.push_back(generals[i]);
    }
    TalkMoveSet used;
    int picked = 0;
    for (const auto* t : strategics) {
        if (picked >= n_strategic) break;
        if (!used.insert(*t->move).second) continue;
        chosen.push_back(t);
        ++picked;
    }

    json thoughts = json::array();
    for (const auto* t : chosen) {
        ValueSet tags = t->required_value_tags;
        std::string text = t->text_pattern;
        if (t->uses_value()) {
            SchwartzValue value;
            if (!t->required_value_tags.empty()) {
                value = *t->required_value_tags.begin();
            } else {
                auto it = trigger_tags.begin();
                std::advance(it, static_cast<std::ptrdiff_t>(key(*t) % trigger_tags.size()));
                value = *it;
            }
            tags.insert(value);
            replace_all(text, "{value}", spoken_name(value));
        }
        replace_all(text, "{speaker}", speaker_name);
        replace_all(text, "{topic}", topic);

        json entry = {{"kind", t->strategic ? "Strategic" : "General"},
                      {"content", text},
                      {"value_tags", values_json(tags)},
                      {"template_id", t->template_id}};
        if (t->move) {
            entry["move"] = std::string(to_string(*t->move));
            if (move_targets_speaker(*t->move) && human_speaker) {
                entry["target"] = speaker_id;
            }
        }
        thoughts.push_back(std::move(entry));
    }
    return {{"thoughts", thoughts}};
}

json MockProvider::score_thought(const json& p) const {
    HeuristicInputs in;
    in.thought_tags = values_of(p.at("thought").value("value_tags", json::array()));
    in.trigger_tags = values_of(p.value("trigger_value_tags", json::array()));
    in.voiced_tags = values_of(p.value("voiced_value_tags", json::array()));
    in.agent_strength = p.value("agent_strength", 3.0);
    in.mean_player_estimate = p.value("mean_player_estimate", 3.0);
    const SubScores s = heuristic_subscores(in);
    return {{"relevance", s.relevance},
            {"information_gap", s.information_gap},
            {"expected_impact", s.expected_impact}};
}

json MockProvider::paraphrase(const json& p) const {
    ThoughtKind kind = ThoughtKind::general();
    if (p.value("kind", std::string{}) == "Strategic" && p.contains("move") && p["move"].is_string()) {
        if (auto m = parse_talk_move(p["move"].get<std::string>())) kind = ThoughtKind::strategic(*m);
    }
    const auto notice =
        parse_shift_notice(p.value("pending_shift", std::string("None"))).value_or(ShiftNotice::None);
    return {{"text", render_template(p.at("content").get<std::string>(), kind, notice)}};
}

} // namespace peer
