#include "peer/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "peer/error.hpp"

namespace peer {

using nlohmann::json;

namespace {

using Getter = std::function<json(const EngineConfig&)>;
using Setter = std::function<void(EngineConfig&, const json&)>;

struct Key {
    std::string name;
    Getter get;
    Setter set;
};

double as_number(const std::string& key, const json& v) {
    if (!v.is_number()) throw validation_error("config " + key + " must be a number");
    return v.get<double>();
}

int as_int(const std::string& key, const json& v) {
    if (!v.is_number_integer()) throw validation_error("config " + key + " must be an integer");
    return v.get<int>();
}

bool as_bool(const std::string& key, const json& v) {
    if (!v.is_boolean()) throw validation_error("config " + key + " must be a boolean");
    return v.get<bool>();
}

#define PEER_NUMBER_KEY(name, field)                                              \
    Key {                                                                         \
        name, [](const EngineConfig& c) { return json(c.field); },                \
            [](EngineConfig& c, const json& v) { c.field = as_number(name, v); }  \
    }
#define PEER_INT_KEY(name, field)                                                 \
    Key {                                                                         \
        name, [](const EngineConfig& c) { return json(c.field); },                \
            [](EngineConfig& c, const json& v) { c.field = as_int(name, v); }     \
    }

const std::vector<Key>& keys() {
    static const std::vector<Key> table = {
        PEER_INT_KEY("phase.max_turns", phase.max_turns),
        Key{"phase.boundary",
            [](const EngineConfig& c) { return c.phase.boundary ? json(*c.phase.boundary) : json(nullptr); },
            [](EngineConfig& c, const json& v) {
                if (v.is_null()) {
                    c.phase.boundary.reset();
                } else {
                    c.phase.boundary = as_int("phase.boundary", v);
                }
            }},
        PEER_NUMBER_KEY("interpreter.beta", interpreter_beta),
        PEER_NUMBER_KEY("agent.sensitivity", agent.sensitivity),
        PEER_NUMBER_KEY("agent.concession_threshold", agent.concession_threshold),
        PEER_INT_KEY("generator.n_general", generator.budget.n_general),
        PEER_INT_KEY("generator.n_strategic", generator.budget.n_strategic),
        PEER_INT_KEY("generator.window", generator.window),
        PEER_INT_KEY("generator.memory_k", generator.memory_k),
        Key{"generator.heartbeat.enabled",
            [](const EngineConfig& c) { return json(c.generator.heartbeat_enabled); },
            [](EngineConfig& c, const json& v) {
                c.generator.heartbeat_enabled = as_bool("generator.heartbeat.enabled", v);
            }},
        Key{"generator.heartbeat.period_ms",
            [](const EngineConfig& c) { return json(c.generator.heartbeat_period.count()); },
            [](EngineConfig& c, const json& v) {
                c.generator.heartbeat_period =
                    std::chrono::milliseconds(as_int("generator.heartbeat.period_ms", v));
            }},
        PEER_NUMBER_KEY("evaluator.weights.relevance", evaluator.weights.relevance),
        PEER_NUMBER_KEY("evaluator.weights.information_gap", evaluator.weights.information_gap),
        PEER_NUMBER_KEY("evaluator.weights.expected_impact", evaluator.weights.expected_impact),
        PEER_NUMBER_KEY("evaluator.gate.collapsed_strength_floor", evaluator.collapsed_strength_floor),
        PEER_NUMBER_KEY("articulator.threshold", articulator_threshold),
        PEER_NUMBER_KEY("articulator.p_general", articulator_p_general),
        Key{"provider.timeout_ms",
            [](const EngineConfig& c) { return json(c.provider_timeout.count()); },
            [](EngineConfig& c, const json& v) {
                c.provider_timeout = std::chrono::milliseconds(as_int("provider.timeout_ms", v));
            }},
    };
    return table;
}

#undef PEER_NUMBER_KEY
#undef PEER_INT_KEY

const Key* find_key(const std::string& name) {
    for (const auto& k : keys()) {
        if (k.name == name) return &k;
    }
    return nullptr;
}

std::string env_name(const std::string& key) {
    std::string out = "PEER_";
    for (char c : key) {
        out.push_back(c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    }
    return out;
}

// "/a/b/c" -> "a.b.c"
std::string dotted(const std::string& pointer) {
    std::string out = pointer.substr(1);
    std::replace(out.begin(), out.end(), '/', '.');
    return out;
}

bool is_section(const std::string& name) {
    for (const auto& k : keys()) {
        if (k.name.rfind(name + ".", 0) == 0) return true;
    }
    return false;
}

} // namespace

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> n;
        for (const auto& k : keys()) n.push_back(k.name);
        return n;
    }();
    return names;
}

void EngineConfig::validate() const {
    if (phase.max_turns < 1) throw validation_error("phase.max_turns must be >= 1");
    if (phase.boundary && *phase.boundary < 0) throw validation_error("phase.boundary must be >= 0");
    if (!(interpreter_beta >= 0.0)) throw validation_error("interpreter.beta must be >= 0");
    if (!(agent.sensitivity >= 0.0)) throw validation_error("agent.sensitivity must be >= 0");
    if (!(agent.concession_threshold >= 0.0 && agent.concession_threshold <= 1.0)) {
        throw validation_error("agent.concession_threshold must be in [0, 1]");
    }
    const auto& b = generator.budget;
    if (b.n_general < 0 || b.n_strategic < 0 || b.n_general + b.n_strategic < 1) {
        throw validation_error("generator budget must request at least one thought");
    }
    if (generator.window < 1) throw validation_error("generator.window must be >= 1");
    if (generator.memory_k < 1) throw validation_error("generator.memory_k must be >= 1");
    if (generator.heartbeat_period.count() <= 0) {
        throw validation_error("generator.heartbeat.period_ms must be positive");
    }
    evaluator.weights.validate();
    if (!(evaluator.collapsed_strength_floor >= 1.0 && evaluator.collapsed_strength_floor <= 5.0)) {
        throw validation_error("evaluator.gate.collapsed_strength_floor must be in [1, 5]");
    }
    ArticulationPolicy{articulator_threshold, articulator_p_general, 0}.validate();
    if (provider_timeout.count() <= 0) throw validation_error("provider.timeout_ms must be positive");
}

json EngineConfig::to_json() const {
    json out = json::object();
    for (const auto& k : keys()) {
        std::string pointer = "/" + k.name;
        std::replace(pointer.begin(), pointer.end(), '.', '/');
        out[json::json_pointer(pointer)] = k.get(*this);
    }
    return out;
}

EngineConfig EngineConfig::from_json(const json& j) {
    return from_json(j, EngineConfig{});
}

EngineConfig EngineConfig::from_json(const json& j, EngineConfig base) {
    if (!j.is_object()) throw validation_error("config must be a JSON object");
    const json flat = j.flatten();
    for (const auto& [pointer, value] : flat.items()) {
        // flatten() turns empty objects into nulls; those set nothing.
        if (pointer.empty()) continue;
        const std::string name = dotted(pointer);
        const Key* key = find_key(name);
        if (!key && value.is_null() && is_section(name)) continue;
        if (!key) throw validation_error("unknown config key " + name);
        key->set(base, value);
    }
    base.validate();
    return base;
}

EngineConfig EngineConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw not_found("cannot open config " + path.string());
    try {
        return from_json(json::parse(in));
    } catch (const json::exception& e) {
        throw validation_error("config " + path.string() + ": " + e.what());
    }
}

EngineConfig EngineConfig::with_env_overrides(
    const std::function<std::optional<std::string>(const char*)>& getenv) const {
    EngineConfig out = *this;
    for (const auto& k : keys()) {
        const std::string var = env_name(k.name);
        auto raw = getenv(var.c_str());
        if (!raw) continue;
        json value;
        try {
            value = json::parse(*raw);
        } catch (const json::exception&) {
            throw validation_error(var + " is not a JSON scalar: " + *raw);
        }
        k.set(out, value);
    }
    out.validate();
    return out;
}

} // namespace peer
