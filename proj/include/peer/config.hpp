#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "peer/agent_state.hpp"
#include "peer/articulator.hpp"
#include "peer/evaluator.hpp"
#include "peer/thought.hpp"

namespace peer {

struct PhaseConfig {
    int max_turns = 20;
    std::optional<int> boundary;  // defaults to max_turns / 2

    int effective_boundary() const { return boundary.value_or(max_turns / 2); }
};

struct GeneratorConfig {
    GenerationBudget budget;
    int window = 8;
    int memory_k = 3;
    bool heartbeat_enabled = false;
    std::chrono::milliseconds heartbeat_period{15000};
};

/// Every tunable of the pipeline. Serialized into SessionCreated so a log
/// replays under the configuration it was recorded with.
struct EngineConfig {
    PhaseConfig phase;
    double interpreter_beta = 0.25;
    PersuasionConfig agent;
    GeneratorConfig generator;
    EvaluatorConfig evaluator;
    double articulator_threshold = 3.5;
    double articulator_p_general = 0.6;
    std::chrono::milliseconds provider_timeout{10000};

    void validate() const;

    nlohmann::json to_json() const;

    /// Overlays the keys present in `j` onto `base`. Unknown keys are rejected.
    static EngineConfig from_json(const nlohmann::json& j, EngineConfig base);
    static EngineConfig from_json(const nlohmann::json& j);

    static EngineConfig load(const std::filesystem::path& path);

    /// Applies PEER_<KEY> overrides where KEY is the dotted key upper-cased
    /// with dots as underscores, e.g. PEER_ARTICULATOR_THRESHOLD.
    EngineConfig with_env_overrides(
        const std::function<std::optional<std::string>(const char*)>& getenv) const;
};

/// Dotted config keys accepted by `from_json` and the environment overlay.
const std::vector<std::string>& config_keys();

} // namespace peer
