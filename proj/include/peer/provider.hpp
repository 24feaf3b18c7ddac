#pragma once

#include <chrono>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace peer {

enum class Capability {
    GenerateThoughts,
    ClassifyValues,
    DetectPersuasion,
    ClassifyAssertiveness,
    ScoreThought,
    Paraphrase,
};

inline constexpr Capability all_capabilities[] = {
    Capability::GenerateThoughts,      Capability::ClassifyValues, Capability::DetectPersuasion,
    Capability::ClassifyAssertiveness, Capability::ScoreThought,   Capability::Paraphrase,
};

std::string_view to_string(Capability c) noexcept;

struct ProviderRequest {
    Capability capability = Capability::ClassifyValues;
    nlohmann::json payload = nlohmann::json::object();
    std::chrono::milliseconds timeout{10000};
    std::string trace_id;
};

enum class ResponseSource { Mock, Remote };

struct ProviderResponse {
    nlohmann::json result;
    std::chrono::milliseconds latency{0};
    ResponseSource source = ResponseSource::Mock;
};

class ProviderError : public std::runtime_error {
public:
    enum class Kind { Timeout, MalformedOutput, Transport };

    ProviderError(Kind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

std::string_view to_string(ProviderError::Kind k) noexcept;

/// Published JSON schema of a capability's result.
const nlohmann::json& result_schema(Capability c);

/// First violation of the capability's result schema, if any.
std::optional<std::string> schema_violation(Capability c, const nlohmann::json& result);

/**
 * Boundary for every model-backed capability.
 *
 * Non-virtual interface: `call` checks the request, delegates to the backend
 * and rejects results that do not match the capability schema with
 * MalformedOutput. Implementations must be safe for concurrent calls.
 */
class Provider {
public:
    virtual ~Provider() = default;

    ProviderResponse call(const ProviderRequest& request);

private:
    virtual ProviderResponse do_call(const ProviderRequest& request) = 0;
};

} // namespace peer
