#pragma once

#include <functional>
#include <optional>
#include <string>

#include "peer/provider.hpp"

namespace peer {

struct RemoteConfig {
    /// Base URL such as "https://api.example.com/v1"; "/chat/completions" is
    /// appended unless already present.
    std::string url;
    std::string key;
    std::string model;

    /// PROVIDER_URL, PROVIDER_KEY, PROVIDER_MODEL.
    static RemoteConfig from_env(const std::function<std::optional<std::string>(const char*)>& getenv);
};

/// Chat-completion backend. Each capability is one JSON-mode request; an
/// unparsable or off-schema reply gets one repair round before the call
/// fails with MalformedOutput.
class RemoteProvider final : public Provider {
public:
    explicit RemoteProvider(RemoteConfig config);

    const RemoteConfig& config() const noexcept { return config_; }

    /// System prompt sent for a capability. Exposed for tests.
    static std::string instructions(Capability c);

private:
    ProviderResponse do_call(const ProviderRequest& request) override;

    RemoteConfig config_;
    std::string scheme_host_port_;
    std::string path_;
};

} // namespace peer
