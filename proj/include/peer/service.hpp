#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "peer/session.hpp"

namespace peer {

struct ServiceOptions {
    EngineConfig config;
    AgentPersona persona = AgentPersona::default_peer();
    /// Where session logs live; in-memory only when unset.
    std::optional<std::filesystem::path> data_dir;
    Clock clock = utc_timestamp;
};

/// All live sessions of one service instance. On construction, logs found in
/// `data_dir` are replayed and their sessions resume where they stopped.
class SessionRegistry {
public:
    SessionRegistry(DilemmaCatalog catalog, std::shared_ptr<Provider> provider,
                    ServiceOptions options);

    std::string create_session(const std::string& dilemma_id,
                               std::optional<EngineConfig> config = std::nullopt,
                               std::optional<std::uint64_t> seed = std::nullopt);

    /// Throws NotFound for unknown ids.
    std::shared_ptr<Session> get(const std::string& id) const;

    std::vector<std::string> ids() const;

    const DilemmaCatalog& catalog() const noexcept { return catalog_; }
    const ServiceOptions& options() const noexcept { return options_; }

    /// Fires the silence heartbeat on active sessions idle for at least their
    /// configured period. Returns the number of sessions triggered.
    std::size_t tick_heartbeats(std::chrono::steady_clock::time_point now);

private:
    DilemmaCatalog catalog_;
    std::shared_ptr<Provider> provider_;
    ServiceOptions options_;

    mutable std::mutex mu_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::uint64_t next_id_ = 1;
    std::uint64_t token_key_ = 0;
};

} // namespace peer
