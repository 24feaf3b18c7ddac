#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "peer/events.hpp"
#include "peer/provider.hpp"

namespace peer {

/// Durable destination for events. `append` must not return before the
/// event is persisted.
class EventSink {
public:
    virtual ~EventSink() = default;
    virtual void append(const SessionEvent& event) = 0;
};

/// Append-only JSON Lines file, flushed and fsync'ed per event.
class FileEventSink final : public EventSink {
public:
    explicit FileEventSink(const std::filesystem::path& path);
    ~FileEventSink() override;

    FileEventSink(const FileEventSink&) = delete;
    FileEventSink& operator=(const FileEventSink&) = delete;

    void append(const SessionEvent& event) override;

private:
    std::FILE* file_ = nullptr;
};

using Clock = std::function<std::string()>;

/// ISO-8601 UTC with milliseconds.
std::string utc_timestamp();

struct SessionSetup {
    std::string session_id;
    DilemmaCard dilemma;
    EngineConfig config;
    std::uint64_t seed = 0;
    AgentPersona persona = AgentPersona::default_peer();
};

/**
 * One deliberation: the single writer for its event log.
 *
 * Commands are serialized on a command mutex; state reads take a separate
 * lock and are never blocked by provider calls. Every event is written to
 * the sink before it is folded into the state and before listeners see it,
 * so an acknowledged command is always recoverable from the log. Pipeline
 * results whose trigger was superseded or whose session closed meanwhile
 * are discarded.
 */
class Session {
public:
    using Listener = std::function<void(const SessionEvent&)>;

    static std::unique_ptr<Session> create(SessionSetup setup, std::shared_ptr<Provider> provider,
                                           std::unique_ptr<EventSink> sink = nullptr,
                                           Clock clock = utc_timestamp);

    /// Rebuilds a session from its log; new events continue the sequence.
    static std::unique_ptr<Session> resume(std::vector<SessionEvent> log,
                                           std::shared_ptr<Provider> provider,
                                           std::unique_ptr<EventSink> sink = nullptr,
                                           Clock clock = utc_timestamp);

    Session(const Session&) = delete;
    Session& operator=(const Session&) = delete;

    /// Adds one of the two human players. `id` defaults to "p1"/"p2".
    Participant register_player(std::optional<std::string> name = std::nullopt,
                                std::optional<PlayerId> id = std::nullopt);

    std::vector<SessionEvent> submit_stance(const OpinionState& opinion);

    /// Records a human turn and runs the inner-thought pipeline on it.
    std::vector<SessionEvent> post_utterance(const PlayerId& player, const std::string& text);

    /// Runs the pipeline without a new utterance (silence heartbeat).
    std::vector<SessionEvent> heartbeat();

    std::vector<SessionEvent> close(const std::string& reason = "closed");

    SessionState state() const;
    std::vector<SessionEvent> events() const;
    const std::string& id() const noexcept { return id_; }

    /// Opaque per-player credential, keyed by a secret that is never logged.
    std::string player_token(const PlayerId& player) const;
    std::optional<PlayerId> player_for_token(const std::string& token) const;
    void set_token_key(std::uint64_t key);

    /// Registers a listener and returns, atomically, the events after
    /// `after_seq` that it will not be notified about.
    std::pair<std::vector<SessionEvent>, std::uint64_t> subscribe(Listener listener,
                                                                  std::uint64_t after_seq = 0);
    void unsubscribe(std::uint64_t listener_id);

    std::chrono::steady_clock::time_point last_activity() const;

private:
    Session(std::shared_ptr<Provider> provider, std::unique_ptr<EventSink> sink, Clock clock);

    const SessionEvent& emit(EventType type, nlohmann::json payload,
                             std::vector<SessionEvent>& out);
    void run_thought_pipeline(std::uint64_t trigger_seq, std::string_view trigger_kind,
                              std::vector<SessionEvent>& out);
    DeliberationContext build_context(std::uint64_t trigger_seq, std::uint64_t round) const;
    ProviderRequest request(Capability capability, nlohmann::json payload,
                            std::string_view label) const;
    void require_status(SessionStatus expected, std::string_view action) const;

    std::shared_ptr<Provider> provider_;
    std::unique_ptr<EventSink> sink_;
    Clock clock_;
    std::string id_;
    EngineConfig config_;

    std::mutex command_mu_;
    mutable std::mutex mu_;
    SessionState state_;
    std::vector<SessionEvent> log_;
    std::map<std::uint64_t, Listener> listeners_;
    std::uint64_t next_listener_ = 1;
    std::uint64_t heartbeats_ = 0;
    std::uint64_t token_key_ = 0;
    std::chrono::steady_clock::time_point last_activity_;
};

} // namespace peer
