#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "peer/service.hpp"

namespace peer {

struct ServerOptions {
    std::string address = "127.0.0.1";
    std::uint16_t port = 8080;  // 0 picks a free port
    int threads = 4;
    bool handle_signals = false;  // stop on SIGINT/SIGTERM
};

/**
 * REST + WebSocket front end over a SessionRegistry.
 *
 *   POST /sessions                   {"dilemma_id", "seed"?, "config"?}
 *   POST /sessions/{id}/players      {"name"?} -> {"player_id", "token"}
 *   POST /sessions/{id}/stance       {"stance", "confidence"}   (X-Player-Token)
 *   POST /sessions/{id}/utterance    {"text"}                   (X-Player-Token)
 *   GET  /sessions/{id}/state
 *   POST /sessions/{id}/close
 *   GET  /sessions/{id}/events       WebSocket; one SessionEvent JSON per message,
 *                                    backlog first; "?after=<seq>" skips older ones
 *
 * Engine errors map to 400 (validation), 403 (bad token), 404, 409 and 500.
 */
class ApiServer {
public:
    ApiServer(SessionRegistry& registry, ServerOptions options);
    ~ApiServer();

    ApiServer(const ApiServer&) = delete;
    ApiServer& operator=(const ApiServer&) = delete;

    /// Binds and starts serving on background threads; returns the bound port.
    std::uint16_t start();
    void stop();

    /// Blocks until `stop` is called from another thread or a signal handler.
    void wait();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace peer
