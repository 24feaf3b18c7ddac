#include "peer/service.hpp"

#include <fstream>
#include <random>
#include <sstream>

#include "peer/error.hpp"
#include "peer/rng.hpp"

namespace peer {

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::uint64_t load_or_create_key(const std::filesystem::path& path) {
    if (std::filesystem::exists(path)) {
        return std::stoull(read_file(path), nullptr, 16);
    }
    std::random_device rd;
    const std::uint64_t key = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    std::ofstream(path) << std::hex << key << '\n';
    return key;
}

std::optional<std::uint64_t> numeric_suffix(const std::string& id) {
    if (id.size() < 2 || id[0] != 's') return std::nullopt;
    try {
        std::size_t used = 0;
        const auto n = std::stoull(id.substr(1), &used);
        if (used == id.size() - 1) return n;
    } catch (const std::exception&) {
    }
    return std::nullopt;
}

} // namespace

SessionRegistry::SessionRegistry(DilemmaCatalog catalog, std::shared_ptr<Provider> provider,
                                 ServiceOptions options)
    : catalog_(std::move(catalog)), provider_(std::move(provider)), options_(std::move(options)) {
    if (!provider_) throw validation_error("registry needs a provider");
    options_.config.validate();
    if (!options_.data_dir) {
        std::random_device rd;
        token_key_ = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
        return;
    }
    const auto& dir = *options_.data_dir;
    std::filesystem::create_directories(dir);
    token_key_ = load_or_create_key(dir / "token.key");

    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.path().extension() != ".jsonl") continue;
        auto events = read_event_log(entry.path(), /*tolerate_torn_tail=*/true);
        if (events.empty()) continue;
        const std::string clean = to_jsonl(events);
        if (read_file(entry.path()) != clean) {
            // Drop a torn final line so appends continue a well-formed log.
            std::ofstream(entry.path(), std::ios::binary | std::ios::trunc) << clean;
        }
        auto session = Session::resume(std::move(events), provider_,
                                       std::make_unique<FileEventSink>(entry.path()), options_.clock);
        session->set_token_key(token_key_);
        std::string id = session->id();
        if (auto n = numeric_suffix(id)) next_id_ = std::max(next_id_, *n + 1);
        sessions_.emplace(std::move(id), std::shared_ptr<Session>(std::move(session)));
    }
}

std::string SessionRegistry::create_session(const std::string& dilemma_id, std::optional<EngineConfig> config,
                                            std::optional<std::uint64_t> seed) {
    if (!catalog_.contains(dilemma_id)) throw not_found("unknown dilemma " + dilemma_id);
    std::lock_guard lock(mu_);
    const std::string id = "s" + std::to_string(next_id_);

    SessionSetup setup;
    setup.session_id = id;
    setup.dilemma = catalog_.at(dilemma_id);
    setup.config = config.value_or(options_.config);
    setup.seed = seed.value_or(fnv1a64(id));
    setup.persona = options_.persona;

    std::unique_ptr<EventSink> sink;
    if (options_.data_dir) {
        const auto path = *options_.data_dir / (id + ".jsonl");
        if (std::filesystem::exists(path)) throw conflict("log for session " + id + " already exists");
        sink = std::make_unique<FileEventSink>(path);
    }
    auto session = Session::create(std::move(setup), provider_, std::move(sink), options_.clock);
    session->set_token_key(token_key_);
    ++next_id_;
    sessions_.emplace(id, std::shared_ptr<Session>(std::move(session)));
    return id;
}

std::shared_ptr<Session> SessionRegistry::get(const std::string& id) const {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw not_found("unknown session " + id);
    return it->second;
}

std::vector<std::string> SessionRegistry::ids() const {
    std::lock_guard lock(mu_);
    std::vector<std::string> out;
    for (const auto& [id, s] : sessions_) out.push_back(id);
    return out;
}

std::size_t SessionRegistry::tick_heartbeats(std::chrono::steady_clock::time_point now) {
    std::vector<std::shared_ptr<Session>> sessions;
    {
        std::lock_guard lock(mu_);
        for (const auto& [id, s] : sessions_) sessions.push_back(s);
    }
    std::size_t fired = 0;
    for (const auto& s : sessions) {
        const SessionState st = s->state();
        const auto& gen = st.config.generator;
        if (st.status != SessionStatus::Active || !gen.heartbeat_enabled) continue;
        if (now - s->last_activity() < gen.heartbeat_period) continue;
        try {
            if (!s->heartbeat().empty()) ++fired;
        } catch (const std::exception&) {
            // A failing heartbeat must not stop the others.
        }
    }
    return fired;
}

} // namespace peer
