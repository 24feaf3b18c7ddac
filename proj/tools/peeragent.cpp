#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "peer/error.hpp"
#include "peer/events.hpp"
#include "peer/mock_provider.hpp"
#include "peer/remote_provider.hpp"
#include "peer/server.hpp"
#include "peer/service.hpp"
#include "peer/simulate.hpp"

namespace {

const std::filesystem::path data_root{PEER_DATA_DIR};

std::optional<std::string> env(const char* name) {
    const char* v = std::getenv(name);
    return v ? std::optional<std::string>(v) : std::nullopt;
}

peer::EngineConfig load_config(const std::string& path) {
    peer::EngineConfig cfg = path.empty() ? peer::EngineConfig{} : peer::EngineConfig::load(path);
    return cfg.with_env_overrides(env);
}

std::shared_ptr<peer::Provider> make_provider(const std::string& kind, const std::string& fixtures) {
    if (kind == "remote") return std::make_shared<peer::RemoteProvider>(peer::RemoteConfig::from_env(env));
    return std::make_shared<peer::MockProvider>(peer::Fixtures::load(fixtures));
}

int serve(const std::string& address, int port, int threads, const std::string& config, const std::string& provider,
          const std::string& catalog, const std::string& fixtures, const std::string& persona,
          const std::string& data_dir) {
    peer::ServiceOptions options;
    options.config = load_config(config);
    if (!persona.empty()) options.persona = peer::AgentPersona::load(persona);
    if (!data_dir.empty()) options.data_dir = data_dir;
    peer::SessionRegistry registry(peer::DilemmaCatalog::load(catalog), make_provider(provider, fixtures),
                                   std::move(options));
    peer::ApiServer server(registry, {address, static_cast<std::uint16_t>(port), threads, true});
    const auto bound = server.start();
    std::cout << "listening on " << address << ":" << bound << " (" << provider << " provider, "
              << registry.ids().size() << " resumed sessions)" << std::endl;
    server.wait();
    return 0;
}

int replay_log(const std::string& path) {
    const auto events = peer::read_event_log(path);
    const auto state = peer::replay(events);
    std::cout << state.to_json().dump(2) << '\n';
    return 0;
}

int simulate(const std::string& script_path, std::uint64_t seed, const std::string& out, const std::string& catalog,
             const std::string& fixtures, const std::string& config, bool mask) {
    const auto cat = peer::DilemmaCatalog::load(catalog);
    const auto script = peer::Script::load(script_path, &cat);
    peer::MockProvider provider(peer::Fixtures::load(fixtures));
    peer::SimulationOptions options;
    options.seed = seed;
    options.base_config = load_config(config);
    auto events = peer::run_script(script, provider, options);
    if (mask) events = peer::mask_timestamps(events);
    const std::string log = peer::to_jsonl(events);
    if (out.empty()) {
        std::cout << log;
    } else {
        std::ofstream(out, std::ios::binary) << log;
    }
    std::cerr << peer::summarize_log(events).to_json().dump() << '\n';
    return 0;
}

int inspect(const std::string& path) {
    const auto events = peer::read_event_log(path, true);
    std::cout << peer::summarize_log(events).to_json().dump(2) << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"peeragent: deliberation peer agent engine"};
    app.require_subcommand(1);

    std::string address = "127.0.0.1";
    int port = 8080;
    int threads = 4;
    std::string config;
    std::string provider = "mock";
    std::string catalog = (data_root / "dilemmas.jsonl").string();
    std::string fixtures = (data_root / "fixtures").string();
    std::string persona;
    std::string data_dir;

    auto* serve_cmd = app.add_subcommand("serve", "run the REST + WebSocket service");
    serve_cmd->add_option("--address", address, "bind address");
    serve_cmd->add_option("--port", port, "port, 0 for any free port");
    serve_cmd->add_option("--threads", threads, "I/O threads")->check(CLI::PositiveNumber);
    serve_cmd->add_option("--config", config, "engine config JSON")->check(CLI::ExistingFile);
    serve_cmd->add_option("--provider", provider, "mock or remote")->check(CLI::IsMember({"mock", "remote"}));
    serve_cmd->add_option("--catalog", catalog, "dilemma catalog (JSON Lines)")->check(CLI::ExistingFile);
    serve_cmd->add_option("--fixtures", fixtures, "mock provider fixture directory")->check(CLI::ExistingDirectory);
    serve_cmd->add_option("--persona", persona, "persona JSON")->check(CLI::ExistingFile);
    serve_cmd->add_option("--data-dir", data_dir, "directory for session logs");

    std::string log_path;
    auto* replay_cmd = app.add_subcommand("replay", "fold an event log and print the final state");
    replay_cmd->add_option("logfile", log_path)->required()->check(CLI::ExistingFile);

    std::string script;
    std::uint64_t seed = 0;
    std::string out;
    bool mask = false;
    auto* sim_cmd = app.add_subcommand("simulate", "run a scripted two-player session with the mock provider");
    sim_cmd->add_option("--script", script, "script JSON")->required()->check(CLI::ExistingFile);
    sim_cmd->add_option("--seed", seed, "session master seed");
    sim_cmd->add_option("--out", out, "write the event log here instead of stdout");
    sim_cmd->add_option("--catalog", catalog, "dilemma catalog (JSON Lines)")->check(CLI::ExistingFile);
    sim_cmd->add_option("--fixtures", fixtures, "mock provider fixture directory")->check(CLI::ExistingDirectory);
    sim_cmd->add_option("--config", config, "engine config JSON")->check(CLI::ExistingFile);
    sim_cmd->add_flag("--mask-timestamps", mask, "blank every ts field");

    auto* inspect_cmd = app.add_subcommand("inspect", "summarize an event log");
    inspect_cmd->add_option("logfile", log_path)->required()->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*serve_cmd) return serve(address, port, threads, config, provider, catalog, fixtures, persona, data_dir);
        if (*replay_cmd) return replay_log(log_path);
        if (*sim_cmd) return simulate(script, seed, out, catalog, fixtures, config, mask);
        if (*inspect_cmd) return inspect(log_path);
    } catch (const peer::ReplayError& e) {
        std::cerr << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 1;
}
