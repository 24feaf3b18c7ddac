#pragma once

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <functional>
#include <random>
#include <string>

#include "peer/mock_provider.hpp"
#include "peer/provider.hpp"
#include "peer/thought.hpp"

namespace testkit {

inline std::filesystem::path data_path(const std::string& rel) {
    return std::filesystem::path(PEER_DATA_DIR) / rel;
}

#ifdef PEER_GOLDEN_DIR
inline std::filesystem::path golden_path(const std::string& rel) {
    return std::filesystem::path(PEER_GOLDEN_DIR) / rel;
}

/// Contents of a golden file. With PEER_UPDATE_GOLDEN set, `actual` is
/// written first so the comparison passes.
inline std::string golden(const std::string& rel, const std::string& actual) {
    const auto path = golden_path(rel);
    if (std::getenv("PEER_UPDATE_GOLDEN")) {
        std::ofstream(path, std::ios::binary) << actual;
    }
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}
#endif

inline const peer::Fixtures& fixtures() {
    static const peer::Fixtures f = peer::Fixtures::load(data_path("fixtures"));
    return f;
}

inline std::shared_ptr<peer::MockProvider> mock() {
    return std::make_shared<peer::MockProvider>(fixtures());
}

/// Provider whose behaviour is a plain function; counts calls.
class FnProvider final : public peer::Provider {
public:
    using Fn = std::function<nlohmann::json(const peer::ProviderRequest&)>;
    explicit FnProvider(Fn fn) : fn_(std::move(fn)) {}
    int calls() const { return calls_; }

private:
    peer::ProviderResponse do_call(const peer::ProviderRequest& r) override {
        ++calls_;
        return {fn_(r), std::chrono::milliseconds{0}, peer::ResponseSource::Mock};
    }
    Fn fn_;
    std::atomic<int> calls_{0};
};

inline std::shared_ptr<FnProvider> failing_provider() {
    return std::make_shared<FnProvider>([](const peer::ProviderRequest&) -> nlohmann::json {
        throw peer::ProviderError(peer::ProviderError::Kind::Transport, "offline");
    });
}

class TempDir {
public:
    TempDir() {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("peer-test-" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline peer::DilemmaCard robots() {
    return {"killer-robots", "Should we allow the development of AI killer robots?",
            {"AI killer robots", "military", "autonomy"}};
}

inline peer::Utterance utt(std::uint64_t seq, const std::string& speaker, const std::string& text,
                           peer::ValueSet tags = {}) {
    return {seq, peer::PlayerId(speaker), text, std::move(tags), {}};
}

} // namespace testkit
