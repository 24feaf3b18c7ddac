#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <set>

#include "peer/provider.hpp"

namespace peer {

/// Wraps another provider and fails a deterministic fraction of calls.
/// Used to exercise the degraded paths of the pipeline.
class FaultInjectingProvider final : public Provider {
public:
    FaultInjectingProvider(std::shared_ptr<Provider> inner, double failure_rate,
                           ProviderError::Kind kind = ProviderError::Kind::Transport,
                           std::uint64_t seed = 0);

    /// Restricts failures to the given capabilities (all when empty).
    void only(std::set<Capability> capabilities) { only_ = std::move(capabilities); }

    std::uint64_t calls() const noexcept { return calls_.load(); }
    std::uint64_t failures() const noexcept { return failures_.load(); }

private:
    ProviderResponse do_call(const ProviderRequest& request) override;

    std::shared_ptr<Provider> inner_;
    double failure_rate_;
    ProviderError::Kind kind_;
    std::uint64_t seed_;
    std::set<Capability> only_;
    std::atomic<std::uint64_t> calls_{0};
    std::atomic<std::uint64_t> failures_{0};
};

} // namespace peer
