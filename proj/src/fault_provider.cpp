#include "peer/fault_provider.hpp"

#include "peer/error.hpp"
#include "peer/rng.hpp"

namespace peer {

FaultInjectingProvider::FaultInjectingProvider(std::shared_ptr<Provider> inner, double failure_rate,
                                               ProviderError::Kind kind, std::uint64_t seed)
    : inner_(std::move(inner)), failure_rate_(failure_rate), kind_(kind), seed_(seed) {
    if (!(failure_rate >= 0.0 && failure_rate <= 1.0)) {
        throw validation_error("failure rate must be in [0, 1]");
    }
}

ProviderResponse FaultInjectingProvider::do_call(const ProviderRequest& request) {
    const std::uint64_t n = calls_.fetch_add(1);
    const bool eligible = only_.empty() || only_.count(request.capability) != 0;
    if (eligible && Rng(mix64(seed_ + n)).bernoulli(failure_rate_)) {
        failures_.fetch_add(1);
        throw ProviderError(kind_, "injected fault on " + std::string(to_string(request.capability)));
    }
    if (!inner_) {
        throw ProviderError(ProviderError::Kind::Transport, "no backend behind fault injector");
    }
    return inner_->call(request);
}

} // namespace peer
