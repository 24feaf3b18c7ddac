#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace peer {

enum class ErrorCode {
    Validation,
    NotFound,
    Conflict,
    Forbidden,
    Internal,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Engine-level failure carrying a category the service layer maps onto
/// HTTP status codes.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

inline Error validation_error(const std::string& message) {
    return Error(ErrorCode::Validation, message);
}

inline Error not_found(const std::string& message) {
    return Error(ErrorCode::NotFound, message);
}

inline Error conflict(const std::string& message) {
    return Error(ErrorCode::Conflict, message);
}

/// Raised when an event log cannot be folded; names the first offending seq.
class ReplayError : public std::runtime_error {
public:
    ReplayError(std::uint64_t seq, const std::string& message)
        : std::runtime_error("replay failed at seq " + std::to_string(seq) + ": " + message),
          seq_(seq) {}

    std::uint64_t seq() const noexcept { return seq_; }

private:
    std::uint64_t seq_;
};

} // namespace peer
