#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fbcir {

enum class ErrorCode {
    EmptyModality,
    NonPositiveArea,
    DimensionMismatch,
    PoolMismatch,
    EmptyPool,
    Transport,
    ProtocolViolation,
    Timeout,
    TooManyTokens,
    DegenerateState,
    MissingPositive,
    GenerationFailed,
    SourceExhausted,
    InsufficientNegatives,
    DivergedLoss,
    InvalidArgument,
    Parse,
    Backend,
};

std::string_view to_string(ErrorCode code) noexcept;

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), detail_(message) {}

    ErrorCode code() const noexcept { return code_; }
    /// The message without the code prefix.
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

}  // namespace fbcir
