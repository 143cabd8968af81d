#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace screenorder {

enum class ErrorKind {
    MalformedFile,
    InvalidBox,
    InconsistentInteractability,
    EncodingError,
    MissingLayout,
    InvalidPermutation,
    EmbeddingDiverged,
    InconsistentView,
    DimensionMismatch,
    ImageIo,
    NoActionBlock,
    UnknownVerb,
    ArityError,
    MalformedBrackets,
    UnknownId,
    UnsupportedVerb,
    MissingPlaceholder,
    TokenBudgetExceeded,
    AuthError,
    RateLimited,
    Timeout,
    BackendError,
    MissingState,
    EmptySet,
    Config,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Every failure raised by the library carries a kind so callers can map it
/// to an exit code or a transcript entry without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

} // namespace screenorder
