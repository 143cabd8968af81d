#include "screenorder/error.hpp"

namespace screenorder {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::MalformedFile: return "MalformedFile";
    case ErrorKind::InvalidBox: return "InvalidBox";
    case ErrorKind::InconsistentInteractability: return "InconsistentInteractability";
    case ErrorKind::EncodingError: return "EncodingError";
    case ErrorKind::MissingLayout: return "MissingLayout";
    case ErrorKind::InvalidPermutation: return "InvalidPermutation";
    case ErrorKind::EmbeddingDiverged: return "EmbeddingDiverged";
    case ErrorKind::InconsistentView: return "InconsistentView";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::ImageIo: return "ImageIo";
    case ErrorKind::NoActionBlock: return "NoActionBlock";
    case ErrorKind::UnknownVerb: return "UnknownVerb";
    case ErrorKind::ArityError: return "ArityError";
    case ErrorKind::MalformedBrackets: return "MalformedBrackets";
    case ErrorKind::UnknownId: return "UnknownId";
    case ErrorKind::UnsupportedVerb: return "UnsupportedVerb";
    case ErrorKind::MissingPlaceholder: return "MissingPlaceholder";
    case ErrorKind::TokenBudgetExceeded: return "TokenBudgetExceeded";
    case ErrorKind::AuthError: return "AuthError";
    case ErrorKind::RateLimited: return "RateLimited";
    case ErrorKind::Timeout: return "Timeout";
    case ErrorKind::BackendError: return "BackendError";
    case ErrorKind::MissingState: return "MissingState";
    case ErrorKind::EmptySet: return "EmptySet";
    case ErrorKind::Config: return "Config";
    }
    return "Unknown";
}

} // namespace screenorder
