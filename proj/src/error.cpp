#include "protobias/error.hpp"

namespace protobias {

std::string_view error_code_name(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::InvariantError: return "InvariantError";
    case ErrorCode::DuplicateIdError: return "DuplicateIdError";
    case ErrorCode::EmptyTaxonomyError: return "EmptyTaxonomyError";
    case ErrorCode::MissingPlaceholderError: return "MissingPlaceholderError";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::MissingFieldError: return "MissingFieldError";
    case ErrorCode::EndpointError: return "EndpointError";
    case ErrorCode::BudgetExhausted: return "BudgetExhausted";
    case ErrorCode::PartialFailure: return "PartialFailure";
    case ErrorCode::ScoreParseError: return "ScoreParseError";
    case ErrorCode::DegenerateEmbeddingError: return "DegenerateEmbeddingError";
    case ErrorCode::ProbabilityUnavailableError: return "ProbabilityUnavailableError";
    case ErrorCode::InsufficientPairsError: return "InsufficientPairsError";
    case ErrorCode::EmptyInputError: return "EmptyInputError";
    case ErrorCode::InsufficientItemsError: return "InsufficientItemsError";
    case ErrorCode::RangeError: return "RangeError";
    case ErrorCode::LengthMismatchError: return "LengthMismatchError";
    case ErrorCode::NoOverlapError: return "NoOverlapError";
    case ErrorCode::BatchExhausted: return "BatchExhausted";
    case ErrorCode::UnknownAnnotator: return "UnknownAnnotator";
    case ErrorCode::DuplicateSubmission: return "DuplicateSubmission";
    case ErrorCode::OutOfOrderSubmission: return "OutOfOrderSubmission";
    case ErrorCode::OverlapError: return "OverlapError";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::MissingManifestError: return "MissingManifestError";
    }
    return "Unknown";
}

} // namespace protobias
