#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace protobias {

enum class ErrorCode {
    InvalidArgument,
    IoError,
    SchemaError,
    InvariantError,
    DuplicateIdError,
    EmptyTaxonomyError,
    MissingPlaceholderError,
    ParseError,
    MissingFieldError,
    EndpointError,
    BudgetExhausted,
    PartialFailure,
    ScoreParseError,
    DegenerateEmbeddingError,
    ProbabilityUnavailableError,
    InsufficientPairsError,
    EmptyInputError,
    InsufficientItemsError,
    RangeError,
    LengthMismatchError,
    NoOverlapError,
    BatchExhausted,
    UnknownAnnotator,
    DuplicateSubmission,
    OutOfOrderSubmission,
    OverlapError,
    ConfigError,
    MissingManifestError,
};

std::string_view error_code_name(ErrorCode code) noexcept;

// Every failure the harness reports is an Error carrying a stable code name;
// the CLI serializes {"error": <name>, "message": ...} from it.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string &message)
        : std::runtime_error(message), m_code(code) {}

    ErrorCode code() const noexcept { return m_code; }
    std::string_view name() const noexcept { return error_code_name(m_code); }

private:
    ErrorCode m_code;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string &message) {
    throw Error(code, message);
}

} // namespace protobias
