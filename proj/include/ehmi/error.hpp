#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ehmi {

enum class ErrorCode {
    OutOfRange,
    NotFinite,
    WrongArity,
    ScaleViolation,
    InsufficientData,
    NumericalFailure,
    EmptyInput,
    ReferenceViolation,
    ConfigInvalid,
    SessionFinished,
    DuplicateRating,
    UnknownSession,
    DegenerateSample,
    DegenerateColumn,
    EmptyGroup,
    ParseError,
    SchemaError,
    IoError,
};

inline constexpr std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::OutOfRange: return "OUT_OF_RANGE";
    case ErrorCode::NotFinite: return "NOT_FINITE";
    case ErrorCode::WrongArity: return "WRONG_ARITY";
    case ErrorCode::ScaleViolation: return "SCALE_VIOLATION";
    case ErrorCode::InsufficientData: return "INSUFFICIENT_DATA";
    case ErrorCode::NumericalFailure: return "NUMERICAL_FAILURE";
    case ErrorCode::EmptyInput: return "EMPTY_INPUT";
    case ErrorCode::ReferenceViolation: return "REFERENCE_VIOLATION";
    case ErrorCode::ConfigInvalid: return "CONFIG_INVALID";
    case ErrorCode::SessionFinished: return "SESSION_FINISHED";
    case ErrorCode::DuplicateRating: return "DUPLICATE_RATING";
    case ErrorCode::UnknownSession: return "UNKNOWN_SESSION";
    case ErrorCode::DegenerateSample: return "DEGENERATE_SAMPLE";
    case ErrorCode::DegenerateColumn: return "DEGENERATE_COLUMN";
    case ErrorCode::EmptyGroup: return "EMPTY_GROUP";
    case ErrorCode::ParseError: return "PARSE_ERROR";
    case ErrorCode::SchemaError: return "SCHEMA_ERROR";
    case ErrorCode::IoError: return "IO_ERROR";
    }
    return "UNKNOWN";
}

// All engine failures surface as this one exception type; callers switch on code().
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace ehmi
