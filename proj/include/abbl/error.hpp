#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace abbl {

enum class ErrorCode {
    // ontology
    UnknownParent,
    UnknownType,
    DuplicateAttributeName,
    DuplicateRelationName,
    InvalidAttribute,
    // rules
    SyntaxError,
    UnknownAttribute,
    UnknownRelation,
    PathTooDeep,
    TypeMismatch,
    InvalidParameter,
    UnresolvedPath,
    ParameterOutOfRange,
    MissingParameter,
    NonFiniteValue,
    UnknownRule,
    ParameterRangeConflict,
    // knowledge
    SchemaError,
    ValueOutOfRange,
    DuplicateObservation,
    UnknownEntity,
    // simulation
    InvalidScenario,
    MissingInitialValue,
    MissingPosterior,
    // scoring
    KindMismatch,
    NoEligibleEntity,
    NoComparableData,
    // inference
    UnknownParameterInGroup,
    GridMismatch,
    EmptyInput,
    InvalidPrior,
    NoApplicableModel,
    // worldview
    UnknownWorldView,
    UnfittedParameters,
    // workspace / cli
    IoError,
    MissingResult,
    WorkspaceLocked,
};

constexpr std::string_view to_string(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::UnknownParent: return "UnknownParent";
    case ErrorCode::UnknownType: return "UnknownType";
    case ErrorCode::DuplicateAttributeName: return "DuplicateAttributeName";
    case ErrorCode::DuplicateRelationName: return "DuplicateRelationName";
    case ErrorCode::InvalidAttribute: return "InvalidAttribute";
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::UnknownAttribute: return "UnknownAttribute";
    case ErrorCode::UnknownRelation: return "UnknownRelation";
    case ErrorCode::PathTooDeep: return "PathTooDeep";
    case ErrorCode::TypeMismatch: return "TypeMismatch";
    case ErrorCode::InvalidParameter: return "InvalidParameter";
    case ErrorCode::UnresolvedPath: return "UnresolvedPath";
    case ErrorCode::ParameterOutOfRange: return "ParameterOutOfRange";
    case ErrorCode::MissingParameter: return "MissingParameter";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::UnknownRule: return "UnknownRule";
    case ErrorCode::ParameterRangeConflict: return "ParameterRangeConflict";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::ValueOutOfRange: return "ValueOutOfRange";
    case ErrorCode::DuplicateObservation: return "DuplicateObservation";
    case ErrorCode::UnknownEntity: return "UnknownEntity";
    case ErrorCode::InvalidScenario: return "InvalidScenario";
    case ErrorCode::MissingInitialValue: return "MissingInitialValue";
    case ErrorCode::MissingPosterior: return "MissingPosterior";
    case ErrorCode::KindMismatch: return "KindMismatch";
    case ErrorCode::NoEligibleEntity: return "NoEligibleEntity";
    case ErrorCode::NoComparableData: return "NoComparableData";
    case ErrorCode::UnknownParameterInGroup: return "UnknownParameterInGroup";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::InvalidPrior: return "InvalidPrior";
    case ErrorCode::NoApplicableModel: return "NoApplicableModel";
    case ErrorCode::UnknownWorldView: return "UnknownWorldView";
    case ErrorCode::UnfittedParameters: return "UnfittedParameters";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::MissingResult: return "MissingResult";
    case ErrorCode::WorkspaceLocked: return "WorkspaceLocked";
    }
    return "Unknown";
}

// Domain error carrying a machine-readable code. The CLI maps these to exit
// code 1.
class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code),
          detail_(message)
    {
    }

    ErrorCode code() const noexcept { return code_; }
    const std::string& detail() const noexcept { return detail_; }

  private:
    ErrorCode code_;
    std::string detail_;
};

// Parse failure with the 0-based character offset in the rule text.
class SyntaxError : public Error {
  public:
    SyntaxError(std::size_t position, const std::string& expected, const std::string& found)
        : Error(ErrorCode::SyntaxError, "at position " + std::to_string(position) + ": expected " +
                                            expected + ", found " + found),
          position_(position), expected_(expected)
    {
    }

    std::size_t position() const noexcept { return position_; }
    const std::string& expected() const noexcept { return expected_; }

  private:
    std::size_t position_;
    std::string expected_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message)
{
    throw Error(code, message);
}

} // namespace abbl
