#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pairforge {

// Stable error codes. The textual form (to_string) is part of the CLI and
// report surface and must not change.
enum class ErrorCode {
    SelfPair,
    IllegalResidue,
    EmptySequence,
    DuplicateId,
    MalformedHeader,
    BadLabel,
    DuplicatePair,
    ConflictingLabel,
    MalformedRow,
    UnsupportedIdPrefix,
    UnknownNamespace,
    DimensionMismatch,
    NonFiniteValue,
    IncompleteScale,
    TooFewProteins,
    InvalidConfig,
    UnknownProtein,
    InsufficientCandidates,
    TooFewFolds,
    SequenceTooShort,
    MissingEmbedding,
    LengthMismatch,
    EmptyInput,
    EmptyMatrix,
    EmptyTraining,
    EmptyCandidates,
    NoFeasibleLambda,
    MissingSignal,
    UnknownSignal,
    UnknownForm,
    BadDimension,
    NonFiniteLoss,
    EmptySplit,
    EmptyEnsemble,
    TooManyGroups,
    EmptyInstances,
    BadFormat,
    IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& detail)
        : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace pairforge
