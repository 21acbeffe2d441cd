#include "pairforge/core.hpp"

#include <algorithm>
#include <cctype>

namespace pairforge {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::SelfPair: return "SELF_PAIR";
        case ErrorCode::IllegalResidue: return "ILLEGAL_RESIDUE";
        case ErrorCode::EmptySequence: return "EMPTY_SEQUENCE";
        case ErrorCode::DuplicateId: return "DUPLICATE_ID";
        case ErrorCode::MalformedHeader: return "MALFORMED_HEADER";
        case ErrorCode::BadLabel: return "BAD_LABEL";
        case ErrorCode::DuplicatePair: return "DUPLICATE_PAIR";
        case ErrorCode::ConflictingLabel: return "CONFLICTING_LABEL";
        case ErrorCode::MalformedRow: return "MALFORMED_ROW";
        case ErrorCode::UnsupportedIdPrefix: return "UNSUPPORTED_ID_PREFIX";
        case ErrorCode::UnknownNamespace: return "UNKNOWN_NAMESPACE";
        case ErrorCode::DimensionMismatch: return "DIMENSION_MISMATCH";
        case ErrorCode::NonFiniteValue: return "NON_FINITE_VALUE";
        case ErrorCode::IncompleteScale: return "INCOMPLETE_SCALE";
        case ErrorCode::TooFewProteins: return "TOO_FEW_PROTEINS";
        case ErrorCode::InvalidConfig: return "INVALID_CONFIG";
        case ErrorCode::UnknownProtein: return "UNKNOWN_PROTEIN";
        case ErrorCode::InsufficientCandidates: return "INSUFFICIENT_CANDIDATES";
        case ErrorCode::TooFewFolds: return "TOO_FEW_FOLDS";
        case ErrorCode::SequenceTooShort: return "SEQUENCE_TOO_SHORT";
        case ErrorCode::MissingEmbedding: return "MISSING_EMBEDDING";
        case ErrorCode::LengthMismatch: return "LENGTH_MISMATCH";
        case ErrorCode::EmptyInput: return "EMPTY_INPUT";
        case ErrorCode::EmptyMatrix: return "EMPTY_MATRIX";
        case ErrorCode::EmptyTraining: return "EMPTY_TRAINING";
        case ErrorCode::EmptyCandidates: return "EMPTY_CANDIDATES";
        case ErrorCode::NoFeasibleLambda: return "NO_FEASIBLE_LAMBDA";
        case ErrorCode::MissingSignal: return "MISSING_SIGNAL";
        case ErrorCode::UnknownSignal: return "UNKNOWN_SIGNAL";
        case ErrorCode::UnknownForm: return "UNKNOWN_FORM";
        case ErrorCode::BadDimension: return "BAD_DIMENSION";
        case ErrorCode::NonFiniteLoss: return "NON_FINITE_LOSS";
        case ErrorCode::EmptySplit: return "EMPTY_SPLIT";
        case ErrorCode::EmptyEnsemble: return "EMPTY_ENSEMBLE";
        case ErrorCode::TooManyGroups: return "TOO_MANY_GROUPS";
        case ErrorCode::EmptyInstances: return "EMPTY_INSTANCES";
        case ErrorCode::BadFormat: return "BAD_FORMAT";
        case ErrorCode::IoError: return "IO_ERROR";
    }
    return "UNKNOWN";
}

std::string_view to_string(Role role) noexcept {
    return role == Role::host ? "host" : "pathogen";
}

std::string_view to_string(Task task) noexcept {
    return task == Task::host_host ? "host_host" : "pathogen_host";
}

std::string_view to_string(Split split) noexcept {
    switch (split) {
        case Split::train: return "train";
        case Split::validation: return "validation";
        case Split::test: return "test";
    }
    return "train";
}

Role parse_role(std::string_view text) {
    if (text == "host") return Role::host;
    if (text == "pathogen") return Role::pathogen;
    throw Error(ErrorCode::BadFormat, "unknown role '" + std::string(text) + "'");
}

Task parse_task(std::string_view text) {
    if (text == "host_host") return Task::host_host;
    if (text == "pathogen_host") return Task::pathogen_host;
    throw Error(ErrorCode::BadFormat, "unknown task '" + std::string(text) + "'");
}

Split parse_split(std::string_view text) {
    if (text == "train") return Split::train;
    if (text == "validation") return Split::validation;
    if (text == "test") return Split::test;
    throw Error(ErrorCode::BadFormat, "unknown split '" + std::string(text) + "'");
}

bool is_canonical_residue(char c) noexcept {
    static constexpr std::string_view kCanonical = "ACDEFGHIKLMNPQRSTVWY";
    return kCanonical.find(c) != std::string_view::npos;
}

std::string validate_sequence(std::string_view raw) {
    if (raw.empty()) throw Error(ErrorCode::EmptySequence, "sequence is empty");
    std::string out(raw.size(), ' ');
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const char c = static_cast<char>(std::toupper(static_cast<unsigned char>(raw[i])));
        if (!is_canonical_residue(c) && c != 'X') {
            throw Error(ErrorCode::IllegalResidue,
                        "character '" + std::string(1, raw[i]) + "' at position " + std::to_string(i + 1));
        }
        out[i] = c;
    }
    return out;
}

ProteinRecord::ProteinRecord(std::string id, Role role, std::string_view sequence)
    : id_(std::move(id)), role_(role), sequence_(validate_sequence(sequence)) {
    if (id_.empty()) throw Error(ErrorCode::MalformedHeader, "protein id is empty");
}

std::pair<std::string, std::string> canonical_pair(std::string_view a, std::string_view b, Task task,
                                                   bool allow_self) {
    if (a.empty() || b.empty()) throw Error(ErrorCode::MalformedRow, "pair id is empty");
    if (a == b && !allow_self) throw Error(ErrorCode::SelfPair, "self pair " + std::string(a));
    if (task == Task::host_host && b < a) return {std::string(b), std::string(a)};
    return {std::string(a), std::string(b)};
}

std::string pair_key(std::string_view a, std::string_view b) {
    if (b < a) std::swap(a, b);
    std::string key;
    key.reserve(a.size() + b.size() + 1);
    key.append(a).push_back('\t');
    key.append(b);
    return key;
}

std::vector<std::string> SplitAssignment::proteins_in(Split split) const {
    std::vector<std::string> out;
    for (const auto& [id, s] : split_of)
        if (s == split) out.push_back(id);
    return out;
}

std::array<std::size_t, 3> SplitAssignment::counts() const {
    std::array<std::size_t, 3> c{0, 0, 0};
    for (const auto& [id, s] : split_of) ++c[static_cast<std::size_t>(s)];
    return c;
}

ClassCounts DatasetBundle::class_counts(Split s) const {
    ClassCounts c;
    for (const auto& p : pairs(s)) (p.label == Label::positive ? c.positives : c.negatives)++;
    return c;
}

std::size_t DatasetBundle::size() const noexcept {
    return splits[0].size() + splits[1].size() + splits[2].size();
}

}  // namespace pairforge
