#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "pairforge/core.hpp"

namespace pairforge {

enum class Severity { error, warning };

// LEAKAGE, IMBALANCE, DUPLICATE_PAIR, CONFLICTING_LABEL, OVERREPRESENTATION,
// UNKNOWN_PROTEIN.
struct Violation {
    std::string code;
    Severity severity = Severity::error;
    std::optional<Split> split;
    std::string details;
    // Offending pair, when the violation concerns one.
    std::string a_id;
    std::string b_id;
};

struct SplitSummary {
    ClassCounts counts;
    double max_protein_share = 0.0;
    std::string max_protein;
};

struct VerificationReport {
    std::vector<Violation> violations;
    std::array<SplitSummary, 3> summary;

    std::size_t error_count() const;
    std::size_t warning_count() const;
    bool passes() const { return error_count() == 0; }
};

struct VerifyTolerances {
    double imbalance = 0.02;
    double overrepresentation = 0.05;
};

VerificationReport verify_bundle(const DatasetBundle& bundle, const SplitAssignment& assignment,
                                 const VerifyTolerances& tolerances = {});

nlohmann::ordered_json to_json(const VerificationReport& report);

}  // namespace pairforge
