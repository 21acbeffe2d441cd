#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "pairforge/core.hpp"
#include "pairforge/ingest.hpp"

namespace pairforge {

// Seeded shuffle followed by largest-remainder partition into
// train/validation/test.
SplitAssignment assign_proteins(const std::vector<ProteinRecord>& proteins,
                                const std::array<double, 3>& ratios, std::uint64_t seed);

// Same as above over bare ids (input order matters for determinism).
SplitAssignment assign_protein_ids(const std::vector<std::string>& ids, const std::array<double, 3>& ratios,
                                   std::uint64_t seed);

// Largest-remainder integer counts for n items.
std::array<std::size_t, 3> largest_remainder_counts(std::size_t n, const std::array<double, 3>& ratios);

// Test if any protein is a test protein, else validation if any protein is a
// validation protein, else train.
Split route_split(const std::string& a, const std::string& b, const SplitAssignment& assignment);

DatasetBundle route_pairs(const std::vector<PairExample>& pairs, const SplitAssignment& assignment);

struct NegativeSynthesisConfig {
    double ratio = 1.0;  // negatives per positive
    bool require_compartment_disjoint = false;
    bool exclude_co_complex = false;
    std::set<std::string> co_complex;  // pair_key() entries
    std::uint64_t seed = 0;
    Task task = Task::host_host;
    // Needed for pathogen-host tasks: candidate negatives pair a pathogen with a host.
    std::map<std::string, Role> roles;
};

// Per-split outcome, available through the INSUFFICIENT_CANDIDATES message
// and from synthesize_negatives_report.
struct NegativeSynthesisReport {
    DatasetBundle bundle;
    std::array<std::size_t, 3> requested{0, 0, 0};
    std::array<std::size_t, 3> achieved{0, 0, 0};
    bool exhausted = false;
};

// Adds negatives to a routed positive bundle. A candidate for split s is any
// pair that route_split() would send to s, drawn uniformly from that set.
DatasetBundle synthesize_negatives(const DatasetBundle& positives, const SplitAssignment& assignment,
                                   const AnnotationBundle& annotations, const NegativeSynthesisConfig& cfg);

// Never throws INSUFFICIENT_CANDIDATES; reports the shortfall instead.
NegativeSynthesisReport synthesize_negatives_report(const DatasetBundle& positives,
                                                    const SplitAssignment& assignment,
                                                    const AnnotationBundle& annotations,
                                                    const NegativeSynthesisConfig& cfg);

struct FoldEntry {
    std::set<std::string> validation;
    std::set<std::string> train;
};

struct FoldPlan {
    std::set<std::string> test;
    std::vector<FoldEntry> folds;
    std::uint64_t seed = 0;

    SplitAssignment assignment_for(std::size_t fold) const;
};

FoldPlan make_fold_plan(const SplitAssignment& assignment, std::size_t folds, std::uint64_t seed);

// Routes every pair (of either label) under the fold's assignment.
DatasetBundle route_fold(const std::vector<PairExample>& pairs, const FoldPlan& plan, std::size_t fold);

// All pairs from every split of a bundle, in split order.
std::vector<PairExample> flatten(const DatasetBundle& bundle);

// Bundle TSV: a_id, b_id, label, split, source; rows in split order.
void write_bundle(std::ostream& out, const DatasetBundle& bundle);
DatasetBundle read_bundle(std::istream& in);

// Seed, ratios, per-split protein lists and per-split pair counts.
nlohmann::ordered_json split_manifest_json(const DatasetBundle& bundle, const SplitAssignment& assignment);
SplitAssignment assignment_from_manifest(const nlohmann::json& manifest);

}  // namespace pairforge
