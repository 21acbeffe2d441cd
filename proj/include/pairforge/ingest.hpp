#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pairforge/core.hpp"

namespace pairforge {

enum class Compartment : std::uint8_t {
    nucleus,
    cytoplasm,
    mitochondrion,
    er,
    endosome,
    extracellular,
    membrane,
    other,
};

inline constexpr std::size_t kCompartmentCount = 8;
std::string_view to_string(Compartment c) noexcept;
// Controlled-vocabulary lookup; anything unrecognised maps to `other`.
Compartment parse_compartment(std::string_view term) noexcept;

enum class TermNamespace : std::uint8_t { pfam, go_bp, go_mf, go_cc, reactome };
inline constexpr std::size_t kTermNamespaceCount = 5;
std::string_view to_string(TermNamespace ns) noexcept;

struct ProteinAnnotations {
    std::set<Compartment> compartments;
    std::array<std::set<std::string>, kTermNamespaceCount> terms;

    const std::set<std::string>& in(TermNamespace ns) const { return terms[static_cast<std::size_t>(ns)]; }
    std::set<std::string>& in(TermNamespace ns) { return terms[static_cast<std::size_t>(ns)]; }
};

struct AnnotationBundle {
    std::map<std::string, ProteinAnnotations> proteins;
    // Unordered Pfam pairs, stored smallest-first.
    std::set<std::pair<std::string, std::string>> ddi_prior;

    // Empty annotations for unknown ids.
    const ProteinAnnotations& of(const std::string& id) const;
    bool ddi_contains(std::string_view pfam_a, std::string_view pfam_b) const;
};

struct EmbeddingTable {
    std::size_t dimension = 0;
    // Values are stored as doubles but are always exactly representable as
    // IEEE-754 binary32, so text and binary encodings agree bit for bit.
    std::map<std::string, std::vector<double>> vectors;

    const std::vector<double>* find(const std::string& id) const;
};

struct ScaleTable {
    std::string name;
    std::size_t dimension = 0;
    // Indexed by residue letter - 'A'; only the 20 canonical residues are set.
    std::array<std::vector<double>, 26> values;

    const std::vector<double>& of(char residue) const { return values[static_cast<std::size_t>(residue - 'A')]; }
    // Mean of the 20 canonical residues; used for 'X'.
    std::vector<double> mean() const;
};

std::vector<ProteinRecord> parse_fasta(std::istream& in);

struct PairTableOptions {
    Task task = Task::host_host;
    bool allow_self = false;
};

std::vector<PairExample> parse_pair_table(std::istream& in, const PairTableOptions& options = {});
void write_pair_table(std::ostream& out, const std::vector<PairExample>& pairs);

struct MitabOptions {
    double miscore_floor = 0.45;
    Task task = Task::host_host;
    bool allow_self = false;
};

// MITAB 2.5 rows (15 columns). Repeated interactions keep their first
// occurrence; self interactions are skipped unless allowed.
std::vector<PairExample> parse_mitab_subset(std::istream& in, const MitabOptions& options = {});

AnnotationBundle parse_annotation_table(std::istream& in);

// Accepts either the tab-separated text form or the PFEM binary form.
EmbeddingTable load_embedding_table(std::istream& in);
void write_embedding_text(std::ostream& out, const EmbeddingTable& table);
void write_embedding_binary(std::ostream& out, const EmbeddingTable& table);

// Tab-separated: residue letter followed by d values. '#' lines are comments;
// a "# name: <name>" comment sets the table name.
ScaleTable parse_scale_table(std::istream& in, std::string default_name = "scale");

// Set of unordered pairs, one per line ("a<TAB>b"), used for co-complex lists.
std::set<std::string> parse_pair_list(std::istream& in);

}  // namespace pairforge
