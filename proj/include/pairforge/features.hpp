#pragma once

#include <iosfwd>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pairforge/core.hpp"
#include "pairforge/ingest.hpp"

namespace pairforge {

struct DescriptorConfig {
    std::size_t max_lag = 5;
    ScaleTable zscale;     // Sandberg z1..z5
    ScaleTable eisenberg;  // Eisenberg consensus hydrophobicity
    bool include_cross_terms = false;
};

// Lagged autocovariance of mean-centred residue descriptors. Output is ordered
// by (dimension, lag) with lags 1..max_lag; with cross terms it is ordered by
// (dimension, dimension', lag) and has d*d*max_lag entries.
std::vector<double> acc_descriptor(std::string_view sequence, const ScaleTable& scale, std::size_t max_lag,
                                   bool include_cross_terms = false);

struct Block {
    std::string name;  // "emb", "zacc", "eacc"
    std::size_t offset = 0;
    std::size_t size = 0;

    friend bool operator==(const Block&, const Block&) = default;
};
using BlockMap = std::vector<Block>;

BlockMap protein_block_map(std::size_t embedding_dim, const DescriptorConfig& cfg);
std::size_t block_map_width(const BlockMap& blocks);

struct ProteinFeatures {
    std::vector<double> values;
    BlockMap blocks;
};

// [embedding | Z-ACC | E-ACC]
ProteinFeatures protein_feature_vector(const ProteinRecord& protein, const EmbeddingTable& embeddings,
                                       const DescriptorConfig& cfg);

enum class Channel { a, b, contrast, concordance };

struct PairFeatures {
    std::vector<double> values;  // [A | B | |A-B| | A*B]
    std::size_t protein_dim = 0;

    std::span<const double> channel(Channel c) const {
        return std::span<const double>(values).subspan(static_cast<std::size_t>(c) * protein_dim, protein_dim);
    }
};

PairFeatures pair_feature_vector(std::span<const double> u, std::span<const double> v);

// Attribution groups over the 4m' pair layout: A/B x {embedding, zacc, eacc},
// then the contrast and concordance channels.
struct FeatureGroup {
    std::string name;
    std::vector<std::pair<std::size_t, std::size_t>> ranges;  // [begin, end)
};
std::vector<FeatureGroup> pair_feature_groups(const BlockMap& protein_blocks);

using SignalVector = std::map<std::string, double>;

SignalVector pair_scalar_signals(std::span<const double> u, std::span<const double> v, const BlockMap& blocks,
                                 Task task);

// Annotation, localization and length signals. The "target" protein for the
// tar_in_* indicators is b: the host in pathogen-host tasks, the canonical
// second protein in host-host tasks.
SignalVector annotation_signals(const ProteinRecord& a, const ProteinRecord& b, const AnnotationBundle& annotations,
                                Task task);

struct GraphIndex {
    std::map<std::string, std::set<std::string>> adjacency;

    std::size_t degree(const std::string& id) const;
    const std::set<std::string>& neighbors(const std::string& id) const;
};

GraphIndex build_graph_index(const std::vector<PairExample>& train_positives);

// With exclude_target_edge, the edge (a, b) itself is removed from both
// neighborhoods before counting, so a training positive does not see itself.
SignalVector graph_signals(const std::string& a, const std::string& b, const GraphIndex& graph,
                           bool exclude_target_edge = false);

struct SignalInfo {
    std::string name;
    std::string family;  // embedding, descriptor, annotation, localization, length, graph, missingness
    std::string description;
};

// Signals the featurizer emits for a task, in emission order.
std::vector<SignalInfo> signal_registry(Task task);
// Union over both tasks; used to validate parsed rulesets.
std::set<std::string> known_signal_names();
// Missingness proxies (has-annotation indicators).
std::vector<std::string> missingness_signals();

struct SignalTable {
    std::vector<std::string> names;
    std::vector<PairExample> pairs;
    std::vector<Split> splits;
    std::vector<std::vector<double>> rows;

    std::size_t column(std::string_view name) const;  // throws MISSING_SIGNAL
    std::vector<std::size_t> rows_in(Split split) const;
};

struct SignalTableOptions {
    Task task = Task::host_host;
    bool exclude_target_edge = true;
};

// Builds one row per pair of the bundle. Graph signals come from the bundle's
// training positives only.
SignalTable build_signal_table(const DatasetBundle& bundle, const std::map<std::string, ProteinRecord>& proteins,
                               const std::map<std::string, ProteinFeatures>& features,
                               const AnnotationBundle& annotations, const SignalTableOptions& options);

void write_signal_table(std::ostream& out, const SignalTable& table);
SignalTable read_signal_table(std::istream& in);

// Per-protein feature file: "#blocks" header line, then id and m' values.
void write_protein_features(std::ostream& out, const std::map<std::string, ProteinFeatures>& features);
std::map<std::string, ProteinFeatures> read_protein_features(std::istream& in);

}  // namespace pairforge
