#include "pairforge/features.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include "pairforge/parallel.hpp"
#include "pairforge/text.hpp"

namespace pairforge {

// ---------------------------------------------------------------------------
// Autocovariance descriptors

std::vector<double> acc_descriptor(std::string_view sequence, const ScaleTable& scale, std::size_t max_lag,
                                   bool include_cross_terms) {
    if (max_lag < 1) throw Error(ErrorCode::InvalidConfig, "max lag must be >= 1");
    const std::size_t len = sequence.size();
    if (len <= max_lag)
        throw Error(ErrorCode::SequenceTooShort,
                    "length " + std::to_string(len) + " <= lag " + std::to_string(max_lag));
    const std::size_t d = scale.dimension;
    const auto unknown = scale.mean();

    // Residue-major matrix of descriptor values, then centre each column.
    std::vector<double> x(len * d);
    for (std::size_t i = 0; i < len; ++i) {
        const char c = sequence[i];
        const auto& v = c == 'X' ? unknown : scale.of(c);
        if (v.size() != d) throw Error(ErrorCode::IllegalResidue, "residue '" + std::string(1, c) + "' not in scale");
        std::copy(v.begin(), v.end(), x.begin() + static_cast<std::ptrdiff_t>(i * d));
    }
    // Offsets from the first residue first, so constant columns centre to exact zeros.
    for (std::size_t k = 0; k < d; ++k) {
        const double first = x[k];
        double mean = 0.0;
        for (std::size_t i = 0; i < len; ++i) mean += x[i * d + k] -= first;
        mean /= static_cast<double>(len);
        for (std::size_t i = 0; i < len; ++i) x[i * d + k] -= mean;
    }

    std::vector<double> out;
    out.reserve((include_cross_terms ? d * d : d) * max_lag);
    for (std::size_t k = 0; k < d; ++k) {
        const std::size_t k2_begin = include_cross_terms ? 0 : k;
        const std::size_t k2_end = include_cross_terms ? d : k + 1;
        for (std::size_t k2 = k2_begin; k2 < k2_end; ++k2) {
            for (std::size_t lag = 1; lag <= max_lag; ++lag) {
                double acc = 0.0;
                for (std::size_t i = 0; i + lag < len; ++i) acc += x[i * d + k] * x[(i + lag) * d + k2];
                out.push_back(acc / static_cast<double>(len - lag));
            }
        }
    }
    return out;
}

BlockMap protein_block_map(std::size_t embedding_dim, const DescriptorConfig& cfg) {
    const auto acc_width = [&](const ScaleTable& s) {
        return (cfg.include_cross_terms ? s.dimension * s.dimension : s.dimension) * cfg.max_lag;
    };
    BlockMap blocks;
    blocks.push_back({"emb", 0, embedding_dim});
    blocks.push_back({"zacc", embedding_dim, acc_width(cfg.zscale)});
    blocks.push_back({"eacc", embedding_dim + blocks[1].size, acc_width(cfg.eisenberg)});
    return blocks;
}

std::size_t block_map_width(const BlockMap& blocks) {
    std::size_t w = 0;
    for (const auto& b : blocks) w = std::max(w, b.offset + b.size);
    return w;
}

ProteinFeatures protein_feature_vector(const ProteinRecord& protein, const EmbeddingTable& embeddings,
                                       const DescriptorConfig& cfg) {
    const auto* emb = embeddings.find(protein.id());
    if (!emb) throw Error(ErrorCode::MissingEmbedding, protein.id());
    ProteinFeatures f;
    f.blocks = protein_block_map(embeddings.dimension, cfg);
    f.values.reserve(block_map_width(f.blocks));
    f.values.insert(f.values.end(), emb->begin(), emb->end());
    try {
        const auto z = acc_descriptor(protein.sequence(), cfg.zscale, cfg.max_lag, cfg.include_cross_terms);
        const auto e = acc_descriptor(protein.sequence(), cfg.eisenberg, cfg.max_lag, cfg.include_cross_terms);
        f.values.insert(f.values.end(), z.begin(), z.end());
        f.values.insert(f.values.end(), e.begin(), e.end());
    } catch (const Error& err) {
        throw Error(err.code(), std::string(err.what()) + " for " + protein.id());
    }
    return f;
}

// ---------------------------------------------------------------------------
// Pair tensor

PairFeatures pair_feature_vector(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size())
        throw Error(ErrorCode::DimensionMismatch, std::to_string(u.size()) + " vs " + std::to_string(v.size()));
    const std::size_t m = u.size();
    PairFeatures p;
    p.protein_dim = m;
    p.values.resize(4 * m);
    for (std::size_t i = 0; i < m; ++i) {
        p.values[i] = u[i];
        p.values[m + i] = v[i];
        p.values[2 * m + i] = std::abs(u[i] - v[i]);
        p.values[3 * m + i] = u[i] * v[i];
    }
    return p;
}

std::vector<FeatureGroup> pair_feature_groups(const BlockMap& protein_blocks) {
    static const std::map<std::string, std::string> kLabel{{"emb", "embedding"}, {"zacc", "zacc"}, {"eacc", "eacc"}};
    const std::size_t m = block_map_width(protein_blocks);
    std::vector<FeatureGroup> groups;
    for (const auto* side : {"A", "B"}) {
        const std::size_t base = std::string_view(side) == "A" ? 0 : m;
        for (const auto& b : protein_blocks) {
            const auto it = kLabel.find(b.name);
            groups.push_back({std::string(side) + "-" + (it == kLabel.end() ? b.name : it->second),
                              {{base + b.offset, base + b.offset + b.size}}});
        }
    }
    groups.push_back({"contrast", {{2 * m, 3 * m}}});
    groups.push_back({"concordance", {{3 * m, 4 * m}}});
    return groups;
}

// ---------------------------------------------------------------------------
// Scalar signals

namespace {

struct VectorStats {
    double cos, dot, euclid, absdiff_mean, a_norm, b_norm;
};

VectorStats vector_stats(std::span<const double> u, std::span<const double> v) {
    double dot = 0, uu = 0, vv = 0, sq = 0, ad = 0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        dot += u[i] * v[i];
        uu += u[i] * u[i];
        vv += v[i] * v[i];
        const double diff = u[i] - v[i];
        sq += diff * diff;
        ad += std::abs(diff);
    }
    VectorStats s{};
    s.a_norm = std::sqrt(uu);
    s.b_norm = std::sqrt(vv);
    s.dot = dot;
    s.cos = (s.a_norm == 0.0 || s.b_norm == 0.0) ? 0.0 : dot / (s.a_norm * s.b_norm);
    s.euclid = std::sqrt(sq);
    s.absdiff_mean = u.empty() ? 0.0 : ad / static_cast<double>(u.size());
    return s;
}

void emit_stats(SignalVector& out, const VectorStats& s, const std::string& suffix, bool full) {
    out["cos_" + suffix] = s.cos;
    out["dot_" + suffix] = s.dot;
    out["euclid_" + suffix] = s.euclid;
    out[full ? std::string("absdiff_mean") : "absdiff_mean_" + suffix] = s.absdiff_mean;
    out["a_norm_" + suffix] = s.a_norm;
    out["b_norm_" + suffix] = s.b_norm;
}

double jaccard(const std::set<std::string>& x, const std::set<std::string>& y) {
    if (x.empty() && y.empty()) return 0.0;
    std::size_t inter = 0;
    for (const auto& t : x) inter += y.contains(t);
    return static_cast<double>(inter) / static_cast<double>(x.size() + y.size() - inter);
}

template <typename Set>
std::size_t union_size(const Set& x, const Set& y) {
    std::size_t inter = 0;
    for (const auto& t : x) inter += y.contains(t);
    return x.size() + y.size() - inter;
}

}  // namespace

SignalVector pair_scalar_signals(std::span<const double> u, std::span<const double> v, const BlockMap& blocks,
                                 Task task) {
    if (u.size() != v.size())
        throw Error(ErrorCode::DimensionMismatch, std::to_string(u.size()) + " vs " + std::to_string(v.size()));
    SignalVector out;
    emit_stats(out, vector_stats(u, v), "all", true);
    for (const auto& b : blocks) {
        if (b.offset + b.size > u.size()) throw Error(ErrorCode::DimensionMismatch, "block " + b.name + " out of range");
        emit_stats(out, vector_stats(u.subspan(b.offset, b.size), v.subspan(b.offset, b.size)), b.name, false);
    }
    if (task == Task::pathogen_host && out.contains("b_norm_emb")) out["human_norm_emb"] = out["b_norm_emb"];
    return out;
}

SignalVector annotation_signals(const ProteinRecord& a, const ProteinRecord& b, const AnnotationBundle& annotations,
                                Task /*task: b is the target in both tasks*/) {
    const auto& ann_a = annotations.of(a.id());
    const auto& ann_b = annotations.of(b.id());
    SignalVector out;
    for (std::size_t i = 0; i < kTermNamespaceCount; ++i) {
        const auto ns = static_cast<TermNamespace>(i);
        out[std::string(to_string(ns)) + "_jaccard"] = jaccard(ann_a.in(ns), ann_b.in(ns));
    }

    double ddi_hit = 0.0;
    for (const auto& pa : ann_a.in(TermNamespace::pfam)) {
        for (const auto& pb : ann_b.in(TermNamespace::pfam)) {
            if (annotations.ddi_contains(pa, pb)) {
                ddi_hit = 1.0;
                break;
            }
        }
        if (ddi_hit > 0) break;
    }
    out["ddi_prior_hit"] = ddi_hit;

    const auto& ca = ann_a.compartments;
    const auto& cb = ann_b.compartments;
    const bool overlap = std::any_of(ca.begin(), ca.end(), [&](Compartment c) { return cb.contains(c); });
    out["comp_overlap"] = overlap ? 1.0 : 0.0;
    out["comp_disjoint_known"] = (!ca.empty() && !cb.empty() && !overlap) ? 1.0 : 0.0;
    for (std::size_t i = 0; i < kCompartmentCount; ++i) {
        const auto c = static_cast<Compartment>(i);
        out["tar_in_" + std::string(to_string(c))] = cb.contains(c) ? 1.0 : 0.0;
    }

    const double la = static_cast<double>(a.length());
    const double lb = static_cast<double>(b.length());
    out["len_a"] = la;
    out["len_b"] = lb;
    out["len_absdiff"] = std::abs(la - lb);
    out["len_ratio"] = std::min(la, lb) / std::max(la, lb);

    const auto has_go = [](const ProteinAnnotations& p) {
        return !p.in(TermNamespace::go_bp).empty() || !p.in(TermNamespace::go_mf).empty() ||
               !p.in(TermNamespace::go_cc).empty();
    };
    out["a_has_comp"] = ca.empty() ? 0.0 : 1.0;
    out["b_has_comp"] = cb.empty() ? 0.0 : 1.0;
    out["a_has_pfam"] = ann_a.in(TermNamespace::pfam).empty() ? 0.0 : 1.0;
    out["b_has_pfam"] = ann_b.in(TermNamespace::pfam).empty() ? 0.0 : 1.0;
    out["a_has_go"] = has_go(ann_a) ? 1.0 : 0.0;
    out["b_has_go"] = has_go(ann_b) ? 1.0 : 0.0;

    out["pfam_union"] = static_cast<double>(union_size(ann_a.in(TermNamespace::pfam), ann_b.in(TermNamespace::pfam)));
    std::size_t go_union = 0;
    for (auto ns : {TermNamespace::go_bp, TermNamespace::go_mf, TermNamespace::go_cc})
        go_union += union_size(ann_a.in(ns), ann_b.in(ns));
    out["go_union"] = static_cast<double>(go_union);
    return out;
}

// ---------------------------------------------------------------------------
// Graph signals

std::size_t GraphIndex::degree(const std::string& id) const { return neighbors(id).size(); }

const std::set<std::string>& GraphIndex::neighbors(const std::string& id) const {
    static const std::set<std::string> kEmpty;
    const auto it = adjacency.find(id);
    return it == adjacency.end() ? kEmpty : it->second;
}

GraphIndex build_graph_index(const std::vector<PairExample>& train_positives) {
    GraphIndex g;
    for (const auto& p : train_positives) {
        if (p.label != Label::positive) continue;
        g.adjacency[p.a_id].insert(p.b_id);
        g.adjacency[p.b_id].insert(p.a_id);
    }
    return g;
}

SignalVector graph_signals(const std::string& a, const std::string& b, const GraphIndex& graph,
                           bool exclude_target_edge) {
    auto na = graph.neighbors(a);
    auto nb = graph.neighbors(b);
    if (exclude_target_edge) {
        na.erase(b);
        nb.erase(a);
    }
    std::size_t common = 0;
    for (const auto& x : na) common += nb.contains(x);
    const std::size_t uni = na.size() + nb.size() - common;
    SignalVector out;
    out["deg_a"] = static_cast<double>(na.size());
    out["deg_b"] = static_cast<double>(nb.size());
    out["common_neighbors"] = static_cast<double>(common);
    out["nbr_jaccard"] = uni == 0 ? 0.0 : static_cast<double>(common) / static_cast<double>(uni);
    out["pref_attach"] = static_cast<double>(na.size() * nb.size());
    return out;
}

// ---------------------------------------------------------------------------
// Registry

std::vector<SignalInfo> signal_registry(Task task) {
    std::vector<SignalInfo> r;
    const auto add_stats = [&](const std::string& suffix, const std::string& family, const std::string& what,
                               bool full) {
        r.push_back({"cos_" + suffix, family, "cosine similarity of A and B " + what});
        r.push_back({"dot_" + suffix, family, "dot product of A and B " + what});
        r.push_back({"euclid_" + suffix, family, "Euclidean distance between A and B " + what});
        r.push_back({full ? std::string("absdiff_mean") : "absdiff_mean_" + suffix, family,
                     "mean absolute difference of A and B " + what});
        r.push_back({"a_norm_" + suffix, family, "L2 norm of A " + what});
        r.push_back({"b_norm_" + suffix, family, "L2 norm of B " + what});
    };
    add_stats("all", "embedding", "full feature vectors", true);
    add_stats("emb", "embedding", "embedding blocks", false);
    add_stats("zacc", "descriptor", "Z-ACC blocks", false);
    add_stats("eacc", "descriptor", "E-ACC blocks", false);
    if (task == Task::pathogen_host) r.push_back({"human_norm_emb", "embedding", "host embedding-block norm (b_norm_emb)"});

    for (std::size_t i = 0; i < kTermNamespaceCount; ++i) {
        const auto ns = std::string(to_string(static_cast<TermNamespace>(i)));
        r.push_back({ns + "_jaccard", "annotation", "Jaccard overlap of " + ns + " terms (0 when both empty)"});
    }
    r.push_back({"ddi_prior_hit", "annotation", "1 if any Pfam pair of A x B is a known domain-domain interaction"});
    r.push_back({"comp_overlap", "localization", "1 if compartment sets intersect"});
    r.push_back({"comp_disjoint_known", "localization", "1 iff both annotated and compartment sets are disjoint"});
    for (std::size_t i = 0; i < kCompartmentCount; ++i) {
        const auto c = std::string(to_string(static_cast<Compartment>(i)));
        r.push_back({"tar_in_" + c, "localization",
                     "target protein (B: host, or canonical second) annotated to " + c});
    }
    r.push_back({"len_a", "length", "sequence length of A"});
    r.push_back({"len_b", "length", "sequence length of B"});
    r.push_back({"len_absdiff", "length", "absolute length difference"});
    r.push_back({"len_ratio", "length", "min/max length ratio"});
    for (const auto& name : missingness_signals())
        r.push_back({name, "missingness", "has-annotation indicator (missingness proxy)"});
    r.push_back({"pfam_union", "annotation", "size of the Pfam term union"});
    r.push_back({"go_union", "annotation", "size of the GO term union over bp/mf/cc"});
    r.push_back({"deg_a", "graph", "training-graph degree of A"});
    r.push_back({"deg_b", "graph", "training-graph degree of B"});
    r.push_back({"common_neighbors", "graph", "common training-graph neighbors"});
    r.push_back({"nbr_jaccard", "graph", "neighborhood Jaccard"});
    r.push_back({"pref_attach", "graph", "preferential attachment deg_a * deg_b"});
    return r;
}

std::vector<std::string> missingness_signals() {
    return {"a_has_comp", "b_has_comp", "a_has_pfam", "b_has_pfam", "a_has_go", "b_has_go"};
}

std::set<std::string> known_signal_names() {
    std::set<std::string> names;
    for (auto task : {Task::host_host, Task::pathogen_host})
        for (const auto& s : signal_registry(task)) names.insert(s.name);
    return names;
}

// ---------------------------------------------------------------------------
// Signal tables

std::size_t SignalTable::column(std::string_view name) const {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw Error(ErrorCode::MissingSignal, std::string(name));
    return static_cast<std::size_t>(it - names.begin());
}

std::vector<std::size_t> SignalTable::rows_in(Split split) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < splits.size(); ++i)
        if (splits[i] == split) out.push_back(i);
    return out;
}

SignalTable build_signal_table(const DatasetBundle& bundle, const std::map<std::string, ProteinRecord>& proteins,
                               const std::map<std::string, ProteinFeatures>& features,
                               const AnnotationBundle& annotations, const SignalTableOptions& options) {
    const auto graph = build_graph_index(bundle.pairs(Split::train));
    SignalTable table;
    for (const auto& s : signal_registry(options.task)) table.names.push_back(s.name);
    for (auto s : kAllSplits) {
        for (const auto& p : bundle.pairs(s)) {
            table.pairs.push_back(p);
            table.splits.push_back(s);
        }
    }
    table.rows.resize(table.pairs.size());
    parallel_for(table.pairs.size(), [&](std::size_t i) {
        const auto& p = table.pairs[i];
        const auto pa = proteins.find(p.a_id);
        const auto pb = proteins.find(p.b_id);
        if (pa == proteins.end()) throw Error(ErrorCode::UnknownProtein, p.a_id);
        if (pb == proteins.end()) throw Error(ErrorCode::UnknownProtein, p.b_id);
        const auto fa = features.find(p.a_id);
        const auto fb = features.find(p.b_id);
        if (fa == features.end()) throw Error(ErrorCode::MissingEmbedding, p.a_id);
        if (fb == features.end()) throw Error(ErrorCode::MissingEmbedding, p.b_id);

        SignalVector sv = pair_scalar_signals(fa->second.values, fb->second.values, fa->second.blocks, options.task);
        sv.merge(annotation_signals(pa->second, pb->second, annotations, options.task));
        const bool is_train_positive = table.splits[i] == Split::train && p.label == Label::positive;
        sv.merge(graph_signals(p.a_id, p.b_id, graph, options.exclude_target_edge && is_train_positive));

        auto& row = table.rows[i];
        row.reserve(table.names.size());
        for (const auto& name : table.names) {
            const auto it = sv.find(name);
            if (it == sv.end()) throw Error(ErrorCode::MissingSignal, name);
            if (!std::isfinite(it->second)) throw Error(ErrorCode::NonFiniteValue, name + " for " + p.a_id + "/" + p.b_id);
            row.push_back(it->second);
        }
    });
    return table;
}

void write_signal_table(std::ostream& out, const SignalTable& table) {
    out << "a_id\tb_id\tlabel\tsplit";
    for (const auto& n : table.names) out << '\t' << n;
    out << '\n';
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& p = table.pairs[i];
        out << p.a_id << '\t' << p.b_id << '\t' << (p.label == Label::positive ? '1' : '0') << '\t'
            << to_string(table.splits[i]);
        for (double v : table.rows[i]) out << '\t' << text::format_double(v);
        out << '\n';
    }
}

SignalTable read_signal_table(std::istream& in) {
    SignalTable table;
    std::string line;
    if (!text::read_line(in, line)) throw Error(ErrorCode::BadFormat, "empty signal table");
    const auto header = text::split(line, '\t');
    if (header.size() < 4 || header[0] != "a_id" || header[1] != "b_id" || header[2] != "label" || header[3] != "split")
        throw Error(ErrorCode::BadFormat, "signal table header must start with a_id, b_id, label, split");
    for (std::size_t i = 4; i < header.size(); ++i) table.names.emplace_back(header[i]);
    std::size_t line_no = 1;
    while (text::read_line(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        const auto cols = text::split(line, '\t');
        if (cols.size() != header.size())
            throw Error(ErrorCode::MalformedRow, "signal table line " + std::to_string(line_no));
        PairExample p{std::string(cols[0]), std::string(cols[1]), Label::positive, ""};
        if (cols[2] == "1") p.label = Label::positive;
        else if (cols[2] == "0") p.label = Label::negative;
        else throw Error(ErrorCode::BadLabel, "signal table line " + std::to_string(line_no));
        table.pairs.push_back(std::move(p));
        table.splits.push_back(parse_split(cols[3]));
        std::vector<double> row;
        row.reserve(table.names.size());
        for (std::size_t i = 4; i < cols.size(); ++i) {
            const auto v = text::parse_double(cols[i]);
            if (!v || !std::isfinite(*v))
                throw Error(ErrorCode::NonFiniteValue, "signal table line " + std::to_string(line_no));
            row.push_back(*v);
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

void write_protein_features(std::ostream& out, const std::map<std::string, ProteinFeatures>& features) {
    if (features.empty()) {
        out << "#blocks\n";
        return;
    }
    out << "#blocks";
    for (const auto& b : features.begin()->second.blocks) out << '\t' << b.name << ':' << b.offset << ':' << b.size;
    out << '\n';
    for (const auto& [id, f] : features) {
        out << id;
        for (double v : f.values) out << '\t' << text::format_double(v);
        out << '\n';
    }
}

std::map<std::string, ProteinFeatures> read_protein_features(std::istream& in) {
    std::string line;
    if (!text::read_line(in, line) || !line.starts_with("#blocks"))
        throw Error(ErrorCode::BadFormat, "protein feature file must start with #blocks");
    BlockMap blocks;
    const auto header = text::split(line, '\t');
    for (std::size_t i = 1; i < header.size(); ++i) {
        const auto parts = text::split(header[i], ':');
        const auto off = parts.size() == 3 ? text::parse_double(parts[1]) : std::nullopt;
        const auto size = parts.size() == 3 ? text::parse_double(parts[2]) : std::nullopt;
        if (!off || !size) throw Error(ErrorCode::BadFormat, "bad block spec '" + std::string(header[i]) + "'");
        blocks.push_back({std::string(parts[0]), static_cast<std::size_t>(*off), static_cast<std::size_t>(*size)});
    }
    const std::size_t width = block_map_width(blocks);
    std::map<std::string, ProteinFeatures> out;
    while (text::read_line(in, line)) {
        if (text::trim(line).empty()) continue;
        const auto cols = text::split(line, '\t');
        if (cols.size() != width + 1)
            throw Error(ErrorCode::DimensionMismatch, "protein " + std::string(cols[0]) + " has " +
                                                          std::to_string(cols.size() - 1) + " values");
        ProteinFeatures f;
        f.blocks = blocks;
        f.values.reserve(width);
        for (std::size_t i = 1; i < cols.size(); ++i) {
            const auto v = text::parse_double(cols[i]);
            if (!v || !std::isfinite(*v)) throw Error(ErrorCode::NonFiniteValue, "protein " + std::string(cols[0]));
            f.values.push_back(*v);
        }
        if (!out.emplace(std::string(cols[0]), std::move(f)).second)
            throw Error(ErrorCode::DuplicateId, std::string(cols[0]));
    }
    return out;
}

}  // namespace pairforge
