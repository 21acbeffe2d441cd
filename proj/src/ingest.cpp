#include "pairforge/ingest.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "pairforge/text.hpp"

namespace pairforge {

namespace {

std::string at_line(std::size_t line_no) { return " (line " + std::to_string(line_no) + ")"; }

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

bool skippable(std::string_view line) {
    const auto t = text::trim(line);
    return t.empty() || t.front() == '#';
}

}  // namespace

std::string_view to_string(Compartment c) noexcept {
    switch (c) {
        case Compartment::nucleus: return "nucleus";
        case Compartment::cytoplasm: return "cytoplasm";
        case Compartment::mitochondrion: return "mitochondrion";
        case Compartment::er: return "er";
        case Compartment::endosome: return "endosome";
        case Compartment::extracellular: return "extracellular";
        case Compartment::membrane: return "membrane";
        case Compartment::other: return "other";
    }
    return "other";
}

Compartment parse_compartment(std::string_view term) noexcept {
    static const std::unordered_map<std::string, Compartment> kVocabulary{
        {"nucleus", Compartment::nucleus},
        {"cytoplasm", Compartment::cytoplasm},
        {"mitochondrion", Compartment::mitochondrion},
        {"mitochondria", Compartment::mitochondrion},
        {"er", Compartment::er},
        {"endoplasmic reticulum", Compartment::er},
        {"endoplasmic_reticulum", Compartment::er},
        {"endosome", Compartment::endosome},
        {"extracellular", Compartment::extracellular},
        {"extracellular space", Compartment::extracellular},
        {"extracellular_space", Compartment::extracellular},
        {"membrane", Compartment::membrane},
        {"other", Compartment::other},
    };
    const auto it = kVocabulary.find(lower(text::trim(term)));
    return it == kVocabulary.end() ? Compartment::other : it->second;
}

std::string_view to_string(TermNamespace ns) noexcept {
    switch (ns) {
        case TermNamespace::pfam: return "pfam";
        case TermNamespace::go_bp: return "go_bp";
        case TermNamespace::go_mf: return "go_mf";
        case TermNamespace::go_cc: return "go_cc";
        case TermNamespace::reactome: return "reactome";
    }
    return "pfam";
}

const ProteinAnnotations& AnnotationBundle::of(const std::string& id) const {
    static const ProteinAnnotations kEmpty;
    const auto it = proteins.find(id);
    return it == proteins.end() ? kEmpty : it->second;
}

bool AnnotationBundle::ddi_contains(std::string_view pfam_a, std::string_view pfam_b) const {
    if (pfam_b < pfam_a) std::swap(pfam_a, pfam_b);
    return ddi_prior.contains({std::string(pfam_a), std::string(pfam_b)});
}

const std::vector<double>* EmbeddingTable::find(const std::string& id) const {
    const auto it = vectors.find(id);
    return it == vectors.end() ? nullptr : &it->second;
}

std::vector<double> ScaleTable::mean() const {
    std::vector<double> m(dimension, 0.0);
    int n = 0;
    for (char c = 'A'; c <= 'Z'; ++c) {
        if (!is_canonical_residue(c)) continue;
        const auto& v = of(c);
        for (std::size_t k = 0; k < dimension; ++k) m[k] += v[k];
        ++n;
    }
    for (auto& x : m) x /= n;
    return m;
}

// ---------------------------------------------------------------------------
// FASTA

std::vector<ProteinRecord> parse_fasta(std::istream& in) {
    struct Pending {
        std::string id;
        Role role = Role::host;
        std::string sequence;
        std::size_t line_no = 0;
    };
    std::vector<ProteinRecord> records;
    std::unordered_set<std::string> seen;
    std::optional<Pending> current;

    auto flush = [&] {
        if (!current) return;
        if (current->sequence.empty())
            throw Error(ErrorCode::EmptySequence, "record " + current->id + at_line(current->line_no));
        try {
            records.emplace_back(current->id, current->role, current->sequence);
        } catch (const Error& e) {
            throw Error(e.code(), std::string(e.what()) + " in record " + current->id);
        }
        current.reset();
    };

    std::string line;
    std::size_t line_no = 0;
    while (text::read_line(in, line)) {
        ++line_no;
        const auto t = text::trim(line);
        if (t.empty()) continue;
        if (t.front() == '>') {
            flush();
            const auto tokens = text::split_whitespace(t.substr(1));
            if (tokens.empty()) throw Error(ErrorCode::MalformedHeader, "empty header" + at_line(line_no));
            Pending p;
            p.id = std::string(tokens[0]);
            p.line_no = line_no;
            for (std::size_t i = 1; i < tokens.size(); ++i) {
                if (!tokens[i].starts_with("role=")) continue;
                const auto value = tokens[i].substr(5);
                if (value == "host") p.role = Role::host;
                else if (value == "pathogen") p.role = Role::pathogen;
                else throw Error(ErrorCode::MalformedHeader, "bad role '" + std::string(value) + "'" + at_line(line_no));
            }
            if (!seen.insert(p.id).second) throw Error(ErrorCode::DuplicateId, p.id + at_line(line_no));
            current = std::move(p);
        } else {
            if (!current) throw Error(ErrorCode::MalformedHeader, "sequence data before any header" + at_line(line_no));
            for (char c : t)
                if (c != ' ' && c != '\t') current->sequence.push_back(c);
        }
    }
    flush();
    return records;
}

// ---------------------------------------------------------------------------
// Pair tables

std::vector<PairExample> parse_pair_table(std::istream& in, const PairTableOptions& options) {
    std::vector<PairExample> pairs;
    std::unordered_map<std::string, std::size_t> index;
    std::string line;
    std::size_t line_no = 0;
    bool first_data_row = true;
    while (text::read_line(in, line)) {
        ++line_no;
        if (skippable(line)) continue;
        const auto cols = text::split(line, '\t');
        if (cols.size() < 3 || cols.size() > 4)
            throw Error(ErrorCode::MalformedRow, "expected 3 or 4 columns" + at_line(line_no));
        if (first_data_row) {
            first_data_row = false;
            if (text::trim(cols[2]) == "label") continue;  // header row
        }
        const auto label_text = text::trim(cols[2]);
        Label label;
        if (label_text == "1") label = Label::positive;
        else if (label_text == "0") label = Label::negative;
        else throw Error(ErrorCode::BadLabel, "'" + std::string(label_text) + "'" + at_line(line_no));

        auto [a, b] = canonical_pair(text::trim(cols[0]), text::trim(cols[1]), options.task, options.allow_self);
        const auto key = pair_key(a, b);
        if (const auto it = index.find(key); it != index.end()) {
            if (pairs[it->second].label != label)
                throw Error(ErrorCode::ConflictingLabel, a + "/" + b + at_line(line_no));
            throw Error(ErrorCode::DuplicatePair, a + "/" + b + at_line(line_no));
        }
        index.emplace(key, pairs.size());
        pairs.push_back({std::move(a), std::move(b), label, cols.size() == 4 ? std::string(text::trim(cols[3])) : ""});
    }
    return pairs;
}

void write_pair_table(std::ostream& out, const std::vector<PairExample>& pairs) {
    out << "a_id\tb_id\tlabel\tsource\n";
    for (const auto& p : pairs)
        out << p.a_id << '\t' << p.b_id << '\t' << (p.label == Label::positive ? '1' : '0') << '\t' << p.source
            << '\n';
}

// ---------------------------------------------------------------------------
// MITAB subset

namespace {

std::string mitab_uniprot_id(std::string_view column, std::size_t line_no) {
    const auto first = text::split(text::trim(column), '|').front();
    constexpr std::string_view kPrefix = "uniprotkb:";
    if (!first.starts_with(kPrefix))
        throw Error(ErrorCode::UnsupportedIdPrefix, "'" + std::string(first) + "'" + at_line(line_no));
    auto id = first.substr(kPrefix.size());
    if (id.empty()) throw Error(ErrorCode::MalformedRow, "empty uniprotkb id" + at_line(line_no));
    return std::string(id);
}

std::optional<double> mitab_miscore(std::string_view column, std::size_t line_no) {
    constexpr std::string_view kPrefix = "intact-miscore:";
    for (const auto entry : text::split(text::trim(column), '|')) {
        if (!entry.starts_with(kPrefix)) continue;
        const auto v = text::parse_double(entry.substr(kPrefix.size()));
        if (!v || !std::isfinite(*v)) throw Error(ErrorCode::MalformedRow, "bad miscore" + at_line(line_no));
        return v;
    }
    return std::nullopt;
}

}  // namespace

std::vector<PairExample> parse_mitab_subset(std::istream& in, const MitabOptions& options) {
    std::vector<PairExample> pairs;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (text::read_line(in, line)) {
        ++line_no;
        if (skippable(line)) continue;
        const auto cols = text::split(line, '\t');
        if (cols.size() != 15 && cols.size() != 36 && cols.size() != 42)
            throw Error(ErrorCode::MalformedRow,
                        "expected 15 MITAB columns, got " + std::to_string(cols.size()) + at_line(line_no));
        const auto a = mitab_uniprot_id(cols[0], line_no);
        const auto b = mitab_uniprot_id(cols[1], line_no);
        if (const auto score = mitab_miscore(cols[14], line_no); score && *score < options.miscore_floor) continue;
        if (a == b && !options.allow_self) continue;
        auto [ca, cb] = canonical_pair(a, b, options.task, options.allow_self);
        if (!seen.insert(pair_key(ca, cb)).second) continue;
        pairs.push_back({std::move(ca), std::move(cb), Label::positive, "mitab"});
    }
    return pairs;
}

// ---------------------------------------------------------------------------
// Annotations

AnnotationBundle parse_annotation_table(std::istream& in) {
    AnnotationBundle bundle;
    std::string line;
    std::size_t line_no = 0;
    while (text::read_line(in, line)) {
        ++line_no;
        if (skippable(line)) continue;
        const auto cols = text::split(line, '\t');
        if (cols.size() != 3) throw Error(ErrorCode::MalformedRow, "expected 3 columns" + at_line(line_no));
        const std::string id(text::trim(cols[0]));
        const auto ns = text::trim(cols[1]);
        const auto term = text::trim(cols[2]);
        if (term.empty()) throw Error(ErrorCode::MalformedRow, "empty term" + at_line(line_no));

        if (ns == "ddi") {
            const auto parts = text::split(term, '|');
            if (parts.size() != 2 || parts[0].empty() || parts[1].empty())
                throw Error(ErrorCode::MalformedRow, "ddi term must be 'pfamA|pfamB'" + at_line(line_no));
            std::string x(parts[0]), y(parts[1]);
            if (y < x) std::swap(x, y);
            bundle.ddi_prior.emplace(std::move(x), std::move(y));
            continue;
        }
        if (id.empty()) throw Error(ErrorCode::MalformedRow, "empty protein id" + at_line(line_no));
        auto& entry = bundle.proteins[id];
        if (ns == "compartment") entry.compartments.insert(parse_compartment(term));
        else if (ns == "pfam") entry.in(TermNamespace::pfam).emplace(term);
        else if (ns == "go_bp") entry.in(TermNamespace::go_bp).emplace(term);
        else if (ns == "go_mf") entry.in(TermNamespace::go_mf).emplace(term);
        else if (ns == "go_cc") entry.in(TermNamespace::go_cc).emplace(term);
        else if (ns == "reactome") entry.in(TermNamespace::reactome).emplace(term);
        else throw Error(ErrorCode::UnknownNamespace, "'" + std::string(ns) + "'" + at_line(line_no));
    }
    return bundle;
}

// ---------------------------------------------------------------------------
// Embeddings

namespace {

constexpr char kEmbeddingMagic[4] = {'P', 'F', 'E', 'M'};
constexpr std::uint8_t kEmbeddingVersion = 0x01;

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

template <typename T>
T read_le(std::string_view bytes, std::size_t& pos) {
    if (pos + sizeof(T) > bytes.size()) throw Error(ErrorCode::BadFormat, "truncated embedding file");
    T v;
    std::memcpy(&v, bytes.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

template <typename T>
void write_le(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void add_vector(EmbeddingTable& table, std::string id, std::vector<double> values, std::size_t where) {
    if (values.empty()) throw Error(ErrorCode::DimensionMismatch, "row " + id + " has no values");
    if (table.dimension == 0) table.dimension = values.size();
    if (values.size() != table.dimension)
        throw Error(ErrorCode::DimensionMismatch, "row " + id + " has " + std::to_string(values.size()) +
                                                      " values, expected " + std::to_string(table.dimension) +
                                                      " (record " + std::to_string(where) + ")");
    if (!table.vectors.emplace(id, std::move(values)).second) throw Error(ErrorCode::DuplicateId, id);
}

EmbeddingTable parse_embedding_binary(std::string_view bytes) {
    std::size_t pos = 4;
    if (read_le<std::uint8_t>(bytes, pos) != kEmbeddingVersion)
        throw Error(ErrorCode::BadFormat, "unsupported embedding format version");
    const auto m = read_le<std::uint32_t>(bytes, pos);
    if (m == 0) throw Error(ErrorCode::DimensionMismatch, "dimension is zero");
    EmbeddingTable table;
    table.dimension = m;
    std::size_t record = 0;
    while (pos < bytes.size()) {
        ++record;
        const auto len = read_le<std::uint16_t>(bytes, pos);
        if (pos + len > bytes.size()) throw Error(ErrorCode::BadFormat, "truncated id");
        std::string id(bytes.substr(pos, len));
        pos += len;
        std::vector<double> values(m);
        for (std::uint32_t k = 0; k < m; ++k) {
            const auto f = read_le<float>(bytes, pos);
            if (!std::isfinite(f)) throw Error(ErrorCode::NonFiniteValue, "id " + id);
            values[k] = static_cast<double>(f);
        }
        add_vector(table, std::move(id), std::move(values), record);
    }
    return table;
}

EmbeddingTable parse_embedding_text(std::string_view contents) {
    EmbeddingTable table;
    std::istringstream in{std::string(contents)};
    std::string line;
    std::size_t line_no = 0;
    while (text::read_line(in, line)) {
        ++line_no;
        if (skippable(line)) continue;
        const auto tokens = text::split_whitespace(line);
        std::vector<double> values;
        values.reserve(tokens.size() - 1);
        for (std::size_t i = 1; i < tokens.size(); ++i) {
            const auto f = text::parse_float(tokens[i]);
            if (!f) {
                const auto lowered = lower(tokens[i]);
                if (lowered.find("nan") != std::string::npos || lowered.find("inf") != std::string::npos)
                    throw Error(ErrorCode::NonFiniteValue, "'" + std::string(tokens[i]) + "'" + at_line(line_no));
                throw Error(ErrorCode::BadFormat, "bad number '" + std::string(tokens[i]) + "'" + at_line(line_no));
            }
            if (!std::isfinite(*f)) throw Error(ErrorCode::NonFiniteValue, std::string(tokens[i]) + at_line(line_no));
            values.push_back(static_cast<double>(*f));
        }
        add_vector(table, std::string(tokens[0]), std::move(values), line_no);
    }
    return table;
}

}  // namespace

EmbeddingTable load_embedding_table(std::istream& in) {
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string contents = ss.str();
    if (contents.size() >= 4 && std::memcmp(contents.data(), kEmbeddingMagic, 4) == 0)
        return parse_embedding_binary(contents);
    return parse_embedding_text(contents);
}

void write_embedding_text(std::ostream& out, const EmbeddingTable& table) {
    for (const auto& [id, values] : table.vectors) {
        out << id;
        for (double v : values) out << '\t' << text::format_double(static_cast<float>(v));
        out << '\n';
    }
}

void write_embedding_binary(std::ostream& out, const EmbeddingTable& table) {
    out.write(kEmbeddingMagic, 4);
    write_le<std::uint8_t>(out, kEmbeddingVersion);
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(table.dimension));
    for (const auto& [id, values] : table.vectors) {
        if (id.size() > 0xFFFF) throw Error(ErrorCode::BadFormat, "id too long for binary format");
        write_le<std::uint16_t>(out, static_cast<std::uint16_t>(id.size()));
        out.write(id.data(), static_cast<std::streamsize>(id.size()));
        for (double v : values) write_le<float>(out, static_cast<float>(v));
    }
}

// ---------------------------------------------------------------------------
// Scale tables

ScaleTable parse_scale_table(std::istream& in, std::string default_name) {
    ScaleTable table;
    table.name = std::move(default_name);
    std::string line;
    std::size_t line_no = 0;
    while (text::read_line(in, line)) {
        ++line_no;
        const auto t = text::trim(line);
        if (t.empty()) continue;
        if (t.front() == '#') {
            const auto body = text::trim(t.substr(1));
            if (body.starts_with("name:")) table.name = std::string(text::trim(body.substr(5)));
            continue;
        }
        const auto tokens = text::split_whitespace(t);
        if (tokens[0].size() != 1 || !is_canonical_residue(tokens[0][0]))
            throw Error(ErrorCode::MalformedRow, "bad residue '" + std::string(tokens[0]) + "'" + at_line(line_no));
        std::vector<double> values;
        for (std::size_t i = 1; i < tokens.size(); ++i) {
            const auto v = text::parse_double(tokens[i]);
            if (!v) throw Error(ErrorCode::BadFormat, "bad number" + at_line(line_no));
            if (!std::isfinite(*v)) throw Error(ErrorCode::NonFiniteValue, std::string(tokens[i]) + at_line(line_no));
            values.push_back(*v);
        }
        if (values.empty()) throw Error(ErrorCode::DimensionMismatch, "no values" + at_line(line_no));
        if (table.dimension == 0) table.dimension = values.size();
        if (values.size() != table.dimension) throw Error(ErrorCode::DimensionMismatch, "row width" + at_line(line_no));
        auto& slot = table.values[static_cast<std::size_t>(tokens[0][0] - 'A')];
        if (!slot.empty()) throw Error(ErrorCode::DuplicateId, "residue " + std::string(tokens[0]) + at_line(line_no));
        slot = std::move(values);
    }
    for (char c = 'A'; c <= 'Z'; ++c)
        if (is_canonical_residue(c) && table.of(c).empty())
            throw Error(ErrorCode::IncompleteScale, table.name + " lacks residue " + std::string(1, c));
    return table;
}

std::set<std::string> parse_pair_list(std::istream& in) {
    std::set<std::string> keys;
    std::string line;
    std::size_t line_no = 0;
    while (text::read_line(in, line)) {
        ++line_no;
        if (skippable(line)) continue;
        const auto cols = text::split_whitespace(line);
        if (cols.size() < 2) throw Error(ErrorCode::MalformedRow, "expected two ids" + at_line(line_no));
        keys.insert(pair_key(cols[0], cols[1]));
    }
    return keys;
}

}  // namespace pairforge
