#include "cli_support.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <fstream>
#include <sstream>

#include "pairforge/cli.hpp"
#include "pairforge/text.hpp"
#include "toml.hpp"

namespace pairforge::cli {

namespace fs = std::filesystem;

std::string sha256_hex(std::string_view data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw Error(ErrorCode::IoError, "sha256 failed");
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += kHex[md[i] >> 4];
        out += kHex[md[i] & 0xF];
    }
    return out;
}

std::string file_sha256(const std::string& path) { return sha256_hex(text::read_file(path)); }

// ---------------------------------------------------------------------------

namespace {

std::string config_key(const std::string& name) {
    std::string k = name;
    for (char& c : k)
        if (c == '-') c = '_';
    return k;
}

std::optional<std::string> scalar_text(const toml::node& node) {
    if (auto s = node.value<std::string>()) return *s;
    if (node.is_integer()) return std::to_string(*node.value<std::int64_t>());
    if (node.is_floating_point()) return text::format_double(*node.value<double>());
    if (auto b = node.value<bool>()) return *b ? "true" : "false";
    return std::nullopt;
}

std::optional<std::string> node_text(const toml::node& node) {
    if (const auto* arr = node.as_array()) {
        std::string out;
        for (std::size_t i = 0; i < arr->size(); ++i) {
            const auto v = scalar_text(*arr->get(i));
            if (!v) return std::nullopt;
            out += (i ? "," : "") + *v;
        }
        return out;
    }
    return scalar_text(node);
}

bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw std::invalid_argument("expected a boolean, got '" + v + "'");
}

std::string rebase_paths(const std::string& value, const fs::path& dir, bool list) {
    std::vector<std::string> items;
    if (list) {
        for (const auto& item : text::split(value, ',')) items.emplace_back(text::trim(item));
    } else {
        items.push_back(value);
    }
    std::string out;
    for (const auto& item : items) {
        if (!out.empty()) out += ',';
        out += item.empty() || fs::path(item).is_absolute() ? item : (dir / item).lexically_normal().string();
    }
    return out;
}

}  // namespace

Params::Params(CLI::App& sub, std::string command) : sub_(sub), command_(std::move(command)) {
    sub_.add_option("--config", config_arg_, "TOML config file; flags override its values");
    sub_.add_option("--manifest", manifest_arg_, "re-run with the settings recorded in a run manifest")
        ->excludes("--config");
}

void Params::apply_manifest() {
    nlohmann::json m;
    try {
        m = nlohmann::json::parse(text::read_file(manifest_arg_));
    } catch (const nlohmann::json::exception& e) {
        throw UsageError("--manifest: " + std::string(e.what()));
    }
    const auto recorded = m.value("command", std::string());
    if (recorded != command_ && !recorded.starts_with(command_ + "_"))
        throw UsageError("--manifest: recorded command is '" + recorded + "', not '" + command_ + "'");
    if (!m.contains("settings") || !m["settings"].is_object()) throw UsageError("--manifest: no settings");
    const auto dir = fs::path(manifest_arg_).parent_path();
    auto& out = entries_.at("out");
    if (out.option->count() == 0) out.value = dir.empty() ? "." : dir.string();
    for (auto& [name, e] : entries_) {
        if (e.option->count() > 0 || !m["settings"].contains(name)) continue;
        const auto& v = m["settings"][name];
        e.from_config = true;
        if (e.kind == Kind::flag) {
            if (!v.is_boolean()) throw UsageError("--manifest: setting '" + name + "' is not a boolean");
            e.flag_value = v.get<bool>();
            continue;
        }
        if (!v.is_string()) throw UsageError("--manifest: setting '" + name + "' is not a string");
        e.value = v.get<std::string>();
        // Recorded paths are relative to the output directory of that run.
        if (e.kind == Kind::path || e.kind == Kind::paths) e.value = rebase_paths(e.value, dir, e.kind == Kind::paths);
    }
}

Params::Entry& Params::add(const std::string& name, Kind kind) {
    auto [it, inserted] = entries_.try_emplace(name);
    if (!inserted) throw std::logic_error("duplicate option " + name);
    it->second.kind = kind;
    order_.push_back(name);
    return it->second;
}

void Params::text(const std::string& name, const std::string& help, std::string fallback, bool required) {
    auto& e = add(name, Kind::text);
    e.value = std::move(fallback);
    e.required = required;
    e.option = sub_.add_option("--" + name, e.value, help);
}

void Params::path(const std::string& name, const std::string& help, std::string fallback, bool required) {
    auto& e = add(name, Kind::path);
    e.value = std::move(fallback);
    e.required = required;
    e.option = sub_.add_option("--" + name, e.value, help);
}

void Params::flag(const std::string& name, const std::string& help, bool fallback) {
    auto& e = add(name, Kind::flag);
    e.flag_value = fallback;
    e.option = sub_.add_flag("--" + name + ",!--no-" + name, e.flag_value, help);
}

void Params::paths(const std::string& name, const std::string& help) {
    auto& e = add(name, Kind::paths);
    e.option = sub_.add_option("--" + name, e.value, help);
}

void Params::resolve() {
    if (!manifest_arg_.empty()) {
        apply_manifest();
        for (const auto& [name, e] : entries_)
            if (e.required && e.value.empty()) throw UsageError("missing required option --" + name);
        return;
    }
    toml::table config;
    fs::path config_dir;
    if (!config_arg_.empty()) {
        config_file_ = config_arg_;
        try {
            config = toml::parse(text::read_file(config_arg_), config_arg_);
        } catch (const toml::parse_error& e) {
            throw UsageError("--config: " + std::string(e.description()));
        }
        config_dir = fs::path(config_arg_).parent_path();
    }
    const auto* section = config[command_].as_table();
    for (auto& [name, e] : entries_) {
        if (e.option->count() > 0) continue;
        const auto key = config_key(name);
        const toml::node* node = section ? section->get(key) : nullptr;
        if (!node) node = config.get(key);
        if (!node || node->is_table()) continue;
        const auto v = node_text(*node);
        if (!v) throw UsageError("config key '" + key + "' must be a scalar or an array of scalars");
        e.from_config = true;
        if (e.kind == Kind::flag) {
            try {
                e.flag_value = parse_bool(*v);
            } catch (const std::exception& ex) {
                throw UsageError("config key '" + key + "': " + ex.what());
            }
        } else if (e.kind == Kind::path || e.kind == Kind::paths) {
            e.value = rebase_paths(*v, config_dir, e.kind == Kind::paths);
        } else {
            e.value = *v;
        }
    }
    for (const auto& [name, e] : entries_)
        if (e.required && e.value.empty()) throw UsageError("missing required option --" + name);
}

const Params::Entry& Params::entry(const std::string& name) const {
    const auto it = entries_.find(name);
    if (it == entries_.end()) throw std::logic_error("unregistered option " + name);
    return it->second;
}

bool Params::given(const std::string& name) const {
    const auto& e = entry(name);
    return e.option->count() > 0 || e.from_config;
}

const std::string& Params::get(const std::string& name) const { return entry(name).value; }

double Params::number(const std::string& name) const {
    const auto v = text::parse_double(get(name));
    if (!v) throw UsageError("--" + name + ": expected a number, got '" + get(name) + "'");
    return *v;
}

std::uint64_t Params::u64(const std::string& name) const {
    const auto& v = get(name);
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || ec != std::errc() || ptr != v.data() + v.size())
        throw UsageError("--" + name + ": expected a nonnegative integer, got '" + v + "'");
    return out;
}

std::size_t Params::count(const std::string& name) const { return static_cast<std::size_t>(u64(name)); }

bool Params::on(const std::string& name) const {
    const auto& e = entry(name);
    if (e.kind != Kind::flag) throw std::logic_error(name + " is not a flag");
    return e.flag_value;
}

std::vector<std::string> Params::list(const std::string& name) const {
    std::vector<std::string> out;
    for (auto item : text::split(get(name), ','))
        if (!text::trim(item).empty()) out.emplace_back(text::trim(item));
    return out;
}

nlohmann::ordered_json Params::settings(const fs::path& out_dir) const {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [name, e] : entries_) {
        if (name == "out") continue;
        switch (e.kind) {
            case Kind::flag: j[name] = e.flag_value; break;
            case Kind::path: j[name] = e.value.empty() ? "" : display_path(e.value, out_dir); break;
            case Kind::text: j[name] = e.value; break;
            case Kind::paths: {
                std::string shown;
                for (const auto& item : list(name)) shown += (shown.empty() ? "" : ",") + display_path(item, out_dir);
                j[name] = shown;
                break;
            }
        }
    }
    return j;
}

// ---------------------------------------------------------------------------

std::string display_path(const fs::path& p, const fs::path& out_dir) {
    std::error_code ec;
    const auto abs = fs::weakly_canonical(fs::absolute(p), ec);
    const auto base = fs::weakly_canonical(fs::absolute(out_dir), ec);
    if (!ec) {
        const auto rel = abs.lexically_relative(base);
        if (!rel.empty() && *rel.begin() != "..") return rel.generic_string();
        return abs.generic_string();
    }
    return p.lexically_normal().generic_string();
}

RunRecord::RunRecord(std::string command, fs::path out_dir)
    : command_(std::move(command)), out_dir_(std::move(out_dir)), start_(std::chrono::steady_clock::now()) {
    fs::create_directories(out_dir_);
}

void RunRecord::input(const std::string& path) { inputs_.emplace_back(display_path(path, out_dir_), file_sha256(path)); }

void RunRecord::write(const std::string& relative, std::string_view contents) {
    const auto p = at(relative);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    text::write_file(p.string(), contents);
    outputs_.emplace_back(fs::path(relative).generic_string(), sha256_hex(contents));
}

void RunRecord::record_output(const std::string& relative) {
    outputs_.emplace_back(fs::path(relative).generic_string(), file_sha256(at(relative).string()));
}

void RunRecord::seed(const std::string& stage, std::uint64_t value) { seeds_[stage] = value; }

void RunRecord::note(const std::string& key, nlohmann::ordered_json value) { notes_[key] = std::move(value); }

void RunRecord::finish(const Params& params, std::uint64_t seed) {
    const auto settings = params.settings(out_dir_);
    nlohmann::ordered_json inputs = nlohmann::ordered_json::array();
    for (const auto& [p, d] : inputs_) inputs.push_back({{"path", p}, {"sha256", d}});
    nlohmann::ordered_json outputs = nlohmann::ordered_json::array();
    for (const auto& [p, d] : outputs_) outputs.push_back({{"path", p}, {"sha256", d}});

    nlohmann::ordered_json digest_src{{"command", command_}, {"tool_version", kToolVersion}, {"settings", settings},
                                      {"inputs", inputs}};
    nlohmann::ordered_json m;
    m["command"] = command_;
    m["tool_version"] = kToolVersion;
    m["config_digest"] = sha256_hex(digest_src.dump());
    // The config only feeds settings, which the digest already covers.
    if (params.config_file())
        m["config_file"] = {{"path", display_path(*params.config_file(), out_dir_)},
                            {"sha256", file_sha256(*params.config_file())}};
    m["seeds"] = {{"seed", seed}, {"derived", seeds_}};
    m["settings"] = settings;
    m["inputs"] = inputs;
    m["outputs"] = outputs;
    if (!notes_.empty()) m["notes"] = notes_;
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start_;
    m["duration_seconds"] = elapsed.count();
    text::write_file(at(command_ + ".manifest.json").string(), m.dump(2) + "\n");
}

// ---------------------------------------------------------------------------

std::string render_scored(const ScoredFile& f) {
    std::ostringstream out;
    out << "# model\t" << f.model << "\n# threshold\t" << text::format_double(f.threshold) << "\n";
    out << "a_id\tb_id\tlabel\tscore\tpredicted\n";
    for (const auto& r : f.rows)
        out << r.a_id << '\t' << r.b_id << '\t' << (r.label < 0 ? std::string("-") : std::to_string(r.label)) << '\t'
            << text::format_double(r.score) << '\t' << (r.score > f.threshold ? 1 : 0) << '\n';
    return out.str();
}

ScoredFile read_scored(const std::string& path) {
    std::istringstream in(text::read_file(path));
    ScoredFile f;
    std::string line;
    bool header = false, have_threshold = false;
    std::size_t line_no = 0;
    while (text::read_line(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto cols = text::split(line, '\t');
        if (line[0] == '#') {
            if (cols.size() == 2 && cols[0] == "# model") f.model = std::string(cols[1]);
            if (cols.size() == 2 && cols[0] == "# threshold") {
                const auto t = text::parse_double(cols[1]);
                if (!t) throw Error(ErrorCode::BadFormat, path + ": bad threshold");
                f.threshold = *t;
                have_threshold = true;
            }
            continue;
        }
        if (!header) {
            if (cols.size() < 4 || cols[0] != "a_id" || cols[3] != "score")
                throw Error(ErrorCode::BadFormat, path + ": missing scored-pair header");
            header = true;
            continue;
        }
        if (cols.size() < 4) throw Error(ErrorCode::MalformedRow, path + " line " + std::to_string(line_no));
        ScoredPair r{std::string(cols[0]), std::string(cols[1]), -1, 0.0};
        if (cols[2] == "1") r.label = 1;
        else if (cols[2] == "0") r.label = 0;
        else if (cols[2] != "-") throw Error(ErrorCode::BadLabel, path + " line " + std::to_string(line_no));
        const auto s = text::parse_double(cols[3]);
        if (!s) throw Error(ErrorCode::NonFiniteValue, path + " line " + std::to_string(line_no));
        r.score = *s;
        f.rows.push_back(std::move(r));
    }
    if (!header || !have_threshold) throw Error(ErrorCode::BadFormat, path + ": not a scored-pair file");
    return f;
}

std::vector<ScoredPair> read_pairs_to_score(const std::string& path) {
    std::istringstream in(text::read_file(path));
    std::vector<ScoredPair> out;
    std::string line;
    std::size_t line_no = 0;
    while (text::read_line(in, line)) {
        ++line_no;
        if (text::trim(line).empty() || line[0] == '#') continue;
        const auto cols = text::split(line, '\t');
        if (cols[0] == "a_id") continue;
        if (cols.size() < 2) throw Error(ErrorCode::MalformedRow, path + " line " + std::to_string(line_no));
        ScoredPair p{std::string(cols[0]), std::string(cols[1]), -1, 0.0};
        if (cols.size() >= 3) {
            if (cols[2] == "1") p.label = 1;
            else if (cols[2] == "0") p.label = 0;
            else if (cols[2] != "-") throw Error(ErrorCode::BadLabel, path + " line " + std::to_string(line_no));
        }
        out.push_back(std::move(p));
    }
    return out;
}

std::map<std::string, ProteinFeatures> load_features(const std::string& path) {
    std::istringstream in(text::read_file(path));
    return read_protein_features(in);
}

PairMatrix pair_matrix(const std::vector<PairExample>& pairs, const std::map<std::string, ProteinFeatures>& features) {
    PairMatrix m;
    if (pairs.empty()) {
        const std::size_t width = features.empty() ? 0 : 4 * features.begin()->second.values.size();
        m.x.resize(static_cast<Eigen::Index>(width), 0);
        return m;
    }
    const auto find = [&](const std::string& id) -> const ProteinFeatures& {
        const auto it = features.find(id);
        if (it == features.end()) throw Error(ErrorCode::MissingEmbedding, "no features for protein " + id);
        return it->second;
    };
    const std::size_t width = 4 * find(pairs.front().a_id).values.size();
    m.x.resize(static_cast<Eigen::Index>(width), static_cast<Eigen::Index>(pairs.size()));
    m.y.resize(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto f = pair_feature_vector(find(pairs[i].a_id).values, find(pairs[i].b_id).values);
        m.x.col(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::VectorXd>(f.values.data(), f.values.size());
        m.y[i] = pairs[i].label == Label::positive ? 1 : 0;
    }
    return m;
}

Ensemble load_ensemble(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text::read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::BadFormat, path + ": " + e.what());
    }
    Ensemble e;
    const auto dir = fs::path(path).parent_path();
    try {
        e.threshold = j.at("threshold").get<double>();
        for (const auto& m : j.at("models")) {
            const auto file = (dir / m.at("path").get<std::string>()).string();
            e.models.push_back(read_checkpoint(file));
            e.files.push_back(file);
        }
    } catch (const nlohmann::json::exception& ex) {
        throw Error(ErrorCode::BadFormat, path + ": " + ex.what());
    }
    if (e.models.empty()) throw Error(ErrorCode::EmptyEnsemble, path);
    return e;
}

Ensemble load_checkpoint_as_ensemble(const std::string& path) {
    Ensemble e;
    e.models.push_back(read_checkpoint(path));
    e.threshold = e.models.front().decision_threshold;
    e.files.push_back(path);
    return e;
}

}  // namespace pairforge::cli
