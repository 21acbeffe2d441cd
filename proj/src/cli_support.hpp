#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "pairforge/features.hpp"
#include "pairforge/predict.hpp"

namespace pairforge::cli {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string sha256_hex(std::string_view data);
std::string file_sha256(const std::string& path);

// Options of one subcommand. Values come from the command line first, then
// from a previous run manifest (--manifest) or the config file ([<command>]
// table, then top level), then defaults. Config keys use underscores where
// flags use dashes. With --manifest, --out defaults to the manifest's directory.
class Params {
public:
    Params(CLI::App& sub, std::string command);

    void text(const std::string& name, const std::string& help, std::string fallback = "", bool required = false);
    void path(const std::string& name, const std::string& help, std::string fallback = "", bool required = false);
    void flag(const std::string& name, const std::string& help, bool fallback);
    // Comma-separated list of paths.
    void paths(const std::string& name, const std::string& help);

    void resolve();

    bool given(const std::string& name) const;
    const std::string& get(const std::string& name) const;
    double number(const std::string& name) const;
    std::uint64_t u64(const std::string& name) const;
    std::size_t count(const std::string& name) const;
    bool on(const std::string& name) const;
    std::vector<std::string> list(const std::string& name) const;

    // Parses a flag value, reporting failures as usage errors on that flag.
    template <typename Fn>
    auto parsed(const std::string& name, Fn&& parse) const {
        try {
            return parse(get(name));
        } catch (const std::exception& e) {
            throw UsageError("--" + name + ": " + e.what());
        }
    }

    const std::string& command() const noexcept { return command_; }
    const std::optional<std::string>& config_file() const noexcept { return config_file_; }
    const std::string& manifest_file() const noexcept { return manifest_arg_; }
    // Resolved values with paths shown relative to `out_dir` when inside it.
    nlohmann::ordered_json settings(const std::filesystem::path& out_dir) const;

private:
    enum class Kind { text, path, paths, flag };
    struct Entry {
        Kind kind = Kind::text;
        std::string value;
        bool flag_value = false;
        bool required = false;
        bool from_config = false;
        CLI::Option* option = nullptr;
    };

    Entry& add(const std::string& name, Kind kind);
    void apply_manifest();
    const Entry& entry(const std::string& name) const;

    CLI::App& sub_;
    std::string command_;
    std::string config_arg_;
    std::string manifest_arg_;
    std::optional<std::string> config_file_;
    std::map<std::string, Entry> entries_;
    std::vector<std::string> order_;
};

std::string display_path(const std::filesystem::path& p, const std::filesystem::path& out_dir);

// Collects inputs and outputs of one command and writes <command>.manifest.json.
class RunRecord {
public:
    RunRecord(std::string command, std::filesystem::path out_dir);

    const std::filesystem::path& out_dir() const noexcept { return out_dir_; }
    std::filesystem::path at(const std::string& relative) const { return out_dir_ / relative; }

    void input(const std::string& path);
    void write(const std::string& relative, std::string_view contents);
    void record_output(const std::string& relative);
    void seed(const std::string& stage, std::uint64_t value);
    void note(const std::string& key, nlohmann::ordered_json value);

    void finish(const Params& params, std::uint64_t seed);

private:
    std::string command_;
    std::filesystem::path out_dir_;
    std::vector<std::pair<std::string, std::string>> inputs_;
    std::vector<std::pair<std::string, std::string>> outputs_;
    nlohmann::ordered_json seeds_ = nlohmann::ordered_json::object();
    nlohmann::ordered_json notes_ = nlohmann::ordered_json::object();
    std::chrono::steady_clock::time_point start_;
};

// Scored pairs: "# model" and "# threshold" lines, then a_id, b_id, label,
// score, predicted. Unknown labels are written as "-" (label -1 in memory).
struct ScoredPair {
    std::string a_id;
    std::string b_id;
    int label = -1;
    double score = 0.0;
};

struct ScoredFile {
    std::string model;
    double threshold = 0.5;
    std::vector<ScoredPair> rows;
};

std::string render_scored(const ScoredFile& f);
ScoredFile read_scored(const std::string& path);

// Pair list for scoring: a_id, b_id and an optional label column; a header
// row starting with "a_id" is skipped.
std::vector<ScoredPair> read_pairs_to_score(const std::string& path);

std::map<std::string, ProteinFeatures> load_features(const std::string& path);
PairMatrix pair_matrix(const std::vector<PairExample>& pairs, const std::map<std::string, ProteinFeatures>& features);

struct Ensemble {
    std::vector<TrainedModel> models;
    double threshold = 0.5;
    std::vector<std::string> files;
};

// ensemble.json (model paths relative to it) or a single checkpoint.
Ensemble load_ensemble(const std::string& path);
Ensemble load_checkpoint_as_ensemble(const std::string& path);

}  // namespace pairforge::cli
