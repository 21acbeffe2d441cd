#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <map>
#include <set>
#include <sstream>

#include "pairforge/features.hpp"
#include "pairforge/rules.hpp"
#include "pairforge/split.hpp"
#include "cli_support.hpp"
#include "support/cli_run.hpp"
#include "support/synthetic.hpp"

using namespace pairforge;
using namespace pairforge::testing;
namespace fs = std::filesystem;

namespace {

// Ten proteins, balanced classes, and one train pair that touches a test protein.
void write_leaky_bundle(const fs::path& dir) {
    SplitAssignment a;
    for (int i = 0; i < 10; ++i) a.split_of["P" + std::to_string(i)] = i < 6 ? Split::train : i < 8 ? Split::validation : Split::test;
    DatasetBundle b;
    b.pairs(Split::train) = {{"P0", "P1", Label::positive, "x"}, {"P2", "P3", Label::negative, "x"},
                             {"P1", "P9", Label::positive, "x"}, {"P4", "P5", Label::negative, "x"}};
    b.pairs(Split::validation) = {{"P0", "P6", Label::positive, "x"}, {"P1", "P7", Label::negative, "x"}};
    b.pairs(Split::test) = {{"P0", "P8", Label::positive, "x"}, {"P2", "P9", Label::negative, "x"}};
    std::ostringstream tsv;
    write_bundle(tsv, b);
    save(dir / "bundle.tsv", tsv.str());
    save(dir / "split_manifest.json", split_manifest_json(b, a).dump(2));
}

std::string sha_of_output(const nlohmann::json& manifest, const std::string& path) {
    for (const auto& o : manifest["outputs"])
        if (o["path"] == path) return o["sha256"];
    return "";
}

}  // namespace

TEST_CASE("usage errors exit 2 with usage text") {
    auto r = run_cli({"verify", "--out", "x", "--no-such-flag"});
    CHECK(r.code == 2);
    CHECK(r.err.find("--no-such-flag") != std::string::npos);
    CHECK(r.err.find("Usage") != std::string::npos);

    CHECK(run_cli({}).code == 2);
    CHECK(run_cli({"frobnicate"}).code == 2);
    r = run_cli({"split", "--out", scratch_dir("usage").string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("--proteins") != std::string::npos);

    r = run_cli({"induce", "--out", scratch_dir("usage2").string(), "--strategy", "bogus"});
    CHECK(r.code == 2);
    CHECK(r.err.find("--strategy") != std::string::npos);

    CHECK(run_cli({"--help"}).code == 0);
    CHECK(run_cli({"--version"}).out == "0.1.0\n");
}

TEST_CASE("runtime errors exit 3 with the module error code") {
    const auto dir = scratch_dir("runtime");
    save(dir / "bad.fasta", ">P1\nACDXZ\n");
    save(dir / "pairs.tsv", "P1\tP2\t1\n");
    const auto r = run_cli({"split", "--out", dir.string(), "--proteins", (dir / "bad.fasta").string(), "--pairs",
                            (dir / "pairs.tsv").string()});
    CHECK(r.code == 3);
    CHECK(r.err.find("ILLEGAL_RESIDUE") != std::string::npos);

    const auto missing = run_cli({"verify", "--out", dir.string()});
    CHECK(missing.code == 3);
}

TEST_CASE("verify on a leaked bundle exits 1 and names the pair") {
    const auto dir = scratch_dir("leak");
    write_leaky_bundle(dir);
    const auto r = run_cli({"verify", "--out", dir.string()});
    CHECK(r.code == 1);
    const auto report = read_json(dir / "verify_report.json");
    CHECK(report["passes"] == false);
    bool named = false;
    for (const auto& v : report["violations"])
        if (v["code"] == "LEAKAGE") named = v["a_id"] == "P1" && v["b_id"] == "P9" && v["split"] == "train";
    CHECK(named);
    CHECK(report["errors"] == 1);

    const auto manifest = read_json(dir / "verify.manifest.json");
    CHECK(manifest["command"] == "verify");
    CHECK(manifest["inputs"].size() == 2);
    CHECK(sha_of_output(manifest, "verify_report.json") == cli::file_sha256((dir / "verify_report.json").string()));
}

TEST_CASE("induce --strategy greedy on the planted conjunction writes two rules") {
    const auto dir = scratch_dir("induce");
    std::ostringstream tsv;
    write_signal_table(tsv, planted_table(11, Planted::conjunction, 0.02));
    save(dir / "signals.tsv", tsv.str());
    const auto r = run_cli({"induce", "--out", dir.string(), "--strategy", "greedy", "--seed", "3"});
    REQUIRE(r.code == 0);
    const auto registry = planted_registry();
    const auto rs = parse_ruleset(text::read_file((dir / "ruleset.json").string()), &registry);
    REQUIRE(rs.rules.size() == 2);
    std::set<std::string> rendered;
    for (const auto& rule : rs.rules) rendered.insert(render_rule(rule));
    CHECK(rendered == std::set<std::string>{"sigA > 0", "sigB < 1"});
    CHECK(rs.seed == 3);
    CHECK(rs.strategy == Strategy::greedy);
    CHECK(fs::exists(dir / "ruleset.txt"));
    const auto manifest = read_json(dir / "induce.manifest.json");
    CHECK(manifest["outputs"].size() == 3);
    CHECK(manifest["seeds"]["seed"] == 3);
}

TEST_CASE("flags override the command table, which overrides top-level keys") {
    const auto dir = scratch_dir("config");
    write_leaky_bundle(dir);
    save(dir / "run.toml",
         "imbalance = 0.3\noverrepresentation = 0.5\n[verify]\nimbalance = 0.4\n[split]\noverrepresentation = 0.9\n");
    const auto config = (dir / "run.toml").string();
    run_cli({"verify", "--out", dir.string(), "--config", config});
    auto settings = read_json(dir / "verify.manifest.json")["settings"];
    CHECK(settings["imbalance"] == "0.4");
    CHECK(settings["overrepresentation"] == "0.5");
    CHECK(read_json(dir / "verify.manifest.json")["config_file"]["path"] == "run.toml");

    run_cli({"verify", "--out", dir.string(), "--config", config, "--imbalance", "0.25"});
    settings = read_json(dir / "verify.manifest.json")["settings"];
    CHECK(settings["imbalance"] == "0.25");

    save(dir / "broken.toml", "imbalance = [\n");
    CHECK(run_cli({"verify", "--out", dir.string(), "--config", (dir / "broken.toml").string()}).code == 2);
    CHECK(run_cli({"verify", "--out", dir.string(), "--config", config, "--manifest", "x"}).code == 2);
}

TEST_CASE("short pipeline: manifests, scoring and re-running from a manifest") {
    const auto dir = scratch_dir("pipeline");
    const auto out = dir.string();
    const auto config = synthetic("config.toml");
    const auto step = [&](std::vector<std::string> args) {
        args.insert(args.begin() + 1, {"--config", config, "--out", out});
        const auto r = run_cli(args);
        INFO(args[0] << ": " << r.err);
        REQUIRE(r.code == 0);
    };
    step({"split"});
    step({"verify"});
    step({"featurize"});
    step({"induce", "--strategy", "greedy"});
    step({"train", "--folds", "2", "--bags", "1", "--epochs", "4", "--hidden", "8", "--tower-out", "8"});
    step({"evaluate"});
    step({"explain", "--max-instances", "5"});

    // Every file in the run directory belongs to exactly one manifest.
    std::map<std::string, int> owners;
    std::set<std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        const auto rel = fs::relative(e.path(), dir).generic_string();
        if (rel.ends_with(".manifest.json")) {
            const auto manifest = read_json(e.path());
            for (const auto& o : manifest["outputs"]) ++owners[o["path"].get<std::string>()];
        } else {
            files.insert(rel);
        }
    }
    for (const auto& f : files) CHECK_MESSAGE(owners[f] == 1, f);
    CHECK(owners.size() == files.size());

    const auto ensemble = read_json(dir / "ensemble.json");
    CHECK(ensemble["models"].size() == 2);
    const double threshold = ensemble["threshold"];
    CHECK(threshold >= 0.0);
    CHECK(threshold <= 1.0);
    const auto attribution = read_json(dir / "attribution.json");
    CHECK(attribution["instances"] == 5);

    // The same pair file feeds ruleset and checkpoint scoring.
    save(dir / "to_score.tsv", "a_id\tb_id\nSYN001\tSYN002\nSYN003\tSYN150\n");
    const auto pairs = (dir / "to_score.tsv").string();
    step({"score", "--pairs", pairs, "--ruleset", out + "/ruleset.json", "--name", "rules"});
    const auto model = out + "/" + ensemble["models"][0]["path"].get<std::string>();
    step({"score", "--pairs", pairs, "--checkpoint", model, "--name", "model"});
    for (const auto* name : {"scores_rules.tsv", "scores_model.tsv"}) {
        const auto lines = text::read_file((dir / name).string());
        CHECK(lines.find("SYN001\tSYN002\t-\t") != std::string::npos);
        CHECK(lines.find("SYN003\tSYN150\t-\t") != std::string::npos);
    }
    CHECK(run_cli({"score", "--out", out, "--pairs", pairs}).code == 2);
    CHECK(run_cli({"evaluate", "--out", out, "--scores", out + "/scores_model.tsv"}).code == 3);

    // Delete the training outputs and rebuild them from the manifest.
    std::map<std::string, std::string> before;
    const auto train_manifest = read_json(dir / "train.manifest.json");
    for (const auto& o : train_manifest["outputs"]) before[o["path"]] = o["sha256"];
    for (const auto& [path, sha] : before) fs::remove(dir / path);
    const auto r = run_cli({"train", "--manifest", (dir / "train.manifest.json").string()});
    REQUIRE(r.code == 0);
    for (const auto& [path, sha] : before) CHECK_MESSAGE(cli::file_sha256((dir / path).string()) == sha, path);
    const auto rerun = read_json(dir / "train.manifest.json");
    CHECK(rerun["config_digest"] == train_manifest["config_digest"]);
    CHECK(rerun["settings"] == train_manifest["settings"]);
}
