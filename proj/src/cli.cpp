#include "pairforge/cli.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "cli_support.hpp"
#include "pairforge/ingest.hpp"
#include "pairforge/metrics.hpp"
#include "pairforge/parallel.hpp"
#include "pairforge/rng.hpp"
#include "pairforge/rules.hpp"
#include "pairforge/split.hpp"
#include "pairforge/text.hpp"
#include "pairforge/verify.hpp"

namespace pairforge::cli {

namespace fs = std::filesystem;

namespace {

std::istringstream open_text(const std::string& path, RunRecord& rec) {
    auto contents = text::read_file(path);
    rec.input(path);
    return std::istringstream(std::move(contents));
}

// Explicit value, or a file of that name inside the output directory.
std::string in_out(const Params& p, const std::string& name, const std::string& file) {
    return p.get(name).empty() ? (fs::path(p.get("out")) / file).string() : p.get(name);
}

Task task_of(const Params& p) {
    return p.parsed("task", [](const std::string& v) { return parse_task(v); });
}

void common(Params& p, bool with_seed = true) {
    p.path("out", "output directory", "", true);
    p.text("task", "host_host or pathogen_host", "host_host");
    if (with_seed) p.text("seed", "top-level seed", "0");
}

std::vector<ProteinRecord> load_proteins(const std::string& path, RunRecord& rec) {
    auto in = open_text(path, rec);
    return parse_fasta(in);
}

std::map<std::string, ProteinRecord> by_id(const std::vector<ProteinRecord>& proteins) {
    std::map<std::string, ProteinRecord> out;
    for (const auto& p : proteins) out.emplace(p.id(), p);
    return out;
}

AnnotationBundle load_annotations(const Params& p, RunRecord& rec) {
    if (p.get("annotations").empty()) return {};
    auto in = open_text(p.get("annotations"), rec);
    return parse_annotation_table(in);
}

DatasetBundle load_bundle(const std::string& path, RunRecord& rec) {
    auto in = open_text(path, rec);
    return read_bundle(in);
}

SplitAssignment load_assignment(const std::string& path, RunRecord& rec) {
    const auto text = text::read_file(path);
    rec.input(path);
    try {
        return assignment_from_manifest(nlohmann::json::parse(text));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::BadFormat, path + ": " + e.what());
    }
}

std::string dump(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

std::vector<std::size_t> size_list(const Params& p, const std::string& name) {
    std::vector<std::size_t> out;
    for (const auto& item : p.list(name)) {
        std::size_t v = 0;
        const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
        if (ec != std::errc() || ptr != item.data() + item.size() || v == 0)
            throw UsageError("--" + name + ": expected positive integers, got '" + p.get(name) + "'");
        out.push_back(v);
    }
    if (out.empty()) throw UsageError("--" + name + " is empty");
    return out;
}

// ---------------------------------------------------------------------------

void define_split(Params& p) {
    common(p);
    p.path("proteins", "FASTA of every protein", "", true);
    p.path("pairs", "interaction pairs (TSV a_id, b_id, label[, source] or MITAB)", "", true);
    p.text("pairs-format", "tsv or mitab", "tsv");
    p.text("miscore-floor", "minimum MITAB intact-miscore", "0.45");
    p.path("annotations", "annotation table (compartments for the disjointness filter)");
    p.path("co-complex", "co-complex pair list for the negative filter");
    p.text("ratios", "train,validation,test protein fractions", "0.7,0.1,0.2");
    p.text("negative-ratio", "synthesized negatives per positive", "1");
    p.flag("compartment-disjoint", "only synthesize negatives with disjoint known compartments", false);
    p.flag("allow-self", "keep self interactions", false);
}

int run_split(const Params& p, std::ostream& out) {
    RunRecord rec("split", p.get("out"));
    const auto task = task_of(p);
    const auto seed = p.u64("seed");
    const auto proteins = load_proteins(p.get("proteins"), rec);

    std::vector<PairExample> pairs;
    {
        auto in = open_text(p.get("pairs"), rec);
        const auto format = p.get("pairs-format");
        if (format == "mitab") {
            pairs = parse_mitab_subset(in, {p.number("miscore-floor"), task, p.on("allow-self")});
        } else if (format == "tsv") {
            pairs = parse_pair_table(in, {task, p.on("allow-self")});
        } else {
            throw UsageError("--pairs-format: expected tsv or mitab, got '" + format + "'");
        }
    }
    const auto annotations = load_annotations(p, rec);

    std::array<double, 3> ratios{};
    const auto r = p.list("ratios");
    if (r.size() != 3) throw UsageError("--ratios: expected three comma-separated fractions");
    for (std::size_t i = 0; i < 3; ++i) {
        const auto v = text::parse_double(r[i]);
        if (!v) throw UsageError("--ratios: '" + r[i] + "' is not a number");
        ratios[i] = *v;
    }

    const auto split_seed = derive_seed(seed, "split");
    rec.seed("split", split_seed);
    const auto assignment = assign_proteins(proteins, ratios, split_seed);

    std::vector<PairExample> positives;
    std::size_t given_negatives = 0;
    for (const auto& pr : pairs) {
        if (pr.label == Label::positive) positives.push_back(pr);
        else ++given_negatives;
    }

    nlohmann::ordered_json negatives;
    DatasetBundle bundle;
    if (given_negatives > 0) {
        bundle = route_pairs(pairs, assignment);
        negatives["source"] = "given";
        negatives["count"] = given_negatives;
    } else {
        NegativeSynthesisConfig cfg;
        cfg.ratio = p.number("negative-ratio");
        cfg.require_compartment_disjoint = p.on("compartment-disjoint");
        cfg.task = task;
        cfg.seed = derive_seed(seed, "negatives");
        rec.seed("negatives", cfg.seed);
        for (const auto& pr : proteins) cfg.roles[pr.id()] = pr.role();
        if (!p.get("co-complex").empty()) {
            auto in = open_text(p.get("co-complex"), rec);
            cfg.co_complex = parse_pair_list(in);
            cfg.exclude_co_complex = true;
        }
        bundle = synthesize_negatives(route_pairs(positives, assignment), assignment, annotations, cfg);
        negatives["source"] = "synthesized";
        negatives["ratio"] = cfg.ratio;
        negatives["compartment_disjoint"] = cfg.require_compartment_disjoint;
        negatives["co_complex_filter"] = cfg.exclude_co_complex;
    }
    bundle.seed = seed;

    auto manifest = split_manifest_json(bundle, assignment);
    manifest["task"] = to_string(task);
    manifest["top_level_seed"] = seed;
    manifest["protein_pool"] = task == Task::pathogen_host ? "union of host and pathogen proteins" : "all proteins";
    manifest["negatives"] = negatives;

    std::ostringstream tsv;
    write_bundle(tsv, bundle);
    rec.write("bundle.tsv", tsv.str());
    rec.write("split_manifest.json", dump(manifest));
    rec.finish(p, seed);

    const auto counts = assignment.counts();
    out << "proteins train/validation/test: " << counts[0] << "/" << counts[1] << "/" << counts[2] << "\n";
    for (auto s : kAllSplits) {
        const auto c = bundle.class_counts(s);
        out << to_string(s) << ": " << c.positives << " positive, " << c.negatives << " negative\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------

void define_verify(Params& p) {
    common(p, false);
    p.path("bundle", "bundle TSV (default: <out>/bundle.tsv)");
    p.path("split-manifest", "split manifest (default: <out>/split_manifest.json)");
    p.text("imbalance", "class-imbalance tolerance", "0.02");
    p.text("overrepresentation", "per-protein share warning level", "0.05");
}

int run_verify(const Params& p, std::ostream& out) {
    RunRecord rec("verify", p.get("out"));
    const auto bundle = load_bundle(in_out(p, "bundle", "bundle.tsv"), rec);
    const auto assignment = load_assignment(in_out(p, "split-manifest", "split_manifest.json"), rec);
    VerifyTolerances tol;
    tol.imbalance = p.number("imbalance");
    tol.overrepresentation = p.number("overrepresentation");
    const auto report = verify_bundle(bundle, assignment, tol);
    rec.write("verify_report.json", dump(to_json(report)));
    rec.note("errors", report.error_count());
    rec.note("warnings", report.warning_count());
    rec.finish(p, 0);
    for (const auto& v : report.violations)
        out << (v.severity == Severity::error ? "error " : "warning ") << v.code << ": " << v.details << "\n";
    out << report.error_count() << " errors, " << report.warning_count() << " warnings\n";
    return report.passes() ? 0 : 1;
}

// ---------------------------------------------------------------------------

void define_featurize(Params& p) {
    common(p, false);
    p.path("proteins", "FASTA of every protein", "", true);
    p.path("embeddings", "embedding table (text or PFEM binary)", "", true);
    p.path("annotations", "annotation table");
    p.path("bundle", "bundle TSV (default: <out>/bundle.tsv)");
    p.path("zscale", "Sandberg z-scale table", "", true);
    p.path("eisenberg", "Eisenberg hydrophobicity table", "", true);
    p.text("lag", "maximum ACC lag", "5");
    p.flag("cross-terms", "include cross-dimension ACC terms", false);
}

int run_featurize(const Params& p, std::ostream& out) {
    RunRecord rec("featurize", p.get("out"));
    const auto task = task_of(p);
    const auto proteins = by_id(load_proteins(p.get("proteins"), rec));
    EmbeddingTable emb;
    {
        auto in = open_text(p.get("embeddings"), rec);
        emb = load_embedding_table(in);
    }
    const auto annotations = load_annotations(p, rec);
    const auto bundle = load_bundle(in_out(p, "bundle", "bundle.tsv"), rec);

    DescriptorConfig cfg;
    cfg.max_lag = p.count("lag");
    cfg.include_cross_terms = p.on("cross-terms");
    {
        auto in = open_text(p.get("zscale"), rec);
        cfg.zscale = parse_scale_table(in, "zscale");
    }
    {
        auto in = open_text(p.get("eisenberg"), rec);
        cfg.eisenberg = parse_scale_table(in, "eisenberg");
    }

    std::set<std::string> used;
    for (const auto& pr : flatten(bundle)) {
        used.insert(pr.a_id);
        used.insert(pr.b_id);
    }
    std::vector<std::string> ids(used.begin(), used.end());
    std::vector<ProteinFeatures> computed(ids.size());
    for (const auto& id : ids)
        if (!proteins.contains(id)) throw Error(ErrorCode::UnknownProtein, id + " is not in the FASTA file");
    parallel_for(ids.size(), [&](std::size_t i) { computed[i] = protein_feature_vector(proteins.at(ids[i]), emb, cfg); });
    std::map<std::string, ProteinFeatures> features;
    for (std::size_t i = 0; i < ids.size(); ++i) features.emplace(ids[i], std::move(computed[i]));

    SignalTableOptions opt;
    opt.task = task;
    const auto table = build_signal_table(bundle, proteins, features, annotations, opt);

    std::ostringstream pf, sig, reg;
    write_protein_features(pf, features);
    write_signal_table(sig, table);
    reg << "name\tfamily\tdescription\n";
    for (const auto& s : signal_registry(task)) reg << s.name << '\t' << s.family << '\t' << s.description << '\n';
    rec.write("protein_features.tsv", pf.str());
    rec.write("signals.tsv", sig.str());
    rec.write("signal_registry.tsv", reg.str());
    rec.note("signal_count", table.names.size());
    rec.note("protein_dim", features.empty() ? 0 : features.begin()->second.values.size());
    rec.finish(p, 0);
    out << features.size() << " proteins, " << table.rows.size() << " pairs, " << table.names.size() << " signals\n";
    return 0;
}

// ---------------------------------------------------------------------------

void define_induce(Params& p) {
    common(p);
    p.path("signals", "signal table (default: <out>/signals.tsv)");
    p.text("strategy", "greedy, sparse or hybrid", "hybrid");
    p.text("rule-cap", "maximum nonzero rules for the sparse path", "60");
    p.text("broad-rule-cap", "maximum training firing fraction of an indicator", "0.9");
    p.text("exclude", "excluded signals: 'missingness', 'none' or a comma list", "missingness");
    p.text("conjunction-top-k", "indicators paired into conjunctions", "20");
}

int run_induce(const Params& p, std::ostream& out) {
    RunRecord rec("induce", p.get("out"));
    const auto task = task_of(p);
    const auto seed = p.u64("seed");
    const auto strategy = p.get("strategy");
    if (strategy != "greedy" && strategy != "sparse" && strategy != "sparse_logistic" && strategy != "hybrid")
        throw UsageError("--strategy: expected greedy, sparse or hybrid, got '" + strategy + "'");
    const auto signals_path = in_out(p, "signals", "signals.tsv");
    SignalTable table;
    {
        auto in = open_text(signals_path, rec);
        table = read_signal_table(in);
    }
    const auto data = InductionData::from(table);

    ExclusionPolicy policy = ExclusionPolicy::defaults();
    const auto& exclude = p.get("exclude");
    if (exclude == "none") {
        policy.excluded.clear();
        policy.exclude_enabled = false;
    } else if (exclude != "missingness") {
        policy.excluded.clear();
        for (const auto& s : p.list("exclude")) policy.excluded.insert(s);
    }
    policy.broad_rule_cap = p.number("broad-rule-cap");
    CandidateConfig cc;
    cc.conjunction_top_k = p.count("conjunction-top-k");
    const auto candidates = generate_candidates(data, policy, cc);

    SparseConfig sc;
    sc.rule_cap = p.count("rule-cap");
    nlohmann::ordered_json report;
    report["candidates"] = candidates.size();
    report["signals"] = table.names.size();
    const auto path_json = [](const SparseReport& r) {
        nlohmann::ordered_json pts = nlohmann::ordered_json::array();
        for (const auto& pt : r.path)
            pts.push_back({{"lambda", pt.lambda},
                           {"nonzero", pt.nonzero},
                           {"validation_mcc", pt.validation_mcc},
                           {"sweeps", pt.sweeps},
                           {"converged", pt.converged},
                           {"eligible", pt.eligible}});
        return nlohmann::ordered_json{
            {"lambda_max", r.lambda_max}, {"selected", r.selected}, {"columns_used", r.columns_used}, {"path", pts}};
    };

    RuleSet rs;
    if (strategy == "greedy") {
        GreedyReport g;
        rs = induce_greedy(candidates, data, task, &g);
        report["greedy_steps"] = g.step_validation_mcc;
    } else if (strategy == "sparse" || strategy == "sparse_logistic") {
        SparseReport s;
        rs = induce_sparse_logistic(candidates, data, task, sc, &s);
        report["sparse"] = path_json(s);
    } else if (strategy == "hybrid") {
        HybridReport h;
        rs = induce_hybrid(candidates, data, task, sc, &h);
        report["chosen"] = h.chosen;
        report["warnings"] = h.warnings;
        if (h.greedy) report["greedy_validation_mcc"] = h.greedy->metrics.at("validation_mcc");
        if (h.sparse) report["sparse_validation_mcc"] = h.sparse->metrics.at("validation_mcc");
    } else {
        throw UsageError("--strategy: expected greedy, sparse or hybrid, got '" + strategy + "'");
    }

    rs.seed = seed;
    rs.config_digest = sha256_hex(p.settings(rec.out_dir()).dump() + file_sha256(signals_path));
    rs.provenance["signals"] = display_path(signals_path, rec.out_dir());
    const auto test_rows = table.rows_in(Split::test);
    if (!test_rows.empty()) rs.metrics["test_mcc"] = evaluate_ruleset(rs, table, test_rows).mcc;

    rec.write("ruleset.json", serialize_ruleset(rs));
    rec.write("ruleset.txt", render_ruleset_text(rs));
    rec.write("induce_report.json", dump(report));
    rec.finish(p, seed);
    out << "strategy " << to_string(rs.strategy) << ", " << rs.rules.size() << " rules, validation MCC "
        << text::format_double(rs.metrics["validation_mcc"]) << "\n";
    return 0;
}

// ---------------------------------------------------------------------------

void define_train(Params& p) {
    common(p);
    p.path("features", "per-protein features (default: <out>/protein_features.tsv)");
    p.path("bundle", "bundle TSV (default: <out>/bundle.tsv)");
    p.path("split-manifest", "split manifest (default: <out>/split_manifest.json)");
    p.text("folds", "validation folds over the non-test proteins", "5");
    p.text("bags", "seed replicas per fold", "3");
    p.text("architecture", "pair_mlp or two_tower", "two_tower");
    p.text("hidden", "hidden layer sizes", "64,32");
    p.text("activation", "relu, gelu, tanh or silu", "relu");
    p.text("loss", "bce or focal", "bce");
    p.text("focal-gamma", "focal loss gamma", "2");
    p.text("tower-out", "two-tower output width", "32");
    p.text("init-temperature", "two-tower similarity temperature at initialisation", "0.2");
    p.text("symmetrize", "average both pair orientations: auto (on for host_host), true or false", "auto");
    p.text("learning-rate", "AdamW learning rate", "0.001");
    p.text("weight-decay", "decoupled weight decay", "0.0001");
    p.text("batch-size", "mini-batch size", "64");
    p.text("epochs", "maximum epochs", "100");
    p.text("patience", "early-stopping patience in epochs", "10");
    p.flag("class-weighting", "inverse-frequency class weights", true);
    p.flag("hard-negative-mining", "up-weight high-scoring negatives", false);
    p.text("hard-negative-floor", "score above which a negative is hard", "0.7");
    p.text("hard-negative-multiplier", "weight multiplier for hard negatives", "2");
    p.flag("pu-downweighting", "down-weight very high-scoring negatives", false);
    p.text("pu-floor", "score above which a negative is down-weighted", "0.9");
    p.text("pu-factor", "down-weighting factor", "0.5");
}

int run_train(const Params& p, std::ostream& out) {
    RunRecord rec("train", p.get("out"));
    const auto task = task_of(p);
    const auto seed = p.u64("seed");
    const auto features_path = in_out(p, "features", "protein_features.tsv");
    const auto features = load_features(features_path);
    rec.input(features_path);
    const auto bundle = load_bundle(in_out(p, "bundle", "bundle.tsv"), rec);
    const auto assignment = load_assignment(in_out(p, "split-manifest", "split_manifest.json"), rec);

    ModelSpec spec;
    spec.architecture = p.parsed("architecture", [](const std::string& v) { return parse_architecture(v); });
    spec.activation = p.parsed("activation", [](const std::string& v) { return parse_activation(v); });
    spec.loss = p.parsed("loss", [](const std::string& v) { return parse_loss(v); });
    spec.hidden = size_list(p, "hidden");
    spec.focal_gamma = p.number("focal-gamma");
    spec.tower_out = p.count("tower-out");
    spec.init_temperature = p.number("init-temperature");
    const auto& sym = p.get("symmetrize");
    if (sym == "auto") spec.symmetrize = task == Task::host_host;
    else if (sym == "true" || sym == "false") spec.symmetrize = sym == "true";
    else throw UsageError("--symmetrize: expected auto, true or false, got '" + sym + "'");

    TrainConfig cfg;
    cfg.learning_rate = p.number("learning-rate");
    cfg.weight_decay = p.number("weight-decay");
    cfg.batch_size = p.count("batch-size");
    cfg.max_epochs = p.count("epochs");
    cfg.patience = p.count("patience");
    cfg.class_weighting = p.on("class-weighting");
    cfg.hard_negative_mining = p.on("hard-negative-mining");
    cfg.hard_negative_floor = p.number("hard-negative-floor");
    cfg.hard_negative_multiplier = p.number("hard-negative-multiplier");
    cfg.pu_downweighting = p.on("pu-downweighting");
    cfg.pu_floor = p.number("pu-floor");
    cfg.pu_factor = p.number("pu-factor");
    cfg.bags = p.count("bags");
    try {
        cfg.validate();
    } catch (const Error& e) {
        throw UsageError(e.what());
    }

    const auto folds = p.count("folds");
    const auto fold_seed = derive_seed(seed, "folds");
    rec.seed("folds", fold_seed);
    const auto plan = make_fold_plan(assignment, folds, fold_seed);
    const auto all_pairs = flatten(bundle);

    struct Job {
        std::size_t fold, bag;
        std::uint64_t seed;
        TrainedModel model;
    };
    std::vector<DatasetBundle> fold_bundles;
    std::vector<Job> jobs;
    for (std::size_t k = 0; k < folds; ++k) {
        fold_bundles.push_back(route_fold(all_pairs, plan, k));
        for (std::size_t b = 0; b < cfg.bags; ++b) {
            const auto s = derive_seed(seed, "model/fold" + std::to_string(k) + "/bag" + std::to_string(b));
            rec.seed("model/fold" + std::to_string(k) + "/bag" + std::to_string(b), s);
            jobs.push_back(Job{k, b, s, TrainedModel{}});
        }
    }
    std::vector<PairMatrix> fold_train(folds), fold_val(folds);
    for (std::size_t k = 0; k < folds; ++k) {
        fold_train[k] = pair_matrix(fold_bundles[k].pairs(Split::train), features);
        fold_val[k] = pair_matrix(fold_bundles[k].pairs(Split::validation), features);
    }
    parallel_for(jobs.size(), [&](std::size_t i) {
        ModelSpec s = spec;
        s.seed = jobs[i].seed;
        jobs[i].model = train_model(s, cfg, fold_train[jobs[i].fold], fold_val[jobs[i].fold]);
    });

    // Out-of-fold validation scores from each fold's own bags.
    std::vector<double> pooled_scores;
    std::vector<int> pooled_labels;
    std::vector<TrainedModel> models;
    nlohmann::ordered_json model_list = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < folds; ++k) {
        std::vector<TrainedModel> fold_models;
        for (const auto& j : jobs)
            if (j.fold == k) fold_models.push_back(j.model);
        const auto scores = ensemble_predict(fold_models, fold_val[k].x);
        pooled_scores.insert(pooled_scores.end(), scores.begin(), scores.end());
        pooled_labels.insert(pooled_labels.end(), fold_val[k].y.begin(), fold_val[k].y.end());
    }
    for (const auto& j : jobs) {
        const auto name = "models/fold" + std::to_string(j.fold) + "_bag" + std::to_string(j.bag) + ".pfm";
        fs::create_directories(rec.at("models"));
        write_checkpoint(rec.at(name).string(), j.model);
        rec.record_output(name);
        rec.record_output(name + ".history.tsv");
        double best = -1.0;
        for (const auto& h : j.model.history) best = std::max(best, h.validation_mcc);
        model_list.push_back({{"fold", j.fold},
                              {"bag", j.bag},
                              {"seed", j.seed},
                              {"path", name},
                              {"epochs_run", j.model.history.size() - 1},
                              {"best_validation_mcc", best},
                              {"calibration_temperature", j.model.calibration_temperature},
                              {"threshold", j.model.decision_threshold}});
        models.push_back(j.model);
    }
    const auto tuned = tune_threshold(pooled_scores, pooled_labels);
    const double threshold = std::clamp(tuned.threshold, 0.0, 1.0);

    const auto& test_pairs = bundle.pairs(Split::test);
    ScoredFile scored{"ensemble", threshold, {}};
    if (!test_pairs.empty()) {
        const auto test = pair_matrix(test_pairs, features);
        const auto scores = ensemble_predict(models, test.x);
        for (std::size_t i = 0; i < test_pairs.size(); ++i)
            scored.rows.push_back({test_pairs[i].a_id, test_pairs[i].b_id, test.y[i], scores[i]});
    }

    nlohmann::ordered_json ens;
    ens["spec"] = to_json(spec);
    ens["folds"] = folds;
    ens["bags"] = cfg.bags;
    ens["threshold"] = threshold;
    ens["pooled_validation_mcc"] = tuned.value;
    ens["pooled_validation_pairs"] = pooled_scores.size();
    ens["models"] = model_list;
    rec.write("ensemble.json", dump(ens));
    rec.write("scores_test.tsv", render_scored(scored));
    rec.finish(p, seed);
    out << models.size() << " models, pooled validation MCC " << text::format_double(tuned.value) << ", threshold "
        << text::format_double(threshold) << "\n";
    return 0;
}

// ---------------------------------------------------------------------------

void define_evaluate(Params& p) {
    common(p, false);
    p.paths("scores", "comma-separated scored-pair files (default: <out>/scores_test.tsv)");
    p.text("threshold", "override the decision threshold stored in each file");
}

int run_evaluate(const Params& p, std::ostream& out) {
    RunRecord rec("evaluate", p.get("out"));
    auto files = p.list("scores");
    if (files.empty()) files.push_back((fs::path(p.get("out")) / "scores_test.tsv").string());
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    std::string tsv;
    for (const auto& file : files) {
        const auto scored = read_scored(file);
        rec.input(file);
        const double threshold = p.get("threshold").empty() ? scored.threshold : p.number("threshold");
        std::vector<double> s;
        std::vector<int> y;
        for (const auto& r : scored.rows) {
            if (r.label < 0) throw Error(ErrorCode::BadLabel, file + ": evaluation needs labels for every pair");
            s.push_back(r.score);
            y.push_back(r.label);
        }
        const auto m = classification_metrics(confusion_matrix(s, y, threshold));
        const auto name = fs::path(file).stem().string();
        rows.push_back({{"name", name},
                        {"file", display_path(file, rec.out_dir())},
                        {"model", scored.model},
                        {"threshold", threshold},
                        {"metrics", to_json(m)}});
        const auto block = metrics_tsv(m, name);
        tsv += tsv.empty() ? block : block.substr(block.find('\n') + 1);
        out << name << ": MCC " << text::format_double(m.mcc) << ", accuracy " << text::format_double(m.accuracy)
            << "\n";
    }
    rec.write("metrics.json", dump({{"rows", rows}}));
    rec.write("metrics.tsv", tsv);
    rec.finish(p, 0);
    return 0;
}

// ---------------------------------------------------------------------------

void define_score(Params& p) {
    common(p, false);
    p.path("pairs", "pairs to score (TSV a_id, b_id[, label])");
    p.text("split", "score this split of the bundle instead of --pairs");
    p.path("ruleset", "ruleset JSON");
    p.path("ensemble", "ensemble.json from train");
    p.path("checkpoint", "single model checkpoint");
    p.path("features", "per-protein features (default: <out>/protein_features.tsv)");
    p.path("bundle", "bundle TSV; training positives feed graph signals (default: <out>/bundle.tsv)");
    p.path("proteins", "FASTA (ruleset scoring)");
    p.path("annotations", "annotation table (ruleset scoring)");
    p.text("name", "output is scores_<name>.tsv", "scored");
}

int run_score(const Params& p, std::ostream& out) {
    RunRecord rec("score_" + p.get("name"), p.get("out"));
    const auto task = task_of(p);
    const int models_given = !p.get("ruleset").empty() + !p.get("ensemble").empty() + !p.get("checkpoint").empty();
    if (models_given != 1) throw UsageError("give exactly one of --ruleset, --ensemble, --checkpoint");
    if (p.get("pairs").empty() == p.get("split").empty()) throw UsageError("give exactly one of --pairs, --split");

    const auto bundle_path = in_out(p, "bundle", "bundle.tsv");
    std::optional<DatasetBundle> bundle;
    std::vector<ScoredPair> targets;
    if (!p.get("split").empty()) {
        const auto split = p.parsed("split", [](const std::string& v) { return parse_split(v); });
        bundle = load_bundle(bundle_path, rec);
        for (const auto& pr : bundle->pairs(split))
            targets.push_back({pr.a_id, pr.b_id, pr.label == Label::positive ? 1 : 0, 0.0});
    } else {
        targets = read_pairs_to_score(p.get("pairs"));
        rec.input(p.get("pairs"));
    }
    std::vector<PairExample> as_pairs;
    for (const auto& t : targets) {
        auto [a, b] = canonical_pair(t.a_id, t.b_id, task);
        as_pairs.push_back({a, b, t.label == 1 ? Label::positive : Label::negative, "score"});
    }

    const auto features_path = in_out(p, "features", "protein_features.tsv");
    const auto features = load_features(features_path);
    rec.input(features_path);

    ScoredFile scored;
    std::vector<double> scores;
    if (!p.get("ruleset").empty()) {
        if (p.get("proteins").empty()) throw UsageError("--ruleset scoring needs --proteins");
        const auto rs = parse_ruleset(text::read_file(p.get("ruleset")));
        rec.input(p.get("ruleset"));
        if (!bundle) bundle = load_bundle(bundle_path, rec);
        const auto proteins = by_id(load_proteins(p.get("proteins"), rec));
        const auto annotations = load_annotations(p, rec);
        // Training positives supply the graph; targets go in the test slot.
        DatasetBundle carrier;
        carrier.pairs(Split::train) = bundle->pairs(Split::train);
        carrier.pairs(Split::test) = as_pairs;
        SignalTableOptions opt;
        opt.task = task;
        const auto table = build_signal_table(carrier, proteins, features, annotations, opt);
        scores = score_rows(rs, table, table.rows_in(Split::test));
        scored.model = "ruleset";
        scored.threshold = rs.decision_threshold;
    } else {
        const auto ens = p.get("ensemble").empty() ? load_checkpoint_as_ensemble(p.get("checkpoint"))
                                                   : load_ensemble(p.get("ensemble"));
        rec.input(p.get("ensemble").empty() ? p.get("checkpoint") : p.get("ensemble"));
        for (const auto& f : ens.files)
            if (f != p.get("checkpoint")) rec.input(f);
        const auto x = pair_matrix(as_pairs, features);
        scores = ensemble_predict(ens.models, x.x);
        scored.model = p.get("ensemble").empty() ? "checkpoint" : "ensemble";
        scored.threshold = ens.threshold;
    }
    for (std::size_t i = 0; i < targets.size(); ++i) {
        scored.rows.push_back(targets[i]);
        scored.rows.back().score = scores[i];
    }
    rec.write("scores_" + p.get("name") + ".tsv", render_scored(scored));
    rec.finish(p, 0);
    std::size_t positive = 0;
    for (const auto& r : scored.rows) positive += r.score > scored.threshold;
    out << scored.rows.size() << " pairs scored, " << positive << " predicted positive\n";
    return 0;
}

// ---------------------------------------------------------------------------

void define_explain(Params& p) {
    common(p);
    p.path("ensemble", "ensemble.json (default: <out>/ensemble.json)");
    p.path("checkpoint", "single model checkpoint instead of an ensemble");
    p.path("features", "per-protein features (default: <out>/protein_features.tsv)");
    p.path("bundle", "bundle TSV (default: <out>/bundle.tsv)");
    p.text("split", "split whose pairs are explained", "test");
    p.text("max-instances", "explain at most this many pairs", "100");
    p.text("mode", "exact or sampled", "exact");
    p.text("permutations", "permutations in sampled mode", "256");
    p.text("baseline", "mean (training-pair mean) or zeros", "mean");
}

int run_explain(const Params& p, std::ostream& out) {
    RunRecord rec("explain", p.get("out"));
    const auto seed = p.u64("seed");
    const auto features_path = in_out(p, "features", "protein_features.tsv");
    const auto features = load_features(features_path);
    rec.input(features_path);
    const auto bundle = load_bundle(in_out(p, "bundle", "bundle.tsv"), rec);
    const auto model_path = p.get("checkpoint").empty() ? in_out(p, "ensemble", "ensemble.json") : p.get("checkpoint");
    const auto ens = p.get("checkpoint").empty() ? load_ensemble(model_path) : load_checkpoint_as_ensemble(model_path);
    rec.input(model_path);
    for (const auto& f : ens.files)
        if (f != model_path) rec.input(f);
    if (features.empty()) throw Error(ErrorCode::EmptyInput, "no protein features");

    const auto split = p.parsed("split", [](const std::string& v) { return parse_split(v); });
    auto pairs = bundle.pairs(split);
    pairs.resize(std::min(pairs.size(), p.count("max-instances")));
    const auto inst = pair_matrix(pairs, features);
    std::vector<std::vector<double>> instances;
    for (Eigen::Index j = 0; j < inst.x.cols(); ++j)
        instances.emplace_back(inst.x.col(j).data(), inst.x.col(j).data() + inst.x.rows());

    const auto train = pair_matrix(bundle.pairs(Split::train), features);
    std::vector<double> baseline(static_cast<std::size_t>(train.x.rows()), 0.0);
    AttributionOptions opt;
    if (p.get("baseline") == "mean") {
        if (train.size() == 0) throw Error(ErrorCode::EmptySplit, "train");
        const Eigen::VectorXd mean = train.x.rowwise().mean();
        baseline.assign(mean.data(), mean.data() + mean.size());
        opt.baseline_name = "training mean";
    } else if (p.get("baseline") == "zeros") {
        opt.baseline_name = "zeros";
    } else {
        throw UsageError("--baseline: expected mean or zeros, got '" + p.get("baseline") + "'");
    }
    const auto& mode = p.get("mode");
    if (mode == "exact") opt.mode = AttributionMode::exact;
    else if (mode == "sampled") opt.mode = AttributionMode::sampled;
    else throw UsageError("--mode: expected exact or sampled, got '" + mode + "'");
    opt.permutations = p.count("permutations");
    opt.seed = derive_seed(seed, "attribution");
    rec.seed("attribution", opt.seed);

    const auto groups = pair_feature_groups(features.begin()->second.blocks);
    const auto& models = ens.models;
    const ValueFunction value = [&models](std::span<const double> x) {
        double s = 0.0;
        for (const auto& m : models) s += forward_score(m, x);
        return s / static_cast<double>(models.size());
    };
    const auto report = group_attribution(value, instances, groups, baseline, opt);
    auto j = to_json(report);
    j["model"] = display_path(model_path, rec.out_dir());
    j["models"] = models.size();
    j["split"] = to_string(split);
    rec.write("attribution.json", dump(j));
    rec.finish(p, seed);
    for (std::size_t g = 0; g < report.groups.size(); ++g)
        out << report.groups[g] << "\t" << text::format_double(report.mean_abs[g]) << "\n";
    return 0;
}

// ---------------------------------------------------------------------------

struct Command {
    std::string name;
    std::string help;
    void (*define)(Params&);
    int (*run)(const Params&, std::ostream&);
};

const std::vector<Command>& commands() {
    static const std::vector<Command> kCommands{
        {"split", "protein-disjoint split, pair routing and negative synthesis", define_split, run_split},
        {"verify", "audit a bundle for leakage, imbalance and duplicates", define_verify, run_verify},
        {"featurize", "protein features, pair signals and the signal registry", define_featurize, run_featurize},
        {"induce", "induce an interpretable ruleset", define_induce, run_induce},
        {"train", "fixed-test cross-fold ensemble training", define_train, run_train},
        {"evaluate", "classification metrics for scored pairs", define_evaluate, run_evaluate},
        {"explain", "group-level Shapley attribution", define_explain, run_explain},
        {"score", "score pairs with a ruleset, checkpoint or ensemble", define_score, run_score},
    };
    return kCommands;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"pairforge: protein-protein interaction modelling", "pairforge"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kToolVersion));
    std::vector<std::pair<CLI::App*, std::unique_ptr<Params>>> subs;
    for (const auto& c : commands()) {
        auto* sub = app.add_subcommand(c.name, c.help);
        auto params = std::make_unique<Params>(*sub, c.name);
        c.define(*params);
        subs.emplace_back(sub, std::move(params));
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << kToolVersion << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        const auto parsed = app.get_subcommands();
        err << (parsed.empty() ? app.help() : parsed.front()->help());
        return 2;
    }

    for (std::size_t i = 0; i < subs.size(); ++i) {
        auto& [sub, params] = subs[i];
        if (!sub->parsed()) continue;
        try {
            params->resolve();
            return commands()[i].run(*params, out);
        } catch (const UsageError& e) {
            err << "usage error: " << e.what() << "\n" << sub->help();
            return 2;
        } catch (const Error& e) {
            err << "error: " << e.what() << "\n";
            return 3;
        } catch (const std::exception& e) {
            err << "error: " << e.what() << "\n";
            return 3;
        }
    }
    return 2;
}

}  // namespace pairforge::cli
