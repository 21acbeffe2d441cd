// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "pairforge/features.hpp"
#include "pairforge/metrics.hpp"
#include "pairforge/predict.hpp"
#include "pairforge/rules.hpp"
#include "pairforge/split.hpp"
#include "pairforge/verify.hpp"
#include "support/cli_run.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace pairforge;
using namespace pairforge::testing;
namespace fs = std::filesystem;

namespace {

// Collects the first few failure messages of one criterion.
struct Check {
    std::vector<std::string> failures;
    std::size_t count = 0;

    void operator()(bool ok, const std::string& what) {
        ++count;
        if (!ok && failures.size() < 5) failures.push_back(what);
        else if (!ok) failures.back() = "... and more";
    }
};

using Clock = std::chrono::steady_clock;

struct Criterion {
    int id;
    std::string name;
    double budget_seconds;
    std::function<std::string(Check&)> body;  // returns a summary
};

std::string fmt(double v) {
    std::ostringstream s;
    s << v;
    return s.str();
}

// -- 1 ---------------------------------------------------------------------

std::string metrics_oracle(Check& check) {
    std::size_t cases = 0;
    double worst = 0.0;
    for (std::uint64_t tp = 0; tp <= 6; ++tp)
        for (std::uint64_t fp = 0; fp <= 6; ++fp)
            for (std::uint64_t tn = 0; tn <= 6; ++tn)
                for (std::uint64_t fn = 0; fn <= 6; ++fn) {
                    ++cases;
                    if (tp + fp + tn + fn == 0) {
                        bool raised = false;
                        try {
                            classification_metrics({0, 0, 0, 0});
                        } catch (const Error& e) {
                            raised = e.code() == ErrorCode::EmptyMatrix;
                        }
                        check(raised, "empty matrix must raise EMPTY_MATRIX");
                        continue;
                    }
                    const auto m = classification_metrics({tp, fp, tn, fn});
                    const auto r = metrics_reference(static_cast<double>(tp), static_cast<double>(fp),
                                                     static_cast<double>(tn), static_cast<double>(fn));
                    for (const auto [got, want] : {std::pair{m.accuracy, r.accuracy}, {m.recall, r.recall},
                                                   {m.precision, r.precision}, {m.f1, r.f1},
                                                   {m.specificity, r.specificity}, {m.mcc, r.mcc}})
                        worst = std::max(worst, std::abs(got - want));
                }
    check(cases == 2401, "case count");
    check(worst <= 1e-12, "max deviation " + fmt(worst));
    const double mcc = classification_metrics({3, 1, 4, 2}).mcc;
    check(std::abs(mcc - 10.0 / std::sqrt(600.0)) <= 1e-10 && std::abs(mcc - 0.4082) < 5e-5,
          "worked case MCC " + fmt(mcc));
    return fmt(cases) + " matrices, max deviation " + fmt(worst) + ", worked MCC " + fmt(mcc);
}

// -- 2 ---------------------------------------------------------------------

std::string split_soundness(Check& check) {
    const auto ids = protein_ids(1000);
    const std::array<double, 3> ratios{0.7, 0.1, 0.2};
    std::size_t errors = 0, bundles = 0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        Rng rng(derive_seed(seed, "pairs"));
        const auto assignment = assign_protein_ids(ids, ratios, derive_seed(seed, "split"));
        check(assignment.counts() == std::array<std::size_t, 3>{700, 100, 200}, "counts seed " + fmt(seed));
        const auto routed = route_pairs(random_positive_pairs(ids, 5000, rng), assignment);
        NegativeSynthesisConfig cfg;
        cfg.seed = derive_seed(seed, "negatives");
        const auto bundle = synthesize_negatives(routed, assignment, {}, cfg);
        for (auto s : kAllSplits) {
            const auto c = bundle.class_counts(s);
            check(c.negatives == c.positives, "1:1 ratio seed " + fmt(seed));
        }
        const auto report = verify_bundle(bundle, assignment);
        errors += report.error_count();
        ++bundles;
    }
    check(errors == 0, fmt(errors) + " verifier errors");
    return fmt(bundles) + " bundles, " + fmt(errors) + " verifier errors";
}

// -- 3 ---------------------------------------------------------------------

std::string acc_correctness(Check& check) {
    const auto cfg = default_descriptors();
    Rng rng(2024);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const auto seq = random_sequence(rng, 6 + rng.uniform_index(495));
        for (const auto* scale : {&cfg.zscale, &cfg.eisenberg}) {
            const auto got = acc_descriptor(seq, *scale, 5);
            const auto want = acc_reference(seq, *scale, 5);
            check(got.size() == want.size(), "descriptor length");
            for (std::size_t k = 0; k < std::min(got.size(), want.size()); ++k)
                worst = std::max(worst, std::abs(got[k] - want[k]));
        }
    }
    check(worst <= 1e-10, "max deviation " + fmt(worst));
    for (char r : std::string("ACDGKW"))
        for (const auto* scale : {&cfg.zscale, &cfg.eisenberg})
            for (double v : acc_descriptor(std::string(40, r), *scale, 5)) check(v == 0.0, "constant sequence");

    std::istringstream toy("A\t1\nC\t-1\nD\t0\nE\t0\nF\t0\nG\t0\nH\t0\nI\t0\nK\t0\nL\t0\n"
                           "M\t0\nN\t0\nP\t0\nQ\t0\nR\t0\nS\t0\nT\t0\nV\t0\nW\t0\nY\t0\n");
    const auto aca = acc_descriptor("ACA", parse_scale_table(toy, "toy"), 2);
    check(aca.size() == 2 && std::abs(aca[0] + 8.0 / 9.0) <= 1e-14 && std::abs(aca[1] - 4.0 / 9.0) <= 1e-14,
          "ACA fixture");
    return "200 descriptor comparisons, max deviation " + fmt(worst) + ", ACA = [" + fmt(aca.at(0)) + ", " +
           fmt(aca.at(1)) + "]";
}

// -- 4 ---------------------------------------------------------------------

std::string planted_recovery(Check& check) {
    double worst_mcc = 1.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto table = planted_table(seed, Planted::conjunction, 0.02, 1000, 300, 300);
        const auto data = InductionData::from(table);
        const auto cands = generate_candidates(data, ExclusionPolicy::defaults());
        const auto greedy = induce_greedy(cands, data, Task::host_host);
        std::set<std::string> rules;
        for (const auto& r : greedy.rules) rules.insert(render_rule(r));
        check(rules == std::set<std::string>{"sigA > 0", "sigB < 1"} && greedy.rules.size() == 2,
              "greedy rules seed " + fmt(seed));
        const auto hybrid = induce_hybrid(cands, data, Task::host_host);
        const double mcc = evaluate_ruleset(hybrid, table, table.rows_in(Split::test)).mcc;
        worst_mcc = std::min(worst_mcc, mcc);
        check(mcc >= 0.9, "hybrid test MCC " + fmt(mcc) + " seed " + fmt(seed));
    }
    return "10 seeds, minimum hybrid test MCC " + fmt(worst_mcc);
}

// -- 5 ---------------------------------------------------------------------

std::string sparse_contracts(Check& check) {
    // Many noisy continuous signals so the cap binds along the path.
    std::vector<std::string> names;
    for (int k = 0; k < 24; ++k) names.push_back("s" + std::to_string(k));
    std::size_t max_selected = 0, sweeps = 0, candidates = 0;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        TableBuilder b(names);
        Rng rng(seed);
        for (int i = 0; i < 1200; ++i) {
            std::vector<double> row(names.size());
            for (auto& v : row) v = rng.normal();
            const double eta = row[0] - 0.8 * row[1] + 0.5 * row[2] * row[3] + 0.6 * rng.normal();
            const Split s = i < 800 ? Split::train : i < 1000 ? Split::validation : Split::test;
            b.add(s, eta > 0, std::move(row));
        }
        const auto data = InductionData::from(b.table);
        const auto cands = generate_candidates(data, ExclusionPolicy::defaults());
        candidates = std::max(candidates, cands.size());
        SparseConfig cfg;
        cfg.rule_cap = 60;
        SparseReport rep;
        const auto rs = induce_sparse_logistic(cands, data, Task::host_host, cfg, &rep);
        check(rs.rules.size() <= 60, "selected rule count " + fmt(rs.rules.size()));
        check(rep.path.at(rep.selected).nonzero <= 60, "selected lambda nonzero count");
        max_selected = std::max(max_selected, rs.rules.size());
        for (const auto& pt : rep.path) {
            for (std::size_t k = 1; k < pt.objective_trace.size(); ++k)
                check(pt.objective_trace[k] <= pt.objective_trace[k - 1] + 1e-10, "objective increased");
            sweeps += pt.objective_trace.size();
        }
        check(rep.path.front().nonzero == 0, "path starts empty at lambda_max");
    }

    Rng rng(4);
    std::vector<std::vector<double>> cols(6, std::vector<double>(300));
    std::vector<int> y(300);
    for (std::size_t i = 0; i < 300; ++i) {
        y[i] = rng.uniform01() < 0.4;
        for (auto& c : cols) c[i] = rng.normal() + (y[i] ? 0.6 : 0.0);
    }
    const double lmax = l1_lambda_max(cols, y);
    for (double f : {1.0, 1.01, 2.0, 100.0}) {
        const auto fit = fit_l1_logistic(cols, y, lmax * f, nullptr);
        check(std::all_of(fit.weights.begin(), fit.weights.end(), [](double w) { return w == 0.0; }),
              "non-empty fit at lambda >= lambda_max");
    }

    TableBuilder b({"informative", "n1", "n2", "n3"});
    Rng r2(17);
    for (int i = 0; i < 900; ++i) {
        const int label = r2.uniform01() < 0.5;
        const Split s = i < 600 ? Split::train : (i < 750 ? Split::validation : Split::test);
        b.add(s, label, {label + 0.1 * r2.uniform01(), r2.normal(), r2.normal(), r2.uniform01()});
    }
    const auto data = InductionData::from(b.table);
    const auto single = induce_sparse_logistic(generate_candidates(data, ExclusionPolicy::defaults()), data, Task::host_host);
    const double mcc = single.metrics.at("validation_mcc");
    check(mcc >= 0.99, "single-feature validation MCC " + fmt(mcc));
    return "up to " + fmt(candidates) + " candidates, max selected " + fmt(max_selected) + " rules, " + fmt(sweeps) +
           " sweeps monotone, single-feature MCC " + fmt(mcc);
}

// -- 6 ---------------------------------------------------------------------

std::string gradient_checks(Check& check) {
    double worst = 0.0;
    std::size_t n = 0;
    std::uint64_t seed = 100;
    for (const auto& c : all_gradient_cases()) {
        const double e = worst_gradient_error(c, 10, ++seed);
        worst = std::max(worst, e);
        ++n;
        check(e <= 1e-4, std::string(to_string(c.architecture)) + "/" + std::string(to_string(c.loss)) + "/" +
                             std::string(to_string(c.activation)) + " error " + fmt(e));
    }
    return fmt(n) + " combinations x 10 points, worst relative error " + fmt(worst);
}

// -- 7 ---------------------------------------------------------------------

std::string attribution_contracts(Check& check) {
    const BlockMap blocks{{"emb", 0, 4}, {"zacc", 4, 3}, {"eacc", 7, 2}};
    const auto groups = pair_feature_groups(blocks);
    Rng rng(51);
    const auto random_pair = [&] {
        std::vector<double> u(9), v(9);
        for (auto& x : u) x = rng.normal();
        for (auto& x : v) x = rng.normal();
        return pair_feature_vector(u, v).values;
    };
    std::vector<std::vector<double>> inst;
    for (int i = 0; i < 12; ++i) inst.push_back(random_pair());
    const auto base = random_pair();

    double worst_residual = 0.0;
    for (auto arch : {Architecture::two_tower, Architecture::pair_mlp}) {
        for (auto act : {Activation::relu, Activation::tanh}) {
            ModelSpec spec;
            spec.architecture = arch;
            spec.activation = act;
            spec.hidden = {8, 4};
            spec.tower_out = 4;
            spec.seed = 9;
            const auto model = build_model(spec, 36);
            const auto r = group_attribution(model, inst, groups, base);
            for (std::size_t i = 0; i < inst.size(); ++i) {
                double sum = 0.0;
                for (double v : r.per_instance[i]) sum += v;
                const double residual = std::abs(sum - (forward_score(model, inst[i]) - forward_score(model, base)));
                worst_residual = std::max(worst_residual, residual);
                check(residual <= 1e-8, "efficiency residual " + fmt(residual));
            }
            if (arch != Architecture::two_tower) continue;
            for (std::size_t g = 0; g < groups.size(); ++g)
                if (groups[g].name == "contrast" || groups[g].name == "concordance")
                    for (const auto& row : r.per_instance) check(row[g] == 0.0, groups[g].name + " attribution nonzero");
        }
    }

    const std::vector<FeatureGroup> toy{{"g0", {{0, 1}}}, {"g1", {{1, 3}}}, {"g2", {{3, 4}}}};
    const std::vector<double> b0{0.5, -1.0, 2.0, 0.0};
    const auto h0 = [](double a) { return 3 * a * a; };
    const auto h1 = [](double a, double b) { return std::sin(a) * b; };
    const auto h2 = [](double a) { return std::exp(a); };
    const ValueFunction additive = [&](std::span<const double> x) { return h0(x[0]) + h1(x[1], x[2]) + h2(x[3]); };
    std::vector<std::vector<double>> xs;
    for (int i = 0; i < 5; ++i) xs.push_back({rng.normal(), rng.normal(), rng.normal(), rng.normal()});
    const auto r = group_attribution(additive, xs, toy, b0);
    double worst_closed = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const auto& x = xs[i];
        const double want[3] = {h0(x[0]) - h0(b0[0]), h1(x[1], x[2]) - h1(b0[1], b0[2]), h2(x[3]) - h2(b0[3])};
        for (std::size_t g = 0; g < 3; ++g) worst_closed = std::max(worst_closed, std::abs(r.per_instance[i][g] - want[g]));
    }
    check(worst_closed <= 1e-10, "additive closed form deviation " + fmt(worst_closed));
    return "worst efficiency residual " + fmt(worst_residual) + ", additive deviation " + fmt(worst_closed);
}

// -- 8 ---------------------------------------------------------------------

std::string threshold_calibration(Check& check) {
    Rng rng(8);
    std::size_t mismatches = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + rng.uniform_index(60);
        std::vector<double> s(n);
        std::vector<int> y(n);
        const bool coarse = trial % 2 == 0;  // coarse scores produce ties
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = coarse ? std::round(rng.uniform01() * 10) / 10 : rng.uniform01();
            y[i] = rng.uniform01() < 0.45;
        }
        const auto got = tune_threshold(s, y);
        const auto want = threshold_reference(s, y);
        const bool same = std::abs(got.value - want.value) <= 1e-12 &&
                          std::abs(got.threshold - want.threshold) <= 1e-12 * std::max(1.0, std::abs(want.threshold));
        mismatches += !same;
    }
    check(mismatches == 0, fmt(mismatches) + " threshold mismatches");

    std::size_t worse = 0;
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> z(80);
        std::vector<int> y(80);
        const double spread = rng.uniform(0.1, 8.0);
        for (std::size_t i = 0; i < z.size(); ++i) {
            y[i] = rng.uniform01() < 0.5;
            z[i] = (y[i] ? 1.0 : -1.0) * spread * rng.uniform(-0.5, 1.5);
        }
        const double t = fit_temperature(z, y);
        worse += calibration_nll(z, y, t) > calibration_nll(z, y, 1.0) + 1e-4;
        check(t >= kMinTemperature && t <= kMaxTemperature, "temperature out of range");
    }
    check(worse == 0, fmt(worse) + " fits increased NLL");

    std::vector<double> z;
    std::vector<int> y;
    for (int i = 0; i < 40; ++i) {
        z.push_back(i % 2 ? 1.5 + 0.1 * i : -1.5 - 0.1 * i);
        y.push_back(i % 2);
    }
    const double t = fit_temperature(z, y);
    check(t == kMinTemperature, "separable fixture temperature " + fmt(t));
    return "1000 threshold scans matched, 200 temperature fits, separable T = " + fmt(t);
}

// -- 9 ---------------------------------------------------------------------

Rule rule(const std::string& text, double weight) { return parse_rule_text(text, weight); }

std::string reference_rulesets(Check& check) {
    RuleSet host;
    host.task = Task::host_host;
    host.strategy = Strategy::greedy;
    host.rules = {rule("comp_disjoint_known < 1", 1.0), rule("pfam_jaccard > 0", 1.0)};
    host.decision_threshold = 0.51;

    RuleSet pathogen;
    pathogen.task = Task::pathogen_host;
    pathogen.strategy = Strategy::sparse_logistic;
    pathogen.rules = {rule("absdiff_mean < 0.13", 3.1), rule("tar_in_mitochondrion > 0", 1.2),
                      rule("human_norm_emb > 7.7", -0.9)};
    pathogen.standardization.assign(3, Standardization{});
    pathogen.decision_threshold = 0.4;

    for (const auto* rs : {&host, &pathogen}) {
        const auto text = serialize_ruleset(*rs);
        const auto back = parse_ruleset(text);
        check(serialize_ruleset(back) == text, "serialization is not a fixed point");
        check(back.rules.size() == rs->rules.size() && back.decision_threshold == rs->decision_threshold,
              "parsed ruleset differs");
        for (std::size_t i = 0; i < std::min(back.rules.size(), rs->rules.size()); ++i)
            check(render_rule(back.rules[i]) == render_rule(rs->rules[i]) && back.rules[i].weight == rs->rules[i].weight,
                  "rule " + render_rule(rs->rules[i]));
    }
    const auto host_back = parse_ruleset(serialize_ruleset(host));
    const auto pos = score_ruleset(host_back, {{"comp_disjoint_known", 0.0}, {"pfam_jaccard", 0.2}});
    check(pos.positive && pos.score == 1.0, "host-host fixture must be positive with both votes");
    const auto half = score_ruleset(host_back, {{"comp_disjoint_known", 1.0}, {"pfam_jaccard", 0.2}});
    check(!half.positive && half.score == 0.5, "one vote of two stays below 0.51");

    const auto ph = parse_ruleset(serialize_ruleset(pathogen));
    const auto s = score_ruleset(ph, {{"absdiff_mean", 0.1}, {"tar_in_mitochondrion", 1.0}, {"human_norm_emb", 8.0}});
    check(std::abs(s.score - sigmoid(3.1 + 1.2 - 0.9)) <= 1e-15 && s.positive, "pathogen-host logistic score");
    const auto low = score_ruleset(ph, {{"absdiff_mean", 0.2}, {"tar_in_mitochondrion", 0.0}, {"human_norm_emb", 8.0}});
    check(std::abs(low.score - sigmoid(-0.9)) <= 1e-15 && !low.positive, "pathogen-host negative score");
    return "both rulesets round trip; host-host fixture score " + fmt(pos.score) + ", positive";
}

// -- 10 --------------------------------------------------------------------

std::map<std::string, std::string> run_pipeline(const fs::path& out, Check& check) {
    const auto config = synthetic("config.toml");
    for (const std::string cmd : {"split", "verify", "featurize", "induce", "train", "evaluate", "explain"}) {
        const auto r = run_cli({cmd, "--config", config, "--out", out.string()});
        check(r.code == 0, cmd + " exited " + fmt(r.code) + ": " + r.err.substr(0, 200));
    }
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(out)) {
        if (!e.is_regular_file()) continue;
        const auto rel = fs::relative(e.path(), out).generic_string();
        auto contents = text::read_file(e.path().string());
        if (rel.ends_with(".manifest.json")) {
            auto j = nlohmann::json::parse(contents);
            check(j.contains("duration_seconds"), rel + " lacks a duration");
            j.erase("duration_seconds");
            contents = j.dump();
        }
        files.emplace(rel, std::move(contents));
    }
    return files;
}

std::string end_to_end(Check& check) {
    const auto a = run_pipeline(scratch_dir("acceptance_run_a"), check);
    const auto b = run_pipeline(scratch_dir("acceptance_run_b"), check);
    check(a.size() == b.size(), "file sets differ");
    std::size_t differing = 0, manifests = 0;
    for (const auto& [name, contents] : a) {
        const auto it = b.find(name);
        const bool same = it != b.end() && it->second == contents;
        differing += !same;
        manifests += name.ends_with(".manifest.json");
        check(same, name + " differs between runs");
    }
    check(manifests == 7, fmt(manifests) + " manifests");
    check(a.count("attribution.json") && a.count("metrics.json") && a.count("ensemble.json"), "missing outputs");
    const auto metrics = nlohmann::json::parse(a.count("metrics.json") ? a.at("metrics.json") : "{}");
    std::string mcc = "n/a";
    if (metrics.contains("rows")) mcc = fmt(metrics["rows"][0]["metrics"]["mcc"].get<double>());
    return fmt(a.size()) + " files, " + fmt(differing) + " differ (manifests compared without duration), test MCC " +
           mcc;
}

}  // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "metrics oracle", 1.0, metrics_oracle},
        {2, "split/verify soundness", 30.0, split_soundness},
        {3, "ACC correctness", 0.0, acc_correctness},
        {4, "planted-rule recovery", 120.0, planted_recovery},
        {5, "sparse-logistic contracts", 0.0, sparse_contracts},
        {6, "gradient checks", 0.0, gradient_checks},
        {7, "attribution contracts", 0.0, attribution_contracts},
        {8, "threshold and calibration", 0.0, threshold_calibration},
        {9, "reference ruleset round trips", 0.0, reference_rulesets},
        {10, "end-to-end smoke", 300.0, end_to_end},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        Check check;
        std::string summary;
        const auto start = Clock::now();
        try {
            summary = c.body(check);
        } catch (const std::exception& e) {
            check(false, std::string("exception: ") + e.what());
        }
        const double seconds = std::chrono::duration<double>(Clock::now() - start).count();
        if (c.budget_seconds > 0) check(seconds < c.budget_seconds, "took " + fmt(seconds) + " s, budget " + fmt(c.budget_seconds) + " s");
        const bool ok = check.failures.empty();
        failed += !ok;
        std::cout << (ok ? "PASS" : "FAIL") << " [" << c.id << "] " << c.name << ": " << summary << " ("
                  << fmt(std::round(seconds * 1000) / 1000) << " s)\n";
        for (const auto& f : check.failures) std::cout << "     " << f << "\n";
    }
    std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " criteria passed\n";
    return failed == 0 ? 0 : 1;
}
