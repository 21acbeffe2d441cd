#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>
#include <sstream>

#include "pairforge/split.hpp"
#include "pairforge/verify.hpp"
#include "support/synthetic.hpp"

using namespace pairforge;
using pairforge::testing::protein_ids;
using pairforge::testing::random_positive_pairs;

namespace {

const std::array<double, 3> kRatios{0.7, 0.1, 0.2};

SplitAssignment manual(std::vector<std::pair<std::string, Split>> entries) {
    SplitAssignment a;
    for (auto& [id, s] : entries) a.split_of[id] = s;
    return a;
}

// Re-scan: train pairs only touch train proteins, validation pairs no test protein.
bool routing_sound(const DatasetBundle& b, const SplitAssignment& a) {
    for (const auto& p : b.pairs(Split::train))
        if (a.split_of.at(p.a_id) != Split::train || a.split_of.at(p.b_id) != Split::train) return false;
    for (const auto& p : b.pairs(Split::validation))
        if (a.split_of.at(p.a_id) == Split::test || a.split_of.at(p.b_id) == Split::test) return false;
    return true;
}

}  // namespace

TEST_CASE("protein assignment counts and determinism") {
    const auto ids = protein_ids(10);
    const auto a = assign_protein_ids(ids, kRatios, 1);
    CHECK(a.counts() == std::array<std::size_t, 3>{7, 1, 2});
    CHECK(largest_remainder_counts(1000, kRatios) == std::array<std::size_t, 3>{700, 100, 200});
    CHECK(largest_remainder_counts(7, kRatios) == std::array<std::size_t, 3>{5, 1, 1});

    const auto ids1000 = protein_ids(1000);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto s = assign_protein_ids(ids1000, kRatios, seed);
        CHECK(s.counts() == std::array<std::size_t, 3>{700, 100, 200});
        CHECK(s.split_of.size() == 1000);
    }
    CHECK(assign_protein_ids(ids1000, kRatios, 3).split_of == assign_protein_ids(ids1000, kRatios, 3).split_of);
    CHECK(assign_protein_ids(ids1000, kRatios, 3).split_of != assign_protein_ids(ids1000, kRatios, 4).split_of);
    CHECK_THROWS_WITH(assign_protein_ids(protein_ids(2), kRatios, 1), doctest::Contains("TOO_FEW_PROTEINS"));
    CHECK_THROWS_WITH(assign_protein_ids(ids, {0.5, 0.1, 0.1}, 1), doctest::Contains("INVALID_CONFIG"));

    std::vector<ProteinRecord> recs;
    for (const auto& id : ids) recs.emplace_back(id, Role::host, "MKV");
    CHECK(assign_proteins(recs, kRatios, 1).split_of == a.split_of);
}

TEST_CASE("pair routing") {
    const auto a = manual({{"A", Split::train}, {"B", Split::train}, {"H", Split::validation},
                           {"I", Split::test}, {"J", Split::test}});
    CHECK(route_split("A", "I", a) == Split::test);
    CHECK(route_split("A", "H", a) == Split::validation);
    CHECK(route_split("H", "J", a) == Split::test);
    CHECK(route_split("A", "B", a) == Split::train);
    const std::vector<PairExample> pairs{{"A", "B", Label::positive, ""}, {"A", "H", Label::positive, ""},
                                         {"A", "I", Label::positive, ""}};
    const auto b = route_pairs(pairs, a);
    CHECK(b.pairs(Split::train).size() == 1);
    CHECK(b.pairs(Split::validation).size() == 1);
    CHECK(b.pairs(Split::test).size() == 1);
    CHECK_THROWS_WITH(route_pairs({{"A", "Z", Label::positive, ""}}, a), doctest::Contains("UNKNOWN_PROTEIN"));
}

TEST_CASE("negative synthesis") {
    Rng rng(3);
    const auto ids = protein_ids(200);
    const auto assignment = assign_protein_ids(ids, kRatios, 9);
    const auto positives = route_pairs(random_positive_pairs(ids, 600, rng), assignment);
    NegativeSynthesisConfig cfg;
    cfg.seed = 11;
    const auto bundle = synthesize_negatives(positives, assignment, {}, cfg);
    std::set<std::string> pos_keys;
    for (const auto& p : flatten(positives)) pos_keys.insert(pair_key(p.a_id, p.b_id));
    for (auto s : kAllSplits) {
        const auto c = bundle.class_counts(s);
        CHECK(c.positives == positives.pairs(s).size());
        CHECK(c.negatives == c.positives);
        for (const auto& p : bundle.pairs(s))
            if (p.label == Label::negative) {
                CHECK_FALSE(pos_keys.contains(pair_key(p.a_id, p.b_id)));
                CHECK(route_split(p.a_id, p.b_id, assignment) == s);
            }
    }
    CHECK(routing_sound(bundle, assignment));
    CHECK(verify_bundle(bundle, assignment).passes());
    CHECK(flatten(synthesize_negatives(positives, assignment, {}, cfg)) == flatten(bundle));

    NegativeSynthesisConfig half = cfg;
    half.ratio = 0.5;
    const auto hb = synthesize_negatives(positives, assignment, {}, half);
    CHECK(hb.class_counts(Split::train).negatives ==
          static_cast<std::size_t>(std::ceil(0.5 * static_cast<double>(positives.pairs(Split::train).size()))));
}

TEST_CASE("negative synthesis on four proteins matches enumeration") {
    const auto a = manual({{"A", Split::train}, {"B", Split::train}, {"C", Split::train}, {"D", Split::train}});
    const auto pos = route_pairs({{"A", "B", Label::positive, ""}}, a);
    const std::set<std::string> allowed{pair_key("A", "C"), pair_key("A", "D"), pair_key("B", "C"),
                                        pair_key("B", "D"), pair_key("C", "D")};
    std::set<std::string> drawn;
    for (std::uint64_t seed = 0; seed < 60; ++seed) {
        NegativeSynthesisConfig cfg;
        cfg.seed = seed;
        const auto b = synthesize_negatives(pos, a, {}, cfg);
        REQUIRE(b.pairs(Split::train).size() == 2);
        const auto& n = b.pairs(Split::train)[1].label == Label::negative ? b.pairs(Split::train)[1]
                                                                          : b.pairs(Split::train)[0];
        CHECK(n.label == Label::negative);
        CHECK(allowed.contains(pair_key(n.a_id, n.b_id)));
        drawn.insert(pair_key(n.a_id, n.b_id));
        CHECK(flatten(synthesize_negatives(pos, a, {}, cfg)) == flatten(b));
    }
    // Uniform over the candidates: all five show up across seeds.
    CHECK(drawn == allowed);
}

TEST_CASE("negative synthesis filters") {
    const auto ids = protein_ids(30);
    const auto assignment = assign_protein_ids(ids, kRatios, 2);
    Rng rng(8);
    const auto positives = route_pairs(random_positive_pairs(ids, 20, rng), assignment);

    AnnotationBundle same;
    for (const auto& id : ids) same.proteins[id].compartments = {Compartment::cytoplasm};
    NegativeSynthesisConfig cfg;
    cfg.require_compartment_disjoint = true;
    CHECK_THROWS_WITH(synthesize_negatives(positives, assignment, same, cfg), doctest::Contains("INSUFFICIENT_CANDIDATES"));
    const auto report = synthesize_negatives_report(positives, assignment, same, cfg);
    CHECK(report.exhausted);
    CHECK(report.achieved[0] == 0);

    // Co-complex filter: forbid every train candidate but one.
    const auto a = manual({{"A", Split::train}, {"B", Split::train}, {"C", Split::train}, {"D", Split::train}});
    const auto pos = route_pairs({{"A", "B", Label::positive, ""}}, a);
    NegativeSynthesisConfig cc;
    cc.exclude_co_complex = true;
    cc.co_complex = {pair_key("A", "C"), pair_key("A", "D"), pair_key("B", "C"), pair_key("B", "D")};
    const auto b = synthesize_negatives(pos, a, {}, cc);
    for (const auto& p : b.pairs(Split::train))
        if (p.label == Label::negative) CHECK(pair_key(p.a_id, p.b_id) == pair_key("C", "D"));
}

TEST_CASE("pathogen-host negatives pair a pathogen with a host") {
    std::vector<std::string> ids;
    NegativeSynthesisConfig cfg;
    cfg.task = Task::pathogen_host;
    std::vector<PairExample> pairs;
    for (int i = 0; i < 20; ++i) {
        ids.push_back("V" + std::to_string(i));
        ids.push_back("H" + std::to_string(i));
        cfg.roles["V" + std::to_string(i)] = Role::pathogen;
        cfg.roles["H" + std::to_string(i)] = Role::host;
        pairs.push_back({"V" + std::to_string(i), "H" + std::to_string((i * 7) % 20), Label::positive, ""});
    }
    const auto assignment = assign_protein_ids(ids, kRatios, 4);
    const auto b = synthesize_negatives(route_pairs(pairs, assignment), assignment, {}, cfg);
    for (const auto& p : flatten(b)) {
        CHECK(cfg.roles.at(p.a_id) == Role::pathogen);
        CHECK(cfg.roles.at(p.b_id) == Role::host);
    }
}

TEST_CASE("fold plans") {
    const auto ids = protein_ids(125);
    const auto assignment = assign_protein_ids(ids, {0.6, 0.2, 0.2}, 6);
    REQUIRE(assignment.counts()[2] == 25);
    const auto plan = make_fold_plan(assignment, 5, 13);
    REQUIRE(plan.folds.size() == 5);
    std::set<std::string> non_test;
    for (const auto& [id, s] : assignment.split_of)
        if (s != Split::test) non_test.insert(id);
    std::set<std::string> covered;
    for (std::size_t k = 0; k < 5; ++k) {
        const auto& f = plan.folds[k];
        CHECK(f.validation.size() == 20);
        for (const auto& id : f.validation) CHECK(covered.insert(id).second);
        std::set<std::string> uni = f.train;
        uni.insert(f.validation.begin(), f.validation.end());
        CHECK(uni == non_test);
        const auto fa = plan.assignment_for(k);
        CHECK(fa.proteins_in(Split::test) == assignment.proteins_in(Split::test));
    }
    CHECK(covered == non_test);

    Rng rng(1);
    const auto pairs = random_positive_pairs(ids, 300, rng);
    for (std::size_t k = 0; k < 5; ++k) {
        const auto b = route_fold(pairs, plan, k);
        CHECK(routing_sound(b, plan.assignment_for(k)));
        CHECK(b.pairs(Split::test) == route_pairs(pairs, assignment).pairs(Split::test));
    }
    CHECK_THROWS_WITH(make_fold_plan(assignment, 1, 1), doctest::Contains("TOO_FEW_FOLDS"));
    CHECK_THROWS_WITH(make_fold_plan(assign_protein_ids(protein_ids(5), kRatios, 1), 5, 1),
                      doctest::Contains("TOO_FEW_FOLDS"));
}

TEST_CASE("bundle and split manifest round trip") {
    Rng rng(4);
    const auto ids = protein_ids(60);
    const auto assignment = assign_protein_ids(ids, kRatios, 2);
    NegativeSynthesisConfig cfg;
    cfg.seed = 5;
    const auto bundle = synthesize_negatives(route_pairs(random_positive_pairs(ids, 120, rng), assignment), assignment, {}, cfg);

    std::stringstream tsv;
    write_bundle(tsv, bundle);
    const auto back = read_bundle(tsv);
    for (auto s : kAllSplits) CHECK(back.pairs(s) == bundle.pairs(s));
    std::stringstream again;
    write_bundle(again, back);
    CHECK(again.str() == tsv.str());

    const auto manifest = split_manifest_json(bundle, assignment);
    CHECK(manifest["protein_counts"]["train"] == 42);
    CHECK(manifest["pair_counts"]["test"]["negatives"] == bundle.class_counts(Split::test).negatives);
    const auto restored = assignment_from_manifest(nlohmann::json::parse(manifest.dump()));
    CHECK(restored.split_of == assignment.split_of);

    std::istringstream bad("a_id\tb_id\tlabel\tsplit\tsource\nP1\tP2\t1\tholdout\tx\n");
    CHECK_THROWS_WITH(read_bundle(bad), doctest::Contains("BAD_FORMAT"));
    auto twice = nlohmann::json::parse(manifest.dump());
    twice["proteins"]["test"].push_back(twice["proteins"]["train"][0]);
    CHECK_THROWS_WITH(assignment_from_manifest(twice), doctest::Contains("DUPLICATE_ID"));
}
