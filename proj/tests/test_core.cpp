#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <atomic>
#include <cstdlib>

#include "pairforge/core.hpp"
#include "pairforge/parallel.hpp"
#include "pairforge/rng.hpp"
#include "pairforge/text.hpp"

using namespace pairforge;

TEST_CASE("canonical pair ordering") {
    CHECK(canonical_pair("Q9Y2", "P001", Task::host_host) == std::pair<std::string, std::string>{"P001", "Q9Y2"});
    CHECK(canonical_pair("VGP1", "P001", Task::pathogen_host) == std::pair<std::string, std::string>{"VGP1", "P001"});
    CHECK_THROWS_WITH(canonical_pair("P001", "P001", Task::host_host), doctest::Contains("SELF_PAIR"));
    CHECK(canonical_pair("P001", "P001", Task::host_host, true).first == "P001");

    for (auto [a, b] : {std::pair{"B", "A"}, std::pair{"A", "B"}, std::pair{"x1", "X1"}}) {
        const auto once = canonical_pair(a, b, Task::host_host);
        CHECK(canonical_pair(once.first, once.second, Task::host_host) == once);
        CHECK(canonical_pair(b, a, Task::host_host) == once);
    }
    CHECK(pair_key("A", "B") == pair_key("B", "A"));
    CHECK(pair_key("A", "B") != pair_key("A", "C"));
}

TEST_CASE("sequence validation") {
    CHECK(validate_sequence("acdE") == "ACDE");
    CHECK(validate_sequence("MKVX") == "MKVX");
    CHECK_THROWS_WITH(validate_sequence("AC1E"), doctest::Contains("ILLEGAL_RESIDUE"));
    CHECK_THROWS_WITH(validate_sequence("AC1E"), doctest::Contains("position 3"));
    CHECK_THROWS_WITH(validate_sequence("ACBE"), doctest::Contains("ILLEGAL_RESIDUE"));
    CHECK_THROWS_WITH(validate_sequence(""), doctest::Contains("EMPTY_SEQUENCE"));
    const auto once = validate_sequence("mkvlaa");
    CHECK(validate_sequence(once) == once);

    const ProteinRecord p("P1", Role::pathogen, "mkv");
    CHECK(p.sequence() == "MKV");
    CHECK(p.length() == 3);
    CHECK(p.role() == Role::pathogen);
}

TEST_CASE("enum names round trip") {
    for (auto s : kAllSplits) CHECK(parse_split(to_string(s)) == s);
    for (auto t : {Task::host_host, Task::pathogen_host}) CHECK(parse_task(to_string(t)) == t);
    for (auto r : {Role::host, Role::pathogen}) CHECK(parse_role(to_string(r)) == r);
    CHECK_THROWS_WITH(parse_task("plant_host"), doctest::Contains("BAD_FORMAT"));
}

TEST_CASE("rng is reproducible and derived seeds differ by stage") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
    CHECK(derive_seed(1, "split") != derive_seed(1, "negatives"));
    CHECK(derive_seed(1, "split") == derive_seed(1, "split"));
    CHECK(derive_seed(1, "split") != derive_seed(2, "split"));

    Rng r(7);
    std::vector<int> hits(5, 0);
    for (int i = 0; i < 5000; ++i) ++hits[r.uniform_index(5)];
    for (int h : hits) CHECK(h > 850);
    double sum = 0, sq = 0;
    for (int i = 0; i < 20000; ++i) {
        const double z = r.normal();
        sum += z;
        sq += z * z;
    }
    CHECK(sum / 20000 == doctest::Approx(0.0).epsilon(0.03).scale(1.0));
    CHECK(sq / 20000 == doctest::Approx(1.0).epsilon(0.03));
}

TEST_CASE("number formatting round trips") {
    for (double v : {0.1, 1.0 / 3.0, -0.9, 7.7, 1e-300, 123456789.0, 0.0}) {
        const auto s = text::format_double(v);
        CHECK(*text::parse_double(s) == v);
    }
    CHECK(text::format_double(0.51) == "0.51");
    CHECK(text::format_double(3.0) == "3");
    CHECK_FALSE(text::parse_double("abc").has_value());
    CHECK_FALSE(text::parse_double("1.5x").has_value());
    CHECK(text::split("a\tb\t", '\t').size() == 3);
    CHECK(text::trim("  x ") == "x");
}

TEST_CASE("parallel_for visits every index once for any worker count") {
    for (const char* threads : {"1", "3", "8"}) {
        setenv("PAIRFORGE_THREADS", threads, 1);
        std::vector<std::atomic<int>> seen(257);
        parallel_for(seen.size(), [&](std::size_t i) { seen[i].fetch_add(1); });
        for (auto& s : seen) CHECK(s.load() == 1);
    }
    setenv("PAIRFORGE_THREADS", "4", 1);
    CHECK_THROWS_AS(parallel_for(10, [](std::size_t i) {
                        if (i == 6) throw std::runtime_error("boom");
                    }),
                    std::runtime_error);
    unsetenv("PAIRFORGE_THREADS");
}
