#pragma once

// Synthetic generators shared by unit and acceptance tests.

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "pairforge/core.hpp"
#include "pairforge/features.hpp"
#include "pairforge/ingest.hpp"
#include "pairforge/rng.hpp"

#ifndef PAIRFORGE_DATA_DIR
#define PAIRFORGE_DATA_DIR "data"
#endif

namespace pairforge::testing {

inline ScaleTable load_scale(const std::string& file) {
    std::ifstream in(std::string(PAIRFORGE_DATA_DIR) + "/scales/" + file);
    if (!in) throw Error(ErrorCode::IoError, file);
    return parse_scale_table(in, file);
}

inline DescriptorConfig default_descriptors() {
    DescriptorConfig cfg;
    cfg.zscale = load_scale("sandberg_z5.tsv");
    cfg.eisenberg = load_scale("eisenberg.tsv");
    return cfg;
}

inline std::string random_sequence(Rng& rng, std::size_t len) {
    static constexpr char kResidues[] = "ACDEFGHIKLMNPQRSTVWY";
    std::string s(len, 'A');
    for (auto& c : s) c = kResidues[rng.uniform_index(20)];
    return s;
}

inline std::vector<std::string> protein_ids(std::size_t n, const std::string& prefix = "P") {
    std::vector<std::string> ids;
    ids.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::string num = std::to_string(i);
        ids.push_back(prefix + std::string(5 - std::min<std::size_t>(5, num.size()), '0') + num);
    }
    return ids;
}

// Distinct unordered positive pairs over the given ids.
inline std::vector<PairExample> random_positive_pairs(const std::vector<std::string>& ids, std::size_t n, Rng& rng) {
    std::set<std::string> seen;
    std::vector<PairExample> out;
    while (out.size() < n) {
        const auto& a = ids[rng.uniform_index(ids.size())];
        const auto& b = ids[rng.uniform_index(ids.size())];
        if (a == b) continue;
        auto [x, y] = canonical_pair(a, b, Task::host_host);
        if (!seen.insert(pair_key(x, y)).second) continue;
        out.push_back({x, y, Label::positive, "synthetic_test"});
    }
    return out;
}

// Signal table with rows routed to train / validation / test in the given counts.
struct TableBuilder {
    SignalTable table;

    explicit TableBuilder(std::vector<std::string> names) { table.names = std::move(names); }

    void add(Split split, int label, std::vector<double> values) {
        const auto i = table.rows.size();
        table.pairs.push_back({"a" + std::to_string(i), "b" + std::to_string(i),
                               label ? Label::positive : Label::negative, "fixture"});
        table.splits.push_back(split);
        table.rows.push_back(std::move(values));
    }
};

enum class Planted { conjunction, single, exclusive_or };

// label = [sigA > 0 AND sigB < 1] (conjunction), [sigA > 0] (single) or
// sigA XOR sigB (exclusive_or); `noise` of labels flipped. Gaussian and binary
// nuisance signals carry no label information; without continuous nuisance
// every indicator fits in the conjunction top-K.
inline SignalTable planted_table(std::uint64_t seed, Planted kind, double noise, std::size_t n_train = 1000,
                                 std::size_t n_val = 300, std::size_t n_test = 300, bool continuous_noise = true) {
    std::vector<std::string> names{"sigA", "sigB", "noise_c1", "noise_c2", "noise_c3", "noise_b1", "noise_b2"};
    if (!continuous_noise) names = {"sigA", "sigB", "noise_b1", "noise_b2"};
    TableBuilder b(names);
    Rng rng(seed);
    const auto emit = [&](Split s, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) {
            const double a = rng.uniform01() < 0.5 ? 1.0 : 0.0;
            const double bb = rng.uniform01() < 0.5 ? 1.0 : 0.0;
            int label = 0;
            switch (kind) {
                case Planted::conjunction: label = a > 0 && bb < 1; break;
                case Planted::single: label = a > 0; break;
                case Planted::exclusive_or: label = (a > 0) != (bb > 0); break;
            }
            if (rng.uniform01() < noise) label = 1 - label;
            std::vector<double> row{a, bb};
            if (continuous_noise) {
                row.push_back(rng.normal());
                row.push_back(rng.normal());
                row.push_back(rng.uniform(0.0, 3.0));
            }
            row.push_back(rng.uniform01() < 0.5 ? 1.0 : 0.0);
            row.push_back(rng.uniform01() < 0.3 ? 1.0 : 0.0);
            b.add(s, label, std::move(row));
        }
    };
    emit(Split::train, n_train);
    emit(Split::validation, n_val);
    emit(Split::test, n_test);
    return b.table;
}

inline std::set<std::string> planted_registry() {
    return {"sigA", "sigB", "noise_c1", "noise_c2", "noise_c3", "noise_b1", "noise_b2"};
}

}  // namespace pairforge::testing
