#include "pairforge/split.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "pairforge/rng.hpp"

namespace pairforge {

std::array<std::size_t, 3> largest_remainder_counts(std::size_t n, const std::array<double, 3>& ratios) {
    double sum = 0.0;
    for (double r : ratios) {
        if (!(r >= 0.0) || !std::isfinite(r)) throw Error(ErrorCode::InvalidConfig, "split ratios must be nonnegative");
        sum += r;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorCode::InvalidConfig, "split ratios must sum to 1");

    std::array<std::size_t, 3> counts{};
    std::array<double, 3> remainder{};
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        const double quota = ratios[i] * static_cast<double>(n);
        counts[i] = static_cast<std::size_t>(std::floor(quota));
        remainder[i] = quota - static_cast<double>(counts[i]);
        assigned += counts[i];
    }
    std::array<std::size_t, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return remainder[x] > remainder[y]; });
    for (std::size_t k = 0; assigned < n; k = (k + 1) % 3, ++assigned) ++counts[order[k]];
    return counts;
}

SplitAssignment assign_protein_ids(const std::vector<std::string>& ids, const std::array<double, 3>& ratios,
                                   std::uint64_t seed) {
    if (ids.size() < 3)
        throw Error(ErrorCode::TooFewProteins, "need at least 3 proteins, got " + std::to_string(ids.size()));
    const auto counts = largest_remainder_counts(ids.size(), ratios);

    std::vector<std::string> order = ids;
    Rng rng(seed);
    rng.shuffle(std::span<std::string>(order));

    SplitAssignment assignment;
    assignment.ratios = ratios;
    assignment.seed = seed;
    std::size_t pos = 0;
    for (std::size_t s = 0; s < 3; ++s) {
        for (std::size_t k = 0; k < counts[s]; ++k, ++pos) {
            if (!assignment.split_of.emplace(order[pos], static_cast<Split>(s)).second)
                throw Error(ErrorCode::DuplicateId, order[pos]);
        }
    }
    return assignment;
}

SplitAssignment assign_proteins(const std::vector<ProteinRecord>& proteins, const std::array<double, 3>& ratios,
                                std::uint64_t seed) {
    std::vector<std::string> ids;
    ids.reserve(proteins.size());
    for (const auto& p : proteins) ids.push_back(p.id());
    return assign_protein_ids(ids, ratios, seed);
}

Split route_split(const std::string& a, const std::string& b, const SplitAssignment& assignment) {
    const auto ia = assignment.split_of.find(a);
    if (ia == assignment.split_of.end()) throw Error(ErrorCode::UnknownProtein, a);
    const auto ib = assignment.split_of.find(b);
    if (ib == assignment.split_of.end()) throw Error(ErrorCode::UnknownProtein, b);
    return std::max(ia->second, ib->second);
}

DatasetBundle route_pairs(const std::vector<PairExample>& pairs, const SplitAssignment& assignment) {
    DatasetBundle bundle;
    bundle.seed = assignment.seed;
    for (const auto& p : pairs) bundle.pairs(route_split(p.a_id, p.b_id, assignment)).push_back(p);
    return bundle;
}

std::vector<PairExample> flatten(const DatasetBundle& bundle) {
    std::vector<PairExample> all;
    all.reserve(bundle.size());
    for (auto s : kAllSplits) all.insert(all.end(), bundle.pairs(s).begin(), bundle.pairs(s).end());
    return all;
}

// ---------------------------------------------------------------------------
// Negative synthesis

namespace {

constexpr std::size_t kMaxEnumeration = 20'000'000;

bool compartment_disjoint_known(const AnnotationBundle& ann, const std::string& a, const std::string& b) {
    const auto& ca = ann.of(a).compartments;
    const auto& cb = ann.of(b).compartments;
    if (ca.empty() || cb.empty()) return false;
    return std::none_of(ca.begin(), ca.end(), [&](Compartment c) { return cb.contains(c); });
}

struct SplitSampler {
    Split split;
    const SplitAssignment& assignment;
    const AnnotationBundle& annotations;
    const NegativeSynthesisConfig& cfg;
    const std::unordered_set<std::string>& known_positive;
    std::unordered_set<std::string>& taken;

    // Candidate pools: every protein routable to this split.
    std::vector<std::string> left;   // host-host: all pool; pathogen-host: pathogens
    std::vector<std::string> right;  // host-host: unused; pathogen-host: hosts

    Split split_of(const std::string& id) const { return assignment.split_of.at(id); }

    bool routable(const std::string& a, const std::string& b) const {
        return std::max(split_of(a), split_of(b)) == split;
    }

    // Filters shared by rejection sampling and enumeration.
    bool acceptable(const std::string& a, const std::string& b, const std::string& key) const {
        if (known_positive.contains(key) || taken.contains(key)) return false;
        if (cfg.require_compartment_disjoint && !compartment_disjoint_known(annotations, a, b)) return false;
        if (cfg.exclude_co_complex && cfg.co_complex.contains(key)) return false;
        return true;
    }

    PairExample make_pair(const std::string& a, const std::string& b) const {
        auto [ca, cb] = canonical_pair(a, b, cfg.task);
        return {std::move(ca), std::move(cb), Label::negative, "synthetic"};
    }

    std::size_t space_size() const {
        if (cfg.task == Task::host_host) return left.size() * (left.size() - (left.empty() ? 0 : 1)) / 2;
        return left.size() * right.size();
    }

    void sample(std::size_t target, Rng& rng, std::vector<PairExample>& out) {
        const bool pathogen_host = cfg.task == Task::pathogen_host;
        if (left.empty() || (pathogen_host ? right.empty() : left.size() < 2)) return;

        const std::size_t stall_limit = std::max<std::size_t>(10'000, 20 * target);
        std::size_t stalls = 0;
        while (out.size() < target && stalls < stall_limit) {
            const std::string* a;
            const std::string* b;
            if (pathogen_host) {
                a = &left[rng.uniform_index(left.size())];
                b = &right[rng.uniform_index(right.size())];
            } else {
                a = &left[rng.uniform_index(left.size())];
                b = &left[rng.uniform_index(left.size())];
                if (a == b) {
                    ++stalls;
                    continue;
                }
            }
            auto key = pair_key(*a, *b);
            if (!routable(*a, *b) || !acceptable(*a, *b, key)) {
                ++stalls;
                continue;
            }
            stalls = 0;
            taken.insert(std::move(key));
            out.push_back(make_pair(*a, *b));
        }
        if (out.size() >= target || space_size() > kMaxEnumeration) return;

        // Rejection stalled: enumerate what is left and draw without replacement.
        std::vector<std::pair<const std::string*, const std::string*>> remaining;
        if (pathogen_host) {
            for (const auto& a : left)
                for (const auto& b : right)
                    if (routable(a, b) && acceptable(a, b, pair_key(a, b))) remaining.emplace_back(&a, &b);
        } else {
            for (std::size_t i = 0; i < left.size(); ++i)
                for (std::size_t j = i + 1; j < left.size(); ++j)
                    if (routable(left[i], left[j]) && acceptable(left[i], left[j], pair_key(left[i], left[j])))
                        remaining.emplace_back(&left[i], &left[j]);
        }
        for (std::size_t k = 0; k < remaining.size() && out.size() < target; ++k) {
            const std::size_t j = k + static_cast<std::size_t>(rng.uniform_index(remaining.size() - k));
            std::swap(remaining[k], remaining[j]);
            const auto [a, b] = remaining[k];
            taken.insert(pair_key(*a, *b));
            out.push_back(make_pair(*a, *b));
        }
    }
};

}  // namespace

NegativeSynthesisReport synthesize_negatives_report(const DatasetBundle& positives,
                                                    const SplitAssignment& assignment,
                                                    const AnnotationBundle& annotations,
                                                    const NegativeSynthesisConfig& cfg) {
    if (!(cfg.ratio > 0.0) || !std::isfinite(cfg.ratio))
        throw Error(ErrorCode::InvalidConfig, "negative ratio must be positive");

    std::unordered_set<std::string> known_positive;
    for (auto s : kAllSplits)
        for (const auto& p : positives.pairs(s)) {
            if (p.label != Label::positive) continue;
            route_split(p.a_id, p.b_id, assignment);  // UNKNOWN_PROTEIN check
            known_positive.insert(pair_key(p.a_id, p.b_id));
        }
    std::unordered_set<std::string> taken;
    for (auto s : kAllSplits)
        for (const auto& p : positives.pairs(s))
            if (p.label == Label::negative) taken.insert(pair_key(p.a_id, p.b_id));

    NegativeSynthesisReport report;
    report.bundle = positives;
    for (auto s : kAllSplits) {
        const auto idx = static_cast<std::size_t>(s);
        const std::size_t positives_here = positives.class_counts(s).positives;
        const auto target =
            static_cast<std::size_t>(std::ceil(cfg.ratio * static_cast<double>(positives_here) - 1e-9));
        report.requested[idx] = target;
        if (target == 0) continue;

        SplitSampler sampler{s, assignment, annotations, cfg, known_positive, taken, {}, {}};
        for (const auto& [id, split] : assignment.split_of) {
            if (split > s) continue;
            if (cfg.task == Task::host_host) {
                sampler.left.push_back(id);
                continue;
            }
            const auto role = cfg.roles.find(id);
            if (role == cfg.roles.end()) throw Error(ErrorCode::UnknownProtein, "no role recorded for " + id);
            (role->second == Role::pathogen ? sampler.left : sampler.right).push_back(id);
        }

        Rng rng(derive_seed(cfg.seed, "negatives/" + std::string(to_string(s))));
        std::vector<PairExample> drawn;
        sampler.sample(target, rng, drawn);
        report.achieved[idx] = drawn.size();
        if (drawn.size() < target) report.exhausted = true;
        auto& dest = report.bundle.pairs(s);
        dest.insert(dest.end(), std::make_move_iterator(drawn.begin()), std::make_move_iterator(drawn.end()));
    }
    return report;
}

DatasetBundle synthesize_negatives(const DatasetBundle& positives, const SplitAssignment& assignment,
                                   const AnnotationBundle& annotations, const NegativeSynthesisConfig& cfg) {
    auto report = synthesize_negatives_report(positives, assignment, annotations, cfg);
    if (report.exhausted) {
        std::string detail = "candidate space exhausted; achieved";
        for (auto s : kAllSplits) {
            const auto i = static_cast<std::size_t>(s);
            const auto pos = positives.class_counts(s).positives;
            detail += " " + std::string(to_string(s)) + "=" + std::to_string(report.achieved[i]) + "/" +
                      std::to_string(report.requested[i]);
            if (pos > 0)
                detail += " (ratio " + std::to_string(static_cast<double>(report.achieved[i]) / pos) + ")";
        }
        throw Error(ErrorCode::InsufficientCandidates, detail);
    }
    return std::move(report.bundle);
}

// ---------------------------------------------------------------------------
// Fold planning

SplitAssignment FoldPlan::assignment_for(std::size_t fold) const {
    SplitAssignment a;
    a.seed = seed;
    const auto& entry = folds.at(fold);
    for (const auto& id : test) a.split_of.emplace(id, Split::test);
    for (const auto& id : entry.validation) a.split_of.emplace(id, Split::validation);
    for (const auto& id : entry.train) a.split_of.emplace(id, Split::train);
    const double n = static_cast<double>(a.split_of.size());
    if (n > 0) a.ratios = {entry.train.size() / n, entry.validation.size() / n, test.size() / n};
    return a;
}

FoldPlan make_fold_plan(const SplitAssignment& assignment, std::size_t folds, std::uint64_t seed) {
    if (folds < 2) throw Error(ErrorCode::TooFewFolds, "need K >= 2, got " + std::to_string(folds));
    FoldPlan plan;
    plan.seed = seed;
    std::vector<std::string> pool;
    for (const auto& [id, s] : assignment.split_of) {
        if (s == Split::test) plan.test.insert(id);
        else pool.push_back(id);
    }
    if (pool.size() < folds)
        throw Error(ErrorCode::TooFewFolds, std::to_string(pool.size()) + " non-test proteins for " +
                                                std::to_string(folds) + " folds");
    Rng rng(seed);
    rng.shuffle(std::span<std::string>(pool));

    const std::size_t base = pool.size() / folds;
    const std::size_t extra = pool.size() % folds;
    std::vector<std::size_t> block_of(pool.size());
    std::size_t pos = 0;
    for (std::size_t k = 0; k < folds; ++k) {
        const std::size_t size = base + (k < extra ? 1 : 0);
        for (std::size_t i = 0; i < size; ++i) block_of[pos++] = k;
    }
    plan.folds.resize(folds);
    for (std::size_t k = 0; k < folds; ++k) {
        for (std::size_t i = 0; i < pool.size(); ++i) {
            (block_of[i] == k ? plan.folds[k].validation : plan.folds[k].train).insert(pool[i]);
        }
    }
    return plan;
}

DatasetBundle route_fold(const std::vector<PairExample>& pairs, const FoldPlan& plan, std::size_t fold) {
    return route_pairs(pairs, plan.assignment_for(fold));
}

}  // namespace pairforge
