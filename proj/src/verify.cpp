#include "pairforge/verify.hpp"

#include <cmath>
#include <map>
#include <unordered_map>

namespace pairforge {

std::size_t VerificationReport::error_count() const {
    std::size_t n = 0;
    for (const auto& v : violations) n += v.severity == Severity::error;
    return n;
}

std::size_t VerificationReport::warning_count() const { return violations.size() - error_count(); }

namespace {

std::optional<Split> lookup(const SplitAssignment& assignment, const std::string& id) {
    const auto it = assignment.split_of.find(id);
    if (it == assignment.split_of.end()) return std::nullopt;
    return it->second;
}

std::string describe(const PairExample& p) {
    return p.a_id + "/" + p.b_id + " (label " + (p.label == Label::positive ? "1" : "0") + ")";
}

}  // namespace

VerificationReport verify_bundle(const DatasetBundle& bundle, const SplitAssignment& assignment,
                                 const VerifyTolerances& tolerances) {
    VerificationReport report;
    auto add = [&](std::string code, Severity sev, std::optional<Split> split, std::string details,
                   const PairExample* p = nullptr) {
        report.violations.push_back(
            {std::move(code), sev, split, std::move(details), p ? p->a_id : "", p ? p->b_id : ""});
    };

    // LEAKAGE: a pair may only touch proteins whose split is at or below its own.
    for (auto s : kAllSplits) {
        for (const auto& p : bundle.pairs(s)) {
            for (const auto* id : {&p.a_id, &p.b_id}) {
                const auto where = lookup(assignment, *id);
                if (where && *where > s) {
                    add("LEAKAGE", Severity::error, s,
                        std::string(to_string(s)) + " pair " + describe(p) + " touches " +
                            std::string(to_string(*where)) + " protein " + *id,
                        &p);
                }
            }
        }
    }

    // IMBALANCE
    for (auto s : kAllSplits) {
        const auto counts = bundle.class_counts(s);
        report.summary[static_cast<std::size_t>(s)].counts = counts;
        if (counts.total() == 0) continue;
        const double imbalance =
            std::abs(static_cast<double>(counts.positives) - static_cast<double>(counts.negatives)) /
            static_cast<double>(counts.total());
        if (imbalance > tolerances.imbalance) {
            add("IMBALANCE", Severity::error, s,
                std::to_string(counts.positives) + " positives vs " + std::to_string(counts.negatives) +
                    " negatives (imbalance " + std::to_string(imbalance) + " > " +
                    std::to_string(tolerances.imbalance) + ")");
        }
    }

    // DUPLICATE_PAIR / CONFLICTING_LABEL, over the whole bundle.
    {
        std::unordered_map<std::string, std::pair<const PairExample*, Split>> first_seen;
        for (auto s : kAllSplits) {
            for (const auto& p : bundle.pairs(s)) {
                const auto key = pair_key(p.a_id, p.b_id);
                const auto [it, inserted] = first_seen.emplace(key, std::make_pair(&p, s));
                if (inserted) continue;
                const auto& [prev, prev_split] = it->second;
                const bool conflict = prev->label != p.label;
                add(conflict ? "CONFLICTING_LABEL" : "DUPLICATE_PAIR", Severity::error, s,
                    describe(p) + " also present in " + std::string(to_string(prev_split)) + " as " +
                        describe(*prev),
                    &p);
            }
        }
    }

    // OVERREPRESENTATION
    for (auto s : kAllSplits) {
        const auto& pairs = bundle.pairs(s);
        if (pairs.empty()) continue;
        std::map<std::string, std::size_t> occurrences;
        for (const auto& p : pairs) {
            ++occurrences[p.a_id];
            if (p.b_id != p.a_id) ++occurrences[p.b_id];
        }
        auto& summary = report.summary[static_cast<std::size_t>(s)];
        for (const auto& [id, n] : occurrences) {
            const double share = static_cast<double>(n) / static_cast<double>(pairs.size());
            if (share > summary.max_protein_share) {
                summary.max_protein_share = share;
                summary.max_protein = id;
            }
            if (share > tolerances.overrepresentation) {
                add("OVERREPRESENTATION", Severity::warning, s,
                    "protein " + id + " occurs in " + std::to_string(n) + " of " + std::to_string(pairs.size()) +
                        " pairs (share " + std::to_string(share) + ")");
            }
        }
    }

    // UNKNOWN_PROTEIN
    for (auto s : kAllSplits) {
        for (const auto& p : bundle.pairs(s)) {
            for (const auto* id : {&p.a_id, &p.b_id}) {
                if (!lookup(assignment, *id))
                    add("UNKNOWN_PROTEIN", Severity::error, s, "pair " + describe(p) + " references unknown " + *id,
                        &p);
            }
        }
    }
    return report;
}

nlohmann::ordered_json to_json(const VerificationReport& report) {
    nlohmann::ordered_json j;
    j["passes"] = report.passes();
    j["errors"] = report.error_count();
    j["warnings"] = report.warning_count();
    auto& summary = j["summary"];
    for (auto s : kAllSplits) {
        const auto& sm = report.summary[static_cast<std::size_t>(s)];
        nlohmann::ordered_json e;
        e["positives"] = sm.counts.positives;
        e["negatives"] = sm.counts.negatives;
        e["max_protein_share"] = sm.max_protein_share;
        e["max_protein"] = sm.max_protein;
        summary[std::string(to_string(s))] = e;
    }
    auto violations = nlohmann::ordered_json::array();
    for (const auto& v : report.violations) {
        nlohmann::ordered_json e;
        e["code"] = v.code;
        e["severity"] = v.severity == Severity::error ? "error" : "warning";
        e["split"] = v.split ? std::string(to_string(*v.split)) : "";
        e["details"] = v.details;
        if (!v.a_id.empty()) {
            e["a_id"] = v.a_id;
            e["b_id"] = v.b_id;
        }
        violations.push_back(std::move(e));
    }
    j["violations"] = std::move(violations);
    return j;
}

}  // namespace pairforge
