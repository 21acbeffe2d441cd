#include <algorithm>
#include <cmath>
#include <numeric>

#include "pairforge/parallel.hpp"
#include "pairforge/rules.hpp"

namespace pairforge {

ExclusionPolicy ExclusionPolicy::defaults() {
    ExclusionPolicy p;
    for (const auto& s : missingness_signals()) p.excluded.insert(s);
    return p;
}

InductionData InductionData::from(const SignalTable& table) {
    InductionData d;
    d.table = &table;
    d.train = table.rows_in(Split::train);
    d.validation = table.rows_in(Split::validation);
    return d;
}

std::vector<int> InductionData::labels(std::span<const std::size_t> rows) const {
    std::vector<int> out;
    out.reserve(rows.size());
    for (auto i : rows) out.push_back(table->pairs[i].label == Label::positive ? 1 : 0);
    return out;
}

namespace {

// Linear interpolation between order statistics.
double quantile(const std::vector<double>& sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double firing_fraction(std::span<const double> values) {
    double fired = 0.0;
    for (double v : values) fired += v;
    return fired / static_cast<double>(values.size());
}

Rule term(RuleForm form, const std::string& signal, double threshold) {
    Rule r;
    r.form = form;
    r.signal = signal;
    r.threshold = threshold;
    return r;
}

double indicator_mcc(std::span<const double> values, std::span<const int> labels) {
    return classification_metrics(confusion_matrix(values, labels, 0.5)).mcc;
}

}  // namespace

std::vector<Rule> generate_candidates(const InductionData& data, const ExclusionPolicy& policy,
                                      const CandidateConfig& cfg) {
    if (!data.table || data.train.empty()) throw Error(ErrorCode::EmptyTraining, "no training rows");
    if (!(policy.broad_rule_cap > 0.0 && policy.broad_rule_cap <= 1.0))
        throw Error(ErrorCode::InvalidConfig, "broad-rule cap must be in (0, 1]");
    const auto& table = *data.table;

    std::vector<Rule> thresholded;
    std::vector<Rule> indicators;
    for (std::size_t c = 0; c < table.names.size(); ++c) {
        const auto& name = table.names[c];
        if (policy.exclude_enabled && policy.excluded.contains(name)) continue;

        std::vector<double> values;
        values.reserve(data.train.size());
        for (auto i : data.train) values.push_back(table.rows[i][c]);
        std::sort(values.begin(), values.end());
        std::vector<double> distinct = values;
        distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

        std::vector<double> thresholds;
        const bool binary = distinct.size() == 2 && distinct[0] == 0.0 && distinct[1] == 1.0;
        if (distinct.size() <= cfg.low_cardinality) {
            for (std::size_t k = 0; k + 1 < distinct.size(); ++k) thresholds.push_back(0.5 * (distinct[k] + distinct[k + 1]));
        } else {
            for (int q = 1; q <= 9; ++q) thresholds.push_back(quantile(values, q / 10.0));
            thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
        }

        for (double t : thresholds) {
            // {0,1} signals: "> 0" and "< 1" select the same pairs as "> 0.5" and "< 0.5".
            indicators.push_back(term(RuleForm::gt, name, binary ? 0.0 : t));
            indicators.push_back(term(RuleForm::lt, name, binary ? 1.0 : t));
            thresholded.push_back(term(RuleForm::hinge_pos, name, t));
            thresholded.push_back(term(RuleForm::hinge_neg, name, t));
        }
        thresholded.push_back(term(RuleForm::linear, name, 0.0));
    }
    std::sort(indicators.begin(), indicators.end());

    // Conjunctions over the indicators with the best single-rule training MCC.
    const auto labels = data.labels(data.train);
    std::vector<double> mcc(indicators.size());
    parallel_for(indicators.size(), [&](std::size_t k) {
        mcc[k] = indicator_mcc(evaluate_rule(indicators[k], table, data.train), labels);
    });
    std::vector<std::size_t> order(indicators.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return mcc[x] > mcc[y]; });
    order.resize(std::min(order.size(), cfg.conjunction_top_k));
    std::sort(order.begin(), order.end());

    std::vector<Rule> all = indicators;
    all.insert(all.end(), thresholded.begin(), thresholded.end());
    for (std::size_t x = 0; x < order.size(); ++x) {
        for (std::size_t y = x + 1; y < order.size(); ++y) {
            const auto& l = indicators[order[x]];
            const auto& r = indicators[order[y]];
            if (l.signal == r.signal) continue;
            Rule c = term(RuleForm::and2, l.signal, l.threshold);
            c.cmp = l.form == RuleForm::gt ? Cmp::gt : Cmp::lt;
            c.signal2 = r.signal;
            c.cmp2 = r.form == RuleForm::gt ? Cmp::gt : Cmp::lt;
            c.threshold2 = r.threshold;
            all.push_back(std::move(c));
        }
    }

    if (policy.cap_enabled) {
        std::vector<char> keep(all.size(), 1);
        parallel_for(all.size(), [&](std::size_t k) {
            if (!all[k].is_indicator()) return;
            keep[k] = firing_fraction(evaluate_rule(all[k], table, data.train)) <= policy.broad_rule_cap;
        });
        std::vector<Rule> kept;
        for (std::size_t k = 0; k < all.size(); ++k)
            if (keep[k]) kept.push_back(std::move(all[k]));
        all = std::move(kept);
    }
    std::sort(all.begin(), all.end());
    return all;
}

// ---------------------------------------------------------------------------
// Greedy forward selection

RuleSet induce_greedy(const std::vector<Rule>& candidates, const InductionData& data, Task task,
                      GreedyReport* report) {
    // Vote fractions are only meaningful over single-condition indicators.
    std::vector<const Rule*> pool;
    for (const auto& c : candidates)
        if (c.form == RuleForm::gt || c.form == RuleForm::lt) pool.push_back(&c);
    if (pool.empty()) throw Error(ErrorCode::EmptyCandidates, "no indicator candidates for greedy selection");
    if (data.validation.empty()) throw Error(ErrorCode::EmptySplit, "validation");
    const auto& table = *data.table;
    const auto val_labels = data.labels(data.validation);

    std::vector<std::vector<double>> fired(pool.size());
    parallel_for(pool.size(), [&](std::size_t k) { fired[k] = evaluate_rule(*pool[k], table, data.validation); });

    const std::size_t n = data.validation.size();
    std::vector<double> votes(n, 0.0);
    std::vector<char> used(pool.size(), 0);
    std::vector<std::size_t> chosen;
    double current = 0.0;  // empty set: constant score, MCC 0
    std::vector<ThresholdChoice> trial(pool.size());

    for (;;) {
        const double k = static_cast<double>(chosen.size() + 1);
        parallel_for(pool.size(), [&](std::size_t c) {
            if (used[c]) return;
            std::vector<double> scores(n);
            for (std::size_t i = 0; i < n; ++i) scores[i] = (votes[i] + fired[c][i]) / k;
            trial[c] = tune_threshold(scores, val_labels);
        });
        std::size_t best = pool.size();
        double best_mcc = current;
        for (std::size_t c = 0; c < pool.size(); ++c) {
            if (used[c]) continue;
            if (trial[c].value > best_mcc) {
                best_mcc = trial[c].value;
                best = c;
            }
        }
        if (best == pool.size()) break;
        used[best] = 1;
        chosen.push_back(best);
        for (std::size_t i = 0; i < n; ++i) votes[i] += fired[best][i];
        if (best_mcc < current) throw Error(ErrorCode::InvalidConfig, "greedy MCC decreased");
        current = best_mcc;
        if (report) report->step_validation_mcc.push_back(current);
        if (chosen.size() == pool.size()) break;
    }

    RuleSet rs;
    rs.task = task;
    rs.strategy = Strategy::greedy;
    for (auto c : chosen) {
        Rule r = *pool[c];
        r.weight = 1.0;
        rs.rules.push_back(std::move(r));
    }
    const auto val_scores = score_rows(rs, table, data.validation);
    const auto choice = tune_threshold(val_scores, val_labels);
    rs.decision_threshold = std::clamp(choice.threshold, 0.0, 1.0);
    rs.metrics["validation_mcc"] = evaluate_ruleset(rs, table, data.validation).mcc;
    if (!data.train.empty()) rs.metrics["train_mcc"] = evaluate_ruleset(rs, table, data.train).mcc;
    rs.provenance["candidate_count"] = std::to_string(candidates.size());
    rs.provenance["signal_count"] = std::to_string(table.names.size());
    return rs;
}

// ---------------------------------------------------------------------------
// Hybrid

RuleSet induce_hybrid(const std::vector<Rule>& candidates, const InductionData& data, Task task,
                      const SparseConfig& cfg, HybridReport* report) {
    HybridReport local;
    HybridReport& rep = report ? *report : local;
    try {
        rep.greedy = induce_greedy(candidates, data, task);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::EmptyCandidates) throw;
        rep.warnings.push_back(std::string("greedy skipped: ") + e.what());
    }
    try {
        rep.sparse = induce_sparse_logistic(candidates, data, task, cfg);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::EmptyCandidates || !rep.greedy) throw;
        rep.warnings.push_back(std::string("sparse_logistic skipped: ") + e.what());
    }
    if (!rep.greedy && !rep.sparse) throw Error(ErrorCode::EmptyCandidates, "both strategies failed");

    bool greedy_wins = true;
    if (!rep.greedy) {
        greedy_wins = false;
    } else if (rep.sparse) {
        const double g = rep.greedy->metrics.at("validation_mcc");
        const double s = rep.sparse->metrics.at("validation_mcc");
        if (s > g) greedy_wins = false;
        else if (s == g && rep.sparse->rules.size() < rep.greedy->rules.size()) greedy_wins = false;
    }
    rep.chosen = greedy_wins ? "greedy" : "sparse_logistic";
    RuleSet out = greedy_wins ? *rep.greedy : *rep.sparse;
    out.provenance["hybrid_choice"] = rep.chosen;
    for (std::size_t i = 0; i < rep.warnings.size(); ++i) out.provenance["warning_" + std::to_string(i)] = rep.warnings[i];
    return out;
}

}  // namespace pairforge
