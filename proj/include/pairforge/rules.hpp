#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "pairforge/core.hpp"
#include "pairforge/features.hpp"
#include "pairforge/metrics.hpp"

namespace pairforge {

enum class RuleForm { gt, lt, hinge_pos, hinge_neg, linear, and2 };
enum class Cmp { gt, lt };
enum class Strategy { greedy, sparse_logistic };

std::string_view to_string(RuleForm form) noexcept;
std::string_view to_string(Strategy strategy) noexcept;
RuleForm parse_rule_form(std::string_view text);
Strategy parse_strategy(std::string_view text);

// One interpretable term f_i of logit = bias + sum_i weight_i * f_i(signals).
struct Rule {
    RuleForm form = RuleForm::gt;
    std::string signal;
    double threshold = 0.0;
    // and2 only: [signal cmp threshold] AND [signal2 cmp2 threshold2]
    Cmp cmp = Cmp::gt;
    std::string signal2;
    Cmp cmp2 = Cmp::gt;
    double threshold2 = 0.0;
    double weight = 1.0;

    bool is_indicator() const noexcept {
        return form == RuleForm::gt || form == RuleForm::lt || form == RuleForm::and2;
    }
    double evaluate(double x, double y = 0.0) const noexcept;
    double evaluate(const SignalVector& signals) const;  // MISSING_SIGNAL

    // Ordering key: (signal, form, threshold, signal2, cmp2, threshold2).
    friend bool operator<(const Rule& l, const Rule& r);
    // Structural equality ignoring weight.
    bool same_term(const Rule& other) const;
};

// "sig > t", "sig < t", "max(0, sig - t)", "max(0, t - sig)", "sig",
// "a > t1 and b < t2".
std::string render_rule(const Rule& rule);
Rule parse_rule_text(std::string_view text, double weight = 1.0);

struct Standardization {
    double mean = 0.0;
    double scale = 1.0;
};

struct RuleSet {
    Task task = Task::host_host;
    Strategy strategy = Strategy::greedy;
    double bias = 0.0;
    std::vector<Rule> rules;
    double decision_threshold = 0.5;
    // Aligned with rules when strategy == sparse_logistic; empty otherwise.
    std::vector<Standardization> standardization;
    std::map<std::string, double> metrics;
    std::uint64_t seed = 0;
    std::string config_digest;
    std::map<std::string, std::string> provenance;
};

struct RuleScore {
    double score = 0.0;
    bool positive = false;
};

// greedy: vote fraction sum(f_i) / n_rules, clamped to [0, 1];
// sparse_logistic: sigmoid(bias + sum w_i * (f_i - mean_i) / scale_i);
// no rules: sigmoid(bias). Positive iff score > decision_threshold.
RuleScore score_ruleset(const RuleSet& rs, const SignalVector& signals);

std::string score_semantics(Strategy strategy);

nlohmann::ordered_json ruleset_to_json(const RuleSet& rs);
std::string serialize_ruleset(const RuleSet& rs);
// Validates signal names against `registry` (default: known_signal_names()).
RuleSet parse_ruleset(std::string_view json_text, const std::set<std::string>* registry = nullptr);
// Tabular form: "rule<TAB>weight<TAB>interpretation" rows after '#' header lines.
std::string render_ruleset_text(const RuleSet& rs);

// ---------------------------------------------------------------------------
// Induction

struct ExclusionPolicy {
    std::set<std::string> excluded;  // default: missingness proxies
    double broad_rule_cap = 0.90;    // max training firing fraction for indicators
    bool exclude_enabled = true;
    bool cap_enabled = true;

    static ExclusionPolicy defaults();
};

struct CandidateConfig {
    std::size_t low_cardinality = 10;  // <= this many distinct values: midpoints
    std::size_t conjunction_top_k = 20;
};

// Column view of a signal table restricted to train/validation rows.
struct InductionData {
    const SignalTable* table = nullptr;
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;

    static InductionData from(const SignalTable& table);
    std::vector<int> labels(std::span<const std::size_t> rows) const;
};

std::vector<Rule> generate_candidates(const InductionData& data, const ExclusionPolicy& policy,
                                      const CandidateConfig& cfg = {});

// Rule values on the given rows of the table.
std::vector<double> evaluate_rule(const Rule& rule, const SignalTable& table, std::span<const std::size_t> rows);

struct GreedyReport {
    std::vector<double> step_validation_mcc;  // after each accepted rule
};

RuleSet induce_greedy(const std::vector<Rule>& candidates, const InductionData& data, Task task,
                      GreedyReport* report = nullptr);

struct SparseConfig {
    std::size_t rule_cap = 60;
    std::size_t path_length = 50;
    double lambda_min_ratio = 1e-3;
    double tolerance = 1e-6;
    std::size_t max_sweeps = 10'000;
    // Stop descending the path once this many consecutive lambdas exceed the cap.
    std::size_t over_cap_patience = 3;
};

struct LambdaPoint {
    double lambda = 0.0;
    std::size_t nonzero = 0;
    double validation_mcc = 0.0;
    double validation_threshold = 0.5;
    std::size_t sweeps = 0;
    bool converged = false;
    bool eligible = false;
    std::vector<double> objective_trace;  // objective after every sweep
};

struct SparseReport {
    double lambda_max = 0.0;
    std::vector<LambdaPoint> path;
    std::size_t selected = 0;
    std::size_t columns_used = 0;  // after dropping constant columns
};

RuleSet induce_sparse_logistic(const std::vector<Rule>& candidates, const InductionData& data, Task task,
                               const SparseConfig& cfg = {}, SparseReport* report = nullptr);

// Standalone L1-penalised logistic regression by cyclic coordinate descent.
// Columns are expected standardised. Objective:
//   mean(softplus(eta) - y * eta) + lambda * ||w||_1, eta = bias + X w.
struct L1Fit {
    std::vector<double> weights;
    double bias = 0.0;
    std::vector<double> objective_trace;
    std::size_t sweeps = 0;
    bool converged = false;
};

L1Fit fit_l1_logistic(const std::vector<std::vector<double>>& columns, std::span<const int> labels, double lambda,
                      const L1Fit* warm_start, double tolerance = 1e-6, std::size_t max_sweeps = 10'000);

double l1_logistic_objective(const std::vector<std::vector<double>>& columns, std::span<const int> labels,
                             const L1Fit& fit, double lambda);

// Smallest lambda at which every weight is zero.
double l1_lambda_max(const std::vector<std::vector<double>>& columns, std::span<const int> labels);

struct HybridReport {
    std::optional<RuleSet> greedy;
    std::optional<RuleSet> sparse;
    std::vector<std::string> warnings;
    std::string chosen;  // "greedy" or "sparse_logistic"
};

// Runs both strategies; keeps the higher validation MCC, then fewer rules, then greedy.
RuleSet induce_hybrid(const std::vector<Rule>& candidates, const InductionData& data, Task task,
                      const SparseConfig& cfg = {}, HybridReport* report = nullptr);

// score_ruleset over table rows.
std::vector<double> score_rows(const RuleSet& rs, const SignalTable& table, std::span<const std::size_t> rows);

// Metrics of a ruleset on the given rows, at its decision threshold.
MetricsRecord evaluate_ruleset(const RuleSet& rs, const SignalTable& table, std::span<const std::size_t> rows);

}  // namespace pairforge
