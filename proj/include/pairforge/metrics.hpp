#pragma once

#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "pairforge/core.hpp"

namespace pairforge {

struct MetricsRecord {
    double accuracy = 0.0;
    double recall = 0.0;
    double precision = 0.0;
    double f1 = 0.0;
    double specificity = 0.0;
    double mcc = 0.0;
    ConfusionMatrix cm;
};

// prediction = 1 iff score > threshold
ConfusionMatrix confusion_matrix(std::span<const double> scores, std::span<const int> labels, double threshold);

// Zero denominators yield 0 for precision, recall, specificity, F1 and MCC.
MetricsRecord classification_metrics(const ConfusionMatrix& cm);

enum class Objective { mcc, f1, accuracy };
Objective parse_objective(std::string_view text);
double objective_value(const MetricsRecord& m, Objective objective);

struct ThresholdChoice {
    double threshold = 0.5;
    double value = 0.0;
};

// Candidates: below the minimum, midpoints of consecutive distinct sorted
// scores, above the maximum. Ties go to the smallest threshold.
ThresholdChoice tune_threshold(std::span<const double> scores, std::span<const int> labels,
                               Objective objective = Objective::mcc);

// The candidate list tune_threshold scans, ascending.
std::vector<double> threshold_candidates(std::span<const double> scores);

double sigmoid(double z) noexcept;
// log(1 + exp(z)) without overflow.
double softplus(double z) noexcept;

// Mean negative log-likelihood of sigmoid(logit / T).
double calibration_nll(std::span<const double> logits, std::span<const int> labels, double temperature);

inline constexpr double kMinTemperature = 0.05;
inline constexpr double kMaxTemperature = 20.0;

// 200-point log grid on [0.05, 20] then 40 bisection steps on dNLL/dT inside
// the bracket around the best grid point. Returns 1.0 when T = 1 is already
// optimal to within 1e-12.
double fit_temperature(std::span<const double> logits, std::span<const int> labels);

nlohmann::ordered_json to_json(const MetricsRecord& m);
// Header + one row; the `evaluate` TSV layout.
std::string metrics_tsv(const MetricsRecord& m, const std::string& row_name);

}  // namespace pairforge
