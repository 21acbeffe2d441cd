#include "pairforge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pairforge/text.hpp"

namespace pairforge {

namespace {

void check_inputs(std::size_t scores, std::size_t labels) {
    if (scores != labels)
        throw Error(ErrorCode::LengthMismatch, std::to_string(scores) + " scores vs " + std::to_string(labels) + " labels");
    if (scores == 0) throw Error(ErrorCode::EmptyInput, "no scores");
}

double ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

}  // namespace

ConfusionMatrix confusion_matrix(std::span<const double> scores, std::span<const int> labels, double threshold) {
    check_inputs(scores.size(), labels.size());
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!std::isfinite(scores[i])) throw Error(ErrorCode::NonFiniteValue, "score " + std::to_string(i));
        const bool predicted = scores[i] > threshold;
        const bool actual = labels[i] != 0;
        if (predicted && actual) ++cm.tp;
        else if (predicted) ++cm.fp;
        else if (actual) ++cm.fn;
        else ++cm.tn;
    }
    return cm;
}

MetricsRecord classification_metrics(const ConfusionMatrix& cm) {
    if (cm.total() == 0) throw Error(ErrorCode::EmptyMatrix, "confusion matrix is empty");
    const double tp = static_cast<double>(cm.tp), fp = static_cast<double>(cm.fp);
    const double tn = static_cast<double>(cm.tn), fn = static_cast<double>(cm.fn);
    MetricsRecord m;
    m.cm = cm;
    m.accuracy = (tp + tn) / (tp + fp + tn + fn);
    m.recall = ratio(tp, tp + fn);
    m.precision = ratio(tp, tp + fp);
    m.f1 = ratio(2.0 * m.recall * m.precision, m.recall + m.precision);
    m.specificity = ratio(tn, tn + fp);
    const double marginals = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
    m.mcc = marginals == 0.0 ? 0.0 : (tp * tn - fp * fn) / std::sqrt(marginals);
    return m;
}

Objective parse_objective(std::string_view text) {
    if (text == "mcc") return Objective::mcc;
    if (text == "f1") return Objective::f1;
    if (text == "accuracy") return Objective::accuracy;
    throw Error(ErrorCode::InvalidConfig, "unknown objective '" + std::string(text) + "'");
}

double objective_value(const MetricsRecord& m, Objective objective) {
    switch (objective) {
        case Objective::mcc: return m.mcc;
        case Objective::f1: return m.f1;
        case Objective::accuracy: return m.accuracy;
    }
    return m.mcc;
}

std::vector<double> threshold_candidates(std::span<const double> scores) {
    std::vector<double> sorted(scores.begin(), scores.end());
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    std::vector<double> out;
    if (sorted.empty()) return out;
    const double span = sorted.back() - sorted.front();
    const double pad = span > 0.0 ? 0.5 * span / static_cast<double>(sorted.size()) : 0.5;
    out.push_back(sorted.front() - pad);
    for (std::size_t i = 0; i + 1 < sorted.size(); ++i) out.push_back(0.5 * (sorted[i] + sorted[i + 1]));
    out.push_back(sorted.back() + pad);
    return out;
}

ThresholdChoice tune_threshold(std::span<const double> scores, std::span<const int> labels, Objective objective) {
    check_inputs(scores.size(), labels.size());
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return scores[x] < scores[y]; });

    std::uint64_t pos_total = 0;
    for (int l : labels) pos_total += l != 0;
    const std::uint64_t neg_total = n - pos_total;
    const auto candidates = threshold_candidates(scores);

    // Sweep candidates ascending; items with score <= threshold are predicted negative.
    std::uint64_t below_pos = 0, below_neg = 0;
    std::size_t k = 0;
    ThresholdChoice best{candidates.front(), -std::numeric_limits<double>::infinity()};
    for (double t : candidates) {
        while (k < n && scores[order[k]] <= t) {
            (labels[order[k]] != 0 ? below_pos : below_neg)++;
            ++k;
        }
        ConfusionMatrix cm{pos_total - below_pos, neg_total - below_neg, below_neg, below_pos};
        const double value = objective_value(classification_metrics(cm), objective);
        if (value > best.value) best = {t, value};
    }
    return best;
}

double sigmoid(double z) noexcept {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double softplus(double z) noexcept { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double calibration_nll(std::span<const double> logits, std::span<const int> labels, double temperature) {
    check_inputs(logits.size(), labels.size());
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const double z = logits[i] / temperature;
        total += labels[i] != 0 ? softplus(-z) : softplus(z);
    }
    return total / static_cast<double>(logits.size());
}

namespace {

// dNLL/dT = mean((sigmoid(z/T) - y) * (-z / T^2))
double nll_slope(std::span<const double> logits, std::span<const int> labels, double t) {
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const double z = logits[i];
        total += (sigmoid(z / t) - (labels[i] != 0 ? 1.0 : 0.0)) * (-z / (t * t));
    }
    return total / static_cast<double>(logits.size());
}

}  // namespace

double fit_temperature(std::span<const double> logits, std::span<const int> labels) {
    check_inputs(logits.size(), labels.size());
    for (double z : logits)
        if (!std::isfinite(z)) throw Error(ErrorCode::NonFiniteValue, "logit");

    constexpr int kGrid = 200;
    constexpr int kRefinements = 40;
    const double log_lo = std::log(kMinTemperature), log_hi = std::log(kMaxTemperature);
    std::vector<double> grid(kGrid);
    for (int i = 0; i < kGrid; ++i) grid[i] = std::exp(log_lo + (log_hi - log_lo) * i / (kGrid - 1));
    grid.front() = kMinTemperature;
    grid.back() = kMaxTemperature;

    int best_i = 0;
    double best_nll = std::numeric_limits<double>::infinity();
    for (int i = 0; i < kGrid; ++i) {
        const double v = calibration_nll(logits, labels, grid[i]);
        if (v < best_nll) {
            best_nll = v;
            best_i = i;
        }
    }
    double best_t = grid[best_i];

    // Bisection on the slope sign inside the neighbouring grid cells.
    double lo = grid[std::max(best_i - 1, 0)];
    double hi = grid[std::min(best_i + 1, kGrid - 1)];
    if (nll_slope(logits, labels, lo) < 0.0 && nll_slope(logits, labels, hi) > 0.0) {
        for (int it = 0; it < kRefinements; ++it) {
            const double mid = 0.5 * (lo + hi);
            (nll_slope(logits, labels, mid) < 0.0 ? lo : hi) = mid;
        }
        const double refined = 0.5 * (lo + hi);
        const double v = calibration_nll(logits, labels, refined);
        if (v <= best_nll) {
            best_nll = v;
            best_t = refined;
        }
    }

    const double at_one = calibration_nll(logits, labels, 1.0);
    if (best_nll >= at_one - 1e-12) return 1.0;
    return best_t;
}

nlohmann::ordered_json to_json(const MetricsRecord& m) {
    nlohmann::ordered_json j;
    j["accuracy"] = m.accuracy;
    j["recall"] = m.recall;
    j["precision"] = m.precision;
    j["f1"] = m.f1;
    j["specificity"] = m.specificity;
    j["mcc"] = m.mcc;
    j["tp"] = m.cm.tp;
    j["fp"] = m.cm.fp;
    j["tn"] = m.cm.tn;
    j["fn"] = m.cm.fn;
    return j;
}

std::string metrics_tsv(const MetricsRecord& m, const std::string& row_name) {
    std::string out = "set\taccuracy\trecall\tprecision\tf1\tspecificity\tmcc\ttp\tfp\ttn\tfn\n";
    out += row_name;
    for (double v : {m.accuracy, m.recall, m.precision, m.f1, m.specificity, m.mcc}) out += "\t" + text::format_double(v);
    for (auto c : {m.cm.tp, m.cm.fp, m.cm.tn, m.cm.fn}) out += "\t" + std::to_string(c);
    out += "\n";
    return out;
}

}  // namespace pairforge
