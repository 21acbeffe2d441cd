#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "pairforge/rules.hpp"

namespace pairforge {

namespace {

using Columns = std::vector<std::vector<double>>;

struct State {
    std::vector<double> eta;
    std::vector<double> prob;
    double loss_sum = 0.0;  // sum softplus(eta) - y * eta
};

// softplus and sigmoid from one exp.
inline void link(double z, double& softplus_z, double& sigmoid_z) {
    const double e = std::exp(-std::abs(z));
    softplus_z = std::max(z, 0.0) + std::log1p(e);
    sigmoid_z = z >= 0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
}

double penalty(const std::vector<double>& w, double lambda) {
    double s = 0.0;
    for (double v : w) s += std::abs(v);
    return lambda * s;
}

double soft_threshold(double z, double t) {
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

class Solver {
public:
    Solver(const Columns& x, std::span<const int> y) : x_(x), y_(y), n_(y.size()) {
        sq_mean_.resize(x.size());
        for (std::size_t j = 0; j < x.size(); ++j) {
            double s = 0.0;
            for (double v : x[j]) s += v * v;
            sq_mean_[j] = s / static_cast<double>(n_);
        }
    }

    void reset(const std::vector<double>& w, double b) {
        w_ = w;
        b_ = b;
        st_.eta.assign(n_, b);
        for (std::size_t j = 0; j < w_.size(); ++j)
            if (w_[j] != 0.0)
                for (std::size_t i = 0; i < n_; ++i) st_.eta[i] += w_[j] * x_[j][i];
        st_.prob.resize(n_);
        st_.loss_sum = 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
            double sp;
            link(st_.eta[i], sp, st_.prob[i]);
            st_.loss_sum += sp - y_[i] * st_.eta[i];
        }
    }

    double objective(double lambda) const { return st_.loss_sum / static_cast<double>(n_) + penalty(w_, lambda); }

    double gradient(std::size_t j) const {
        double g = 0.0;
        const auto& col = x_[j];
        for (std::size_t i = 0; i < n_; ++i) g += col[i] * (st_.prob[i] - y_[i]);
        return g / static_cast<double>(n_);
    }

    // One pass over the bias and the listed coordinates; returns max relative change.
    double sweep(const std::vector<std::size_t>& coords, double lambda) {
        double change = update_bias();
        for (auto j : coords) change = std::max(change, update(j, lambda));
        return change;
    }

    const std::vector<double>& weights() const { return w_; }
    double bias() const { return b_; }

private:
    // Loss after shifting eta by delta * col (col == nullptr: the bias direction).
    double trial(const std::vector<double>* col, double delta) {
        trial_eta_.resize(n_);
        trial_prob_.resize(n_);
        double loss = 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
            const double z = st_.eta[i] + delta * (col ? (*col)[i] : 1.0);
            double sp;
            link(z, sp, trial_prob_[i]);
            trial_eta_[i] = z;
            loss += sp - y_[i] * z;
        }
        return loss;
    }

    void commit(double loss) {
        st_.eta.swap(trial_eta_);
        st_.prob.swap(trial_prob_);
        st_.loss_sum = loss;
    }

    double update_bias() {
        double g = 0.0, h = 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
            g += st_.prob[i] - y_[i];
            h += st_.prob[i] * (1.0 - st_.prob[i]);
        }
        g /= static_cast<double>(n_);
        h /= static_cast<double>(n_);
        if (g == 0.0) return 0.0;
        double step = h > 1e-12 ? -g / h : -4.0 * g;
        double loss = trial(nullptr, step);
        if (!(loss <= st_.loss_sum)) {
            step = -4.0 * g;
            loss = trial(nullptr, step);
            if (!(loss <= st_.loss_sum)) return 0.0;
        }
        commit(loss);
        b_ += step;
        return std::abs(step) / std::max(1.0, std::abs(b_));
    }

    double update(std::size_t j, double lambda) {
        const double g = gradient(j);
        const double w = w_[j];
        if (w == 0.0 && std::abs(g) <= lambda) return 0.0;

        const auto& col = x_[j];
        const double before = st_.loss_sum / static_cast<double>(n_) + lambda * std::abs(w);
        // Newton curvature first; fall back to the 1/4 majorizer, which cannot increase the objective.
        double h_newton = 0.0;
        for (std::size_t i = 0; i < n_; ++i) h_newton += col[i] * col[i] * st_.prob[i] * (1.0 - st_.prob[i]);
        h_newton /= static_cast<double>(n_);
        const double h_mm = 0.25 * sq_mean_[j];

        for (double h : {h_newton, h_mm}) {
            if (!(h > 1e-12)) continue;
            const double w_new = soft_threshold(h * w - g, lambda) / h;
            const double delta = w_new - w;
            if (delta == 0.0) return 0.0;
            const double loss = trial(&col, delta);
            if (loss / static_cast<double>(n_) + lambda * std::abs(w_new) <= before) {
                commit(loss);
                w_[j] = w_new;
                return std::abs(delta) / std::max(1.0, std::abs(w_new));
            }
        }
        return 0.0;
    }

    const Columns& x_;
    std::span<const int> y_;
    std::size_t n_;
    std::vector<double> sq_mean_;
    std::vector<double> w_;
    double b_ = 0.0;
    State st_;
    std::vector<double> trial_eta_, trial_prob_;
};

double base_rate_logit(std::span<const int> y) {
    double pos = 0.0;
    for (int v : y) pos += v;
    const double rate = std::clamp(pos / static_cast<double>(y.size()), 1e-6, 1.0 - 1e-6);
    return std::log(rate / (1.0 - rate));
}

// Sign-normalised fingerprint; equal columns (or exact negations) collide.
std::uint64_t fingerprint(const std::vector<double>& col, double& sign) {
    sign = 1.0;
    for (double v : col)
        if (std::abs(v) > 1e-9) {
            sign = v < 0 ? -1.0 : 1.0;
            break;
        }
    std::uint64_t h = 1469598103934665603ull;
    for (double v : col) {
        const auto q = static_cast<std::int64_t>(std::llround(sign * v * 1e6));
        h = (h ^ static_cast<std::uint64_t>(q)) * 1099511628211ull;
    }
    return h;
}

bool same_direction(const std::vector<double>& a, const std::vector<double>& b, double sign) {
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::abs(a[i] - sign * b[i]) > 1e-9) return false;
    return true;
}

void check_shapes(const Columns& x, std::span<const int> y) {
    if (y.empty()) throw Error(ErrorCode::EmptyTraining, "no training rows");
    for (const auto& c : x)
        if (c.size() != y.size()) throw Error(ErrorCode::LengthMismatch, "column length differs from labels");
}

}  // namespace

double l1_lambda_max(const Columns& x, std::span<const int> y) {
    check_shapes(x, y);
    Solver s(x, y);
    s.reset(std::vector<double>(x.size(), 0.0), base_rate_logit(y));
    double m = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) m = std::max(m, std::abs(s.gradient(j)));
    // Headroom for the bias settling by a few ulps during the first sweep.
    return m * (1.0 + 1e-9);
}

double l1_logistic_objective(const Columns& x, std::span<const int> y, const L1Fit& fit, double lambda) {
    check_shapes(x, y);
    Solver s(x, y);
    s.reset(fit.weights, fit.bias);
    return s.objective(lambda);
}

L1Fit fit_l1_logistic(const Columns& x, std::span<const int> y, double lambda, const L1Fit* warm_start,
                      double tolerance, std::size_t max_sweeps) {
    check_shapes(x, y);
    Solver s(x, y);
    if (warm_start && warm_start->weights.size() == x.size()) s.reset(warm_start->weights, warm_start->bias);
    else s.reset(std::vector<double>(x.size(), 0.0), base_rate_logit(y));

    L1Fit fit;
    fit.objective_trace.push_back(s.objective(lambda));
    std::vector<std::size_t> all(x.size());
    for (std::size_t j = 0; j < all.size(); ++j) all[j] = j;

    // Full sweeps alternate with inner sweeps over the nonzero coordinates;
    // convergence is only declared on a full sweep.
    while (fit.sweeps < max_sweeps) {
        const double full_change = s.sweep(all, lambda);
        ++fit.sweeps;
        fit.objective_trace.push_back(s.objective(lambda));
        if (full_change < tolerance) {
            fit.converged = true;
            break;
        }
        std::vector<std::size_t> active;
        for (std::size_t j = 0; j < x.size(); ++j)
            if (s.weights()[j] != 0.0) active.push_back(j);
        while (fit.sweeps < max_sweeps) {
            const double change = s.sweep(active, lambda);
            ++fit.sweeps;
            fit.objective_trace.push_back(s.objective(lambda));
            if (change < tolerance) break;
        }
    }
    fit.weights = s.weights();
    fit.bias = s.bias();
    return fit;
}

RuleSet induce_sparse_logistic(const std::vector<Rule>& candidates, const InductionData& data, Task task,
                               const SparseConfig& cfg, SparseReport* report) {
    if (cfg.rule_cap < 1) throw Error(ErrorCode::NoFeasibleLambda, "rule cap must be at least 1");
    if (candidates.empty()) throw Error(ErrorCode::EmptyCandidates, "no candidates");
    if (data.train.empty()) throw Error(ErrorCode::EmptyTraining, "no training rows");
    if (data.validation.empty()) throw Error(ErrorCode::EmptySplit, "validation");
    if (cfg.path_length < 2) throw Error(ErrorCode::InvalidConfig, "path length must be >= 2");
    const auto& table = *data.table;
    const auto y = data.labels(data.train);
    const auto y_val = data.labels(data.validation);

    // Standardised training columns. Constant columns are dropped, and so are
    // exact duplicates or negations of an earlier column: L1 cannot tell them apart.
    std::unordered_map<std::uint64_t, std::vector<std::pair<std::size_t, double>>> seen;
    std::vector<std::size_t> kept;
    std::vector<Standardization> stand;
    Columns x, x_val;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        auto col = evaluate_rule(candidates[c], table, data.train);
        double mean = 0.0;
        for (double v : col) mean += v;
        mean /= static_cast<double>(col.size());
        double var = 0.0;
        for (double v : col) var += (v - mean) * (v - mean);
        const double sd = std::sqrt(var / static_cast<double>(col.size()));
        if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) continue;
        for (double& v : col) v = (v - mean) / sd;
        double sign = 1.0;
        auto& bucket = seen[fingerprint(col, sign)];
        bool duplicate = false;
        for (const auto& [k, other_sign] : bucket)
            if (same_direction(col, x[k], sign * other_sign)) duplicate = true;
        if (duplicate) continue;
        bucket.emplace_back(x.size(), sign);
        auto vcol = evaluate_rule(candidates[c], table, data.validation);
        for (double& v : vcol) v = (v - mean) / sd;
        kept.push_back(c);
        stand.push_back({mean, sd});
        x.push_back(std::move(col));
        x_val.push_back(std::move(vcol));
    }
    if (x.empty()) throw Error(ErrorCode::EmptyCandidates, "every candidate column is constant on training rows");

    SparseReport local;
    SparseReport& rep = report ? *report : local;
    rep = SparseReport{};
    rep.columns_used = x.size();
    rep.lambda_max = l1_lambda_max(x, y);

    const double lmax = rep.lambda_max > 0.0 ? rep.lambda_max : 1e-12;
    L1Fit prev;
    const L1Fit* warm = nullptr;
    std::vector<L1Fit> fits;
    std::size_t over_cap = 0;
    for (std::size_t k = 0; k < cfg.path_length; ++k) {
        const double frac = static_cast<double>(k) / static_cast<double>(cfg.path_length - 1);
        const double lambda = lmax * std::pow(cfg.lambda_min_ratio, frac);
        auto fit = fit_l1_logistic(x, y, lambda, warm, cfg.tolerance, cfg.max_sweeps);

        LambdaPoint pt;
        pt.lambda = lambda;
        pt.sweeps = fit.sweeps;
        pt.converged = fit.converged;
        pt.objective_trace = fit.objective_trace;
        for (double w : fit.weights) pt.nonzero += w != 0.0;
        std::vector<double> probs(data.validation.size());
        for (std::size_t i = 0; i < probs.size(); ++i) {
            double z = fit.bias;
            for (std::size_t j = 0; j < x_val.size(); ++j)
                if (fit.weights[j] != 0.0) z += fit.weights[j] * x_val[j][i];
            probs[i] = sigmoid(z);
        }
        const auto choice = tune_threshold(probs, y_val);
        pt.validation_mcc = choice.value;
        pt.validation_threshold = std::clamp(choice.threshold, 0.0, 1.0);
        pt.eligible = pt.nonzero <= cfg.rule_cap;
        rep.path.push_back(std::move(pt));
        fits.push_back(fit);
        prev = std::move(fit);
        warm = &prev;

        over_cap = rep.path.back().eligible ? 0 : over_cap + 1;
        if (over_cap >= cfg.over_cap_patience) break;
    }

    // Highest validation MCC among eligible lambdas; ties keep the sparser, larger lambda.
    std::size_t best = rep.path.size();
    for (std::size_t k = 0; k < rep.path.size(); ++k) {
        const auto& pt = rep.path[k];
        if (!pt.eligible) continue;
        if (best == rep.path.size() || pt.validation_mcc > rep.path[best].validation_mcc ||
            (pt.validation_mcc == rep.path[best].validation_mcc && pt.nonzero < rep.path[best].nonzero))
            best = k;
    }
    if (best == rep.path.size()) throw Error(ErrorCode::NoFeasibleLambda, "no lambda meets the rule cap");
    rep.selected = best;

    const auto& fit = fits[best];
    RuleSet rs;
    rs.task = task;
    rs.strategy = Strategy::sparse_logistic;
    rs.bias = fit.bias;
    rs.decision_threshold = rep.path[best].validation_threshold;
    for (std::size_t j = 0; j < fit.weights.size(); ++j) {
        if (fit.weights[j] == 0.0) continue;
        Rule r = candidates[kept[j]];
        r.weight = fit.weights[j];
        rs.rules.push_back(std::move(r));
        rs.standardization.push_back(stand[j]);
    }
    rs.metrics["validation_mcc"] = evaluate_ruleset(rs, table, data.validation).mcc;
    rs.metrics["train_mcc"] = evaluate_ruleset(rs, table, data.train).mcc;
    rs.metrics["lambda"] = rep.path[best].lambda;
    rs.provenance["candidate_count"] = std::to_string(candidates.size());
    rs.provenance["signal_count"] = std::to_string(table.names.size());
    return rs;
}

}  // namespace pairforge
