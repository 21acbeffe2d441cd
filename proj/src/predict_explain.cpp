#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "pairforge/parallel.hpp"
#include "pairforge/predict.hpp"
#include "pairforge/rng.hpp"

namespace pairforge {

namespace {

using BatchValue = std::function<std::vector<double>(const Eigen::MatrixXd&)>;

void check_partition(const std::vector<FeatureGroup>& groups, std::size_t width) {
    std::vector<int> seen(width, 0);
    for (const auto& g : groups)
        for (const auto& [b, e] : g.ranges) {
            if (b > e || e > width) throw Error(ErrorCode::InvalidConfig, "group " + g.name + " is out of range");
            for (std::size_t k = b; k < e; ++k) ++seen[k];
        }
    for (std::size_t k = 0; k < width; ++k)
        if (seen[k] != 1) throw Error(ErrorCode::InvalidConfig, "groups do not partition coordinate " + std::to_string(k));
}

// Column per coalition mask: instance values inside the coalition, baseline elsewhere.
void fill(Eigen::Ref<Eigen::VectorXd> col, const std::vector<double>& instance, std::span<const double> baseline,
          const std::vector<FeatureGroup>& groups, const std::vector<char>& in) {
    for (std::size_t k = 0; k < baseline.size(); ++k) col[static_cast<Eigen::Index>(k)] = baseline[k];
    for (std::size_t g = 0; g < groups.size(); ++g)
        if (in[g])
            for (const auto& [b, e] : groups[g].ranges)
                for (std::size_t k = b; k < e; ++k) col[static_cast<Eigen::Index>(k)] = instance[k];
}

struct InstanceResult {
    std::vector<double> phi;
    std::vector<double> se;
    double residual = 0.0;
};

InstanceResult exact_instance(const BatchValue& value, const std::vector<double>& instance,
                              std::span<const double> baseline, const std::vector<FeatureGroup>& groups) {
    const std::size_t g_count = groups.size();
    const std::size_t masks = std::size_t{1} << g_count;
    Eigen::MatrixXd x(static_cast<Eigen::Index>(baseline.size()), static_cast<Eigen::Index>(masks));
    std::vector<char> in(g_count);
    for (std::size_t s = 0; s < masks; ++s) {
        for (std::size_t g = 0; g < g_count; ++g) in[g] = (s >> g) & 1u;
        fill(x.col(static_cast<Eigen::Index>(s)), instance, baseline, groups, in);
    }
    const auto v = value(x);

    // |S|! (G - |S| - 1)! / G!
    std::vector<double> weight(g_count);
    for (std::size_t k = 0; k < g_count; ++k)
        weight[k] = std::exp(std::lgamma(k + 1.0) + std::lgamma(static_cast<double>(g_count - k)) -
                             std::lgamma(g_count + 1.0));

    InstanceResult r;
    r.phi.assign(g_count, 0.0);
    r.se.assign(g_count, 0.0);
    for (std::size_t g = 0; g < g_count; ++g) {
        const std::size_t bit = std::size_t{1} << g;
        for (std::size_t s = 0; s < masks; ++s) {
            if (s & bit) continue;
            r.phi[g] += weight[static_cast<std::size_t>(std::popcount(s))] * (v[s | bit] - v[s]);
        }
    }
    const double total = std::accumulate(r.phi.begin(), r.phi.end(), 0.0);
    r.residual = std::abs(total - (v[masks - 1] - v[0]));
    return r;
}

InstanceResult sampled_instance(const BatchValue& value, const std::vector<double>& instance,
                                std::span<const double> baseline, const std::vector<FeatureGroup>& groups,
                                std::size_t permutations, std::uint64_t seed) {
    const std::size_t g_count = groups.size();
    Rng rng(seed);
    std::vector<std::vector<std::size_t>> perms(permutations);
    for (auto& p : perms) {
        p.resize(g_count);
        std::iota(p.begin(), p.end(), 0);
        rng.shuffle(std::span<std::size_t>(p));
    }
    const std::size_t per = g_count + 1;
    Eigen::MatrixXd x(static_cast<Eigen::Index>(baseline.size()), static_cast<Eigen::Index>(permutations * per));
    std::vector<char> in(g_count);
    for (std::size_t m = 0; m < permutations; ++m) {
        std::fill(in.begin(), in.end(), 0);
        for (std::size_t k = 0; k <= g_count; ++k) {
            if (k > 0) in[perms[m][k - 1]] = 1;
            fill(x.col(static_cast<Eigen::Index>(m * per + k)), instance, baseline, groups, in);
        }
    }
    const auto v = value(x);

    std::vector<std::vector<double>> contrib(g_count, std::vector<double>(permutations));
    for (std::size_t m = 0; m < permutations; ++m)
        for (std::size_t k = 1; k <= g_count; ++k) contrib[perms[m][k - 1]][m] = v[m * per + k] - v[m * per + k - 1];

    InstanceResult r;
    r.phi.assign(g_count, 0.0);
    r.se.assign(g_count, 0.0);
    const double mcount = static_cast<double>(permutations);
    for (std::size_t g = 0; g < g_count; ++g) {
        const double mean = std::accumulate(contrib[g].begin(), contrib[g].end(), 0.0) / mcount;
        double ss = 0.0;
        for (double c : contrib[g]) ss += (c - mean) * (c - mean);
        r.phi[g] = mean;
        r.se[g] = permutations > 1 ? std::sqrt(ss / (mcount - 1.0) / mcount) : 0.0;
    }
    const double total = std::accumulate(r.phi.begin(), r.phi.end(), 0.0);
    r.residual = std::abs(total - (v[g_count] - v[0]));
    return r;
}

AttributionReport attribute(const BatchValue& value, const std::vector<std::vector<double>>& instances,
                            const std::vector<FeatureGroup>& groups, std::span<const double> baseline,
                            const AttributionOptions& opts) {
    if (instances.empty()) throw Error(ErrorCode::EmptyInstances, "no instances to explain");
    if (groups.empty()) throw Error(ErrorCode::InvalidConfig, "no groups");
    if (opts.mode == AttributionMode::exact && groups.size() > 12)
        throw Error(ErrorCode::TooManyGroups, std::to_string(groups.size()) + " groups (exact mode allows 12)");
    if (opts.mode == AttributionMode::sampled && opts.permutations == 0)
        throw Error(ErrorCode::InvalidConfig, "permutation count must be positive");
    check_partition(groups, baseline.size());
    for (const auto& inst : instances)
        if (inst.size() != baseline.size()) throw Error(ErrorCode::DimensionMismatch, "instance width differs from baseline");

    std::vector<InstanceResult> results(instances.size());
    parallel_for(instances.size(), [&](std::size_t i) {
        results[i] = opts.mode == AttributionMode::exact
                         ? exact_instance(value, instances[i], baseline, groups)
                         : sampled_instance(value, instances[i], baseline, groups, opts.permutations,
                                            derive_seed(opts.seed, "attribution/" + std::to_string(i)));
    });

    AttributionReport rep;
    rep.mode = opts.mode;
    rep.baseline = opts.baseline_name;
    rep.instances = instances.size();
    rep.permutations = opts.mode == AttributionMode::sampled ? opts.permutations : 0;
    const std::size_t g_count = groups.size();
    for (const auto& g : groups) rep.groups.push_back(g.name);
    rep.mean_abs.assign(g_count, 0.0);
    rep.mean_signed.assign(g_count, 0.0);
    rep.standard_error.assign(g_count, 0.0);
    const double n = static_cast<double>(instances.size());
    for (const auto& r : results) {
        for (std::size_t g = 0; g < g_count; ++g) {
            rep.mean_abs[g] += std::abs(r.phi[g]) / n;
            rep.mean_signed[g] += r.phi[g] / n;
            rep.standard_error[g] += r.se[g] / n;
        }
        rep.max_efficiency_residual = std::max(rep.max_efficiency_residual, r.residual);
        rep.per_instance.push_back(r.phi);
    }
    return rep;
}

}  // namespace

AttributionReport group_attribution(const ValueFunction& model, const std::vector<std::vector<double>>& instances,
                                    const std::vector<FeatureGroup>& groups, std::span<const double> baseline,
                                    const AttributionOptions& opts) {
    const BatchValue batch = [&](const Eigen::MatrixXd& x) {
        std::vector<double> out(static_cast<std::size_t>(x.cols()));
        std::vector<double> col(static_cast<std::size_t>(x.rows()));
        for (Eigen::Index c = 0; c < x.cols(); ++c) {
            for (Eigen::Index r = 0; r < x.rows(); ++r) col[static_cast<std::size_t>(r)] = x(r, c);
            out[static_cast<std::size_t>(c)] = model(col);
        }
        return out;
    };
    return attribute(batch, instances, groups, baseline, opts);
}

AttributionReport group_attribution(const TrainedModel& model, const std::vector<std::vector<double>>& instances,
                                    const std::vector<FeatureGroup>& groups, std::span<const double> baseline,
                                    const AttributionOptions& opts) {
    const BatchValue batch = [&](const Eigen::MatrixXd& x) { return predict_proba(model, x); };
    return attribute(batch, instances, groups, baseline, opts);
}

nlohmann::ordered_json to_json(const AttributionReport& r) {
    nlohmann::ordered_json j;
    j["mode"] = r.mode == AttributionMode::exact ? "exact" : "sampled";
    j["baseline"] = r.baseline;
    j["instances"] = r.instances;
    if (r.mode == AttributionMode::sampled) j["permutations"] = r.permutations;
    j["max_efficiency_residual"] = r.max_efficiency_residual;
    nlohmann::ordered_json groups = nlohmann::ordered_json::array();
    for (std::size_t g = 0; g < r.groups.size(); ++g) {
        nlohmann::ordered_json e;
        e["group"] = r.groups[g];
        e["mean_abs"] = r.mean_abs[g];
        e["mean_signed"] = r.mean_signed[g];
        if (r.mode == AttributionMode::sampled) e["standard_error"] = r.standard_error[g];
        groups.push_back(std::move(e));
    }
    j["groups"] = std::move(groups);
    return j;
}

}  // namespace pairforge
