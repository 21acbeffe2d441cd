#include "pairforge/rules.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "pairforge/text.hpp"

namespace pairforge {

std::string_view to_string(RuleForm form) noexcept {
    switch (form) {
        case RuleForm::gt: return "gt";
        case RuleForm::lt: return "lt";
        case RuleForm::hinge_pos: return "hinge_pos";
        case RuleForm::hinge_neg: return "hinge_neg";
        case RuleForm::linear: return "linear";
        case RuleForm::and2: return "and2";
    }
    return "gt";
}

std::string_view to_string(Strategy strategy) noexcept {
    return strategy == Strategy::greedy ? "greedy" : "sparse_logistic";
}

RuleForm parse_rule_form(std::string_view text) {
    for (auto f : {RuleForm::gt, RuleForm::lt, RuleForm::hinge_pos, RuleForm::hinge_neg, RuleForm::linear,
                   RuleForm::and2})
        if (to_string(f) == text) return f;
    throw Error(ErrorCode::UnknownForm, std::string(text));
}

Strategy parse_strategy(std::string_view text) {
    if (text == "greedy") return Strategy::greedy;
    if (text == "sparse_logistic" || text == "sparse") return Strategy::sparse_logistic;
    throw Error(ErrorCode::InvalidConfig, "unknown strategy '" + std::string(text) + "'");
}

namespace {

bool holds(double x, Cmp cmp, double t) { return cmp == Cmp::gt ? x > t : x < t; }

std::string_view op(Cmp cmp) { return cmp == Cmp::gt ? ">" : "<"; }

double lookup(const SignalVector& signals, const std::string& name) {
    const auto it = signals.find(name);
    if (it == signals.end()) throw Error(ErrorCode::MissingSignal, name);
    return it->second;
}

}  // namespace

double Rule::evaluate(double x, double y) const noexcept {
    switch (form) {
        case RuleForm::gt: return x > threshold ? 1.0 : 0.0;
        case RuleForm::lt: return x < threshold ? 1.0 : 0.0;
        case RuleForm::hinge_pos: return std::max(0.0, x - threshold);
        case RuleForm::hinge_neg: return std::max(0.0, threshold - x);
        case RuleForm::linear: return x;
        case RuleForm::and2: return holds(x, cmp, threshold) && holds(y, cmp2, threshold2) ? 1.0 : 0.0;
    }
    return 0.0;
}

double Rule::evaluate(const SignalVector& signals) const {
    const double x = lookup(signals, signal);
    const double y = form == RuleForm::and2 ? lookup(signals, signal2) : 0.0;
    return evaluate(x, y);
}

bool operator<(const Rule& l, const Rule& r) {
    return std::tie(l.signal, l.form, l.threshold, l.cmp, l.signal2, l.cmp2, l.threshold2) <
           std::tie(r.signal, r.form, r.threshold, r.cmp, r.signal2, r.cmp2, r.threshold2);
}

bool Rule::same_term(const Rule& o) const {
    if (form != o.form || signal != o.signal || threshold != o.threshold) return false;
    if (form != RuleForm::and2) return true;
    return cmp == o.cmp && signal2 == o.signal2 && cmp2 == o.cmp2 && threshold2 == o.threshold2;
}

std::string render_rule(const Rule& r) {
    const auto t = text::format_double(r.threshold);
    switch (r.form) {
        case RuleForm::gt: return r.signal + " > " + t;
        case RuleForm::lt: return r.signal + " < " + t;
        case RuleForm::hinge_pos: return "max(0, " + r.signal + " - " + t + ")";
        case RuleForm::hinge_neg: return "max(0, " + t + " - " + r.signal + ")";
        case RuleForm::linear: return r.signal;
        case RuleForm::and2:
            return r.signal + " " + std::string(op(r.cmp)) + " " + t + " and " + r.signal2 + " " +
                   std::string(op(r.cmp2)) + " " + text::format_double(r.threshold2);
    }
    return r.signal;
}

namespace {

bool is_identifier(std::string_view s) {
    if (s.empty()) return false;
    if (!(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
    return std::all_of(s.begin(), s.end(),
                       [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; });
}

double number(std::string_view token, std::string_view whole) {
    const auto v = text::parse_double(token);
    if (!v || !std::isfinite(*v)) throw Error(ErrorCode::UnknownForm, "bad number in '" + std::string(whole) + "'");
    return *v;
}

Cmp parse_cmp(std::string_view token, std::string_view whole) {
    if (token == ">") return Cmp::gt;
    if (token == "<") return Cmp::lt;
    throw Error(ErrorCode::UnknownForm, "'" + std::string(whole) + "'");
}

std::string identifier(std::string_view token, std::string_view whole) {
    if (!is_identifier(token)) throw Error(ErrorCode::UnknownForm, "'" + std::string(whole) + "'");
    return std::string(token);
}

}  // namespace

Rule parse_rule_text(std::string_view raw, double weight) {
    const auto whole = text::trim(raw);
    Rule r;
    r.weight = weight;

    if (whole.starts_with("max(")) {
        if (!whole.ends_with(")")) throw Error(ErrorCode::UnknownForm, std::string(whole));
        auto inner = whole.substr(4, whole.size() - 5);
        const auto comma = inner.find(',');
        if (comma == std::string_view::npos || text::trim(inner.substr(0, comma)) != "0")
            throw Error(ErrorCode::UnknownForm, std::string(whole));
        const auto tokens = text::split_whitespace(inner.substr(comma + 1));
        if (tokens.size() != 3 || tokens[1] != "-") throw Error(ErrorCode::UnknownForm, std::string(whole));
        if (is_identifier(tokens[0])) {
            r.form = RuleForm::hinge_pos;
            r.signal = std::string(tokens[0]);
            r.threshold = number(tokens[2], whole);
        } else {
            r.form = RuleForm::hinge_neg;
            r.threshold = number(tokens[0], whole);
            r.signal = identifier(tokens[2], whole);
        }
        return r;
    }

    const auto tokens = text::split_whitespace(whole);
    if (tokens.size() == 1) {
        r.form = RuleForm::linear;
        r.signal = identifier(tokens[0], whole);
        return r;
    }
    if (tokens.size() == 3 || (tokens.size() == 7 && tokens[3] == "and")) {
        r.signal = identifier(tokens[0], whole);
        r.cmp = parse_cmp(tokens[1], whole);
        r.threshold = number(tokens[2], whole);
        if (tokens.size() == 3) {
            r.form = r.cmp == Cmp::gt ? RuleForm::gt : RuleForm::lt;
            r.cmp = Cmp::gt;
            return r;
        }
        r.form = RuleForm::and2;
        r.signal2 = identifier(tokens[4], whole);
        r.cmp2 = parse_cmp(tokens[5], whole);
        r.threshold2 = number(tokens[6], whole);
        return r;
    }
    throw Error(ErrorCode::UnknownForm, "'" + std::string(whole) + "'");
}

// ---------------------------------------------------------------------------
// Scoring

namespace {

double combine(const RuleSet& rs, std::span<const double> values) {
    if (rs.rules.empty()) return sigmoid(rs.bias);
    if (rs.strategy == Strategy::greedy) {
        double votes = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i) votes += rs.rules[i].weight * values[i];
        return std::clamp(votes / static_cast<double>(rs.rules.size()), 0.0, 1.0);
    }
    double z = rs.bias;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto& s = rs.standardization.at(i);
        z += rs.rules[i].weight * (values[i] - s.mean) / s.scale;
    }
    return sigmoid(z);
}

}  // namespace

RuleScore score_ruleset(const RuleSet& rs, const SignalVector& signals) {
    std::vector<double> values;
    values.reserve(rs.rules.size());
    for (const auto& r : rs.rules) values.push_back(r.evaluate(signals));
    const double s = combine(rs, values);
    return {s, s > rs.decision_threshold};
}

std::vector<double> score_rows(const RuleSet& rs, const SignalTable& table, std::span<const std::size_t> rows) {
    std::vector<std::vector<double>> columns;
    columns.reserve(rs.rules.size());
    for (const auto& r : rs.rules) columns.push_back(evaluate_rule(r, table, rows));
    std::vector<double> out(rows.size());
    std::vector<double> values(rs.rules.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t k = 0; k < columns.size(); ++k) values[k] = columns[k][i];
        out[i] = combine(rs, values);
    }
    return out;
}

std::vector<double> evaluate_rule(const Rule& rule, const SignalTable& table, std::span<const std::size_t> rows) {
    const std::size_t c1 = table.column(rule.signal);
    const std::size_t c2 = rule.form == RuleForm::and2 ? table.column(rule.signal2) : 0;
    std::vector<double> out(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& row = table.rows[rows[i]];
        out[i] = rule.evaluate(row[c1], rule.form == RuleForm::and2 ? row[c2] : 0.0);
    }
    return out;
}

MetricsRecord evaluate_ruleset(const RuleSet& rs, const SignalTable& table, std::span<const std::size_t> rows) {
    const auto scores = score_rows(rs, table, rows);
    std::vector<int> labels;
    labels.reserve(rows.size());
    for (auto i : rows) labels.push_back(table.pairs[i].label == Label::positive);
    return classification_metrics(confusion_matrix(scores, labels, rs.decision_threshold));
}

std::string score_semantics(Strategy strategy) {
    if (strategy == Strategy::greedy)
        return "vote fraction: sum of fired unit-weight rules / number of rules; positive iff score > threshold";
    return "sigmoid(bias + sum weight_i * (f_i - mean_i) / scale_i); positive iff score > threshold";
}

// ---------------------------------------------------------------------------
// Serialization

nlohmann::ordered_json ruleset_to_json(const RuleSet& rs) {
    using nlohmann::ordered_json;
    ordered_json j;
    j["task"] = std::string(to_string(rs.task));
    j["strategy"] = std::string(to_string(rs.strategy));
    j["score_semantics"] = score_semantics(rs.strategy);
    j["bias"] = rs.bias;
    j["threshold"] = rs.decision_threshold;
    ordered_json rules = ordered_json::array();
    for (const auto& r : rs.rules) {
        ordered_json jr;
        jr["rule"] = render_rule(r);
        jr["form"] = std::string(to_string(r.form));
        jr["signal"] = r.signal;
        jr["threshold"] = r.threshold;
        if (r.form == RuleForm::and2) {
            jr["cmp"] = std::string(op(r.cmp));
            jr["signal2"] = r.signal2;
            jr["cmp2"] = std::string(op(r.cmp2));
            jr["threshold2"] = r.threshold2;
        }
        jr["weight"] = r.weight;
        rules.push_back(std::move(jr));
    }
    j["rules"] = std::move(rules);
    ordered_json stand = ordered_json::array();
    for (const auto& s : rs.standardization) stand.push_back({{"mean", s.mean}, {"scale", s.scale}});
    j["standardization"] = std::move(stand);
    ordered_json metrics = ordered_json::object();
    for (const auto& [k, v] : rs.metrics) metrics[k] = v;
    j["metrics"] = std::move(metrics);
    ordered_json prov = ordered_json::object();
    prov["seed"] = rs.seed;
    prov["config_digest"] = rs.config_digest;
    for (const auto& [k, v] : rs.provenance) prov[k] = v;
    j["provenance"] = std::move(prov);
    return j;
}

std::string serialize_ruleset(const RuleSet& rs) { return ruleset_to_json(rs).dump(2) + "\n"; }

namespace {

void check_signal(const std::string& name, const std::set<std::string>& registry) {
    if (!registry.contains(name)) throw Error(ErrorCode::UnknownSignal, name);
}

double finite(const nlohmann::json& v, const char* what) {
    if (!v.is_number()) throw Error(ErrorCode::BadFormat, std::string(what) + " is not a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw Error(ErrorCode::NonFiniteValue, what);
    return d;
}

}  // namespace

RuleSet parse_ruleset(std::string_view json_text, const std::set<std::string>* registry) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::BadFormat, e.what());
    }
    const auto known = registry ? std::set<std::string>{} : known_signal_names();
    const auto& names = registry ? *registry : known;

    RuleSet rs;
    try {
        rs.task = parse_task(j.at("task").get<std::string>());
        rs.strategy = parse_strategy(j.at("strategy").get<std::string>());
        rs.bias = finite(j.at("bias"), "bias");
        rs.decision_threshold = finite(j.at("threshold"), "threshold");
        for (const auto& jr : j.at("rules")) {
            Rule r;
            const double weight = finite(jr.at("weight"), "weight");
            if (jr.contains("form")) {
                r.form = parse_rule_form(jr.at("form").get<std::string>());
                r.signal = jr.at("signal").get<std::string>();
                r.threshold = r.form == RuleForm::linear && !jr.contains("threshold")
                                  ? 0.0
                                  : finite(jr.at("threshold"), "threshold");
                if (r.form == RuleForm::and2) {
                    r.cmp = parse_cmp(jr.at("cmp").get<std::string>(), "cmp");
                    r.signal2 = jr.at("signal2").get<std::string>();
                    r.cmp2 = parse_cmp(jr.at("cmp2").get<std::string>(), "cmp2");
                    r.threshold2 = finite(jr.at("threshold2"), "threshold2");
                }
                r.weight = weight;
            } else {
                r = parse_rule_text(jr.at("rule").get<std::string>(), weight);
            }
            check_signal(r.signal, names);
            if (r.form == RuleForm::and2) check_signal(r.signal2, names);
            rs.rules.push_back(std::move(r));
        }
        if (j.contains("standardization"))
            for (const auto& s : j.at("standardization"))
                rs.standardization.push_back({finite(s.at("mean"), "mean"), finite(s.at("scale"), "scale")});
        if (j.contains("metrics"))
            for (const auto& [k, v] : j.at("metrics").items()) rs.metrics[k] = v.get<double>();
        if (j.contains("provenance")) {
            for (const auto& [k, v] : j.at("provenance").items()) {
                if (k == "seed") rs.seed = v.get<std::uint64_t>();
                else if (k == "config_digest") rs.config_digest = v.get<std::string>();
                else rs.provenance[k] = v.get<std::string>();
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::BadFormat, e.what());
    }
    if (rs.strategy == Strategy::sparse_logistic && rs.standardization.size() != rs.rules.size())
        throw Error(ErrorCode::BadFormat, "standardization does not match the rules");
    for (const auto& s : rs.standardization)
        if (!(s.scale > 0.0)) throw Error(ErrorCode::BadFormat, "non-positive standardization scale");
    return rs;
}

std::string render_ruleset_text(const RuleSet& rs) {
    std::string out;
    out += "# task\t" + std::string(to_string(rs.task)) + "\n";
    out += "# strategy\t" + std::string(to_string(rs.strategy)) + "\n";
    out += "# bias\t" + text::format_double(rs.bias) + "\n";
    out += "# threshold\t" + text::format_double(rs.decision_threshold) + "\n";
    out += "# score\t" + score_semantics(rs.strategy) + "\n";
    out += "rule\tweight\tinterpretation\n";
    for (const auto& r : rs.rules) out += render_rule(r) + "\t" + text::format_double(r.weight) + "\t\n";
    return out;
}

}  // namespace pairforge
