#include <cmath>

#include "pairforge/metrics.hpp"
#include "pairforge/predict.hpp"
#include "pairforge/rng.hpp"

namespace pairforge {

std::string_view to_string(Architecture a) noexcept { return a == Architecture::pair_mlp ? "pair_mlp" : "two_tower"; }

std::string_view to_string(Activation a) noexcept {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::gelu: return "gelu";
        case Activation::tanh: return "tanh";
        case Activation::silu: return "silu";
    }
    return "relu";
}

std::string_view to_string(LossKind l) noexcept { return l == LossKind::bce ? "bce" : "focal"; }

Architecture parse_architecture(std::string_view text) {
    if (text == "pair_mlp" || text == "mlp") return Architecture::pair_mlp;
    if (text == "two_tower") return Architecture::two_tower;
    throw Error(ErrorCode::InvalidConfig, "unknown architecture '" + std::string(text) + "'");
}

Activation parse_activation(std::string_view text) {
    for (auto a : {Activation::relu, Activation::gelu, Activation::tanh, Activation::silu})
        if (to_string(a) == text) return a;
    throw Error(ErrorCode::InvalidConfig, "unknown activation '" + std::string(text) + "'");
}

LossKind parse_loss(std::string_view text) {
    if (text == "bce") return LossKind::bce;
    if (text == "focal") return LossKind::focal;
    throw Error(ErrorCode::InvalidConfig, "unknown loss '" + std::string(text) + "'");
}

nlohmann::ordered_json to_json(const ModelSpec& s) {
    nlohmann::ordered_json j;
    j["architecture"] = std::string(to_string(s.architecture));
    j["hidden"] = s.hidden;
    j["activation"] = std::string(to_string(s.activation));
    j["loss"] = std::string(to_string(s.loss));
    j["focal_gamma"] = s.focal_gamma;
    j["tower_out"] = s.tower_out;
    j["init_temperature"] = s.init_temperature;
    j["symmetrize"] = s.symmetrize;
    j["seed"] = s.seed;
    return j;
}

ModelSpec model_spec_from_json(const nlohmann::json& j) {
    ModelSpec s;
    try {
        s.architecture = parse_architecture(j.at("architecture").get<std::string>());
        s.hidden = j.at("hidden").get<std::vector<std::size_t>>();
        s.activation = parse_activation(j.at("activation").get<std::string>());
        s.loss = parse_loss(j.at("loss").get<std::string>());
        s.focal_gamma = j.at("focal_gamma").get<double>();
        s.tower_out = j.at("tower_out").get<std::size_t>();
        s.init_temperature = j.at("init_temperature").get<double>();
        s.symmetrize = j.at("symmetrize").get<bool>();
        s.seed = j.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::BadFormat, std::string("model spec: ") + e.what());
    }
    return s;
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0) || weight_decay < 0.0) throw Error(ErrorCode::InvalidConfig, "rates must be positive");
    if (batch_size == 0) throw Error(ErrorCode::InvalidConfig, "batch size must be positive");
    if (!(pu_factor > 0.0 && pu_factor <= 1.0)) throw Error(ErrorCode::InvalidConfig, "pu factor must be in (0, 1]");
    if (hard_negative_multiplier < 1.0) throw Error(ErrorCode::InvalidConfig, "hard-negative multiplier must be >= 1");
    if (bags == 0) throw Error(ErrorCode::InvalidConfig, "bag count must be positive");
}

Eigen::VectorXd TrainedModel::decay_mask() const {
    Eigen::VectorXd mask = Eigen::VectorXd::Zero(params.size());
    for (const auto& l : layers) mask.segment(static_cast<Eigen::Index>(l.offset), static_cast<Eigen::Index>(l.in * l.out)).setOnes();
    return mask;
}

TrainedModel build_model(const ModelSpec& spec, std::size_t input_dim) {
    if (spec.hidden.empty()) throw Error(ErrorCode::InvalidConfig, "hidden sizes must be nonempty");
    for (auto h : spec.hidden)
        if (h == 0) throw Error(ErrorCode::InvalidConfig, "hidden sizes must be positive");
    if (input_dim == 0) throw Error(ErrorCode::BadDimension, "input dimension is zero");
    if (input_dim % 4 != 0)
        throw Error(ErrorCode::BadDimension, "pair tensor width " + std::to_string(input_dim) + " is not 4m'");
    if (spec.architecture == Architecture::two_tower && (spec.tower_out == 0 || !(spec.init_temperature > 0.0)))
        throw Error(ErrorCode::InvalidConfig, "two-tower output size and temperature must be positive");

    TrainedModel m;
    m.spec = spec;
    m.input_dim = input_dim;
    std::vector<std::size_t> sizes;
    sizes.push_back(spec.architecture == Architecture::pair_mlp ? input_dim : input_dim / 4);
    sizes.insert(sizes.end(), spec.hidden.begin(), spec.hidden.end());
    sizes.push_back(spec.architecture == Architecture::pair_mlp ? 1 : spec.tower_out);

    std::size_t offset = 0;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        m.layers.push_back({sizes[l], sizes[l + 1], offset});
        offset += sizes[l] * sizes[l + 1] + sizes[l + 1];
    }
    const std::size_t total = offset + (spec.architecture == Architecture::two_tower ? 1 : 0);
    m.params.resize(static_cast<Eigen::Index>(total));

    Rng rng(derive_seed(spec.seed, "init"));
    for (const auto& l : m.layers) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(l.in));
        for (std::size_t k = 0; k < l.in * l.out + l.out; ++k)
            m.params[static_cast<Eigen::Index>(l.offset + k)] = rng.uniform(-bound, bound);
    }
    if (spec.architecture == Architecture::two_tower) m.params[m.params.size() - 1] = std::log(spec.init_temperature);

    m.input_mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(input_dim));
    m.input_scale = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(input_dim));
    return m;
}

namespace {

constexpr double kNormEps = 1e-12;

double act(Activation a, double x) {
    switch (a) {
        case Activation::relu: return x > 0.0 ? x : 0.0;
        case Activation::gelu: return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0)));
        case Activation::tanh: return std::tanh(x);
        case Activation::silu: return x * sigmoid(x);
    }
    return x;
}

double act_grad(Activation a, double x) {
    switch (a) {
        case Activation::relu: return x > 0.0 ? 1.0 : 0.0;
        case Activation::gelu: {
            const double cdf = 0.5 * (1.0 + std::erf(x / std::sqrt(2.0)));
            const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
            return cdf + x * pdf;
        }
        case Activation::tanh: {
            const double t = std::tanh(x);
            return 1.0 - t * t;
        }
        case Activation::silu: {
            const double s = sigmoid(x);
            return s + x * s * (1.0 - s);
        }
    }
    return 1.0;
}

using MapMat = Eigen::Map<const Eigen::MatrixXd>;
using MapVec = Eigen::Map<const Eigen::VectorXd>;

// Cache of one encoder pass: inputs to each layer and pre-activations.
struct Pass {
    std::vector<Eigen::MatrixXd> inputs;
    std::vector<Eigen::MatrixXd> pre;
    Eigen::MatrixXd out;
};

Pass run(const TrainedModel& m, const Eigen::VectorXd& params, const Eigen::MatrixXd& x) {
    Pass p;
    Eigen::MatrixXd h = x;
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        const auto& s = m.layers[l];
        MapMat w(params.data() + s.offset, static_cast<Eigen::Index>(s.out), static_cast<Eigen::Index>(s.in));
        MapVec b(params.data() + s.offset + s.in * s.out, static_cast<Eigen::Index>(s.out));
        Eigen::MatrixXd z = w * h;
        z.colwise() += b;
        p.inputs.push_back(std::move(h));
        if (l + 1 == m.layers.size()) {
            h = z;
        } else {
            h = z.unaryExpr([a = m.spec.activation](double v) { return act(a, v); });
        }
        p.pre.push_back(std::move(z));
    }
    p.out = std::move(h);
    return p;
}

// Accumulates parameter gradients given d(out) for one pass.
void backprop(const TrainedModel& m, const Eigen::VectorXd& params, const Pass& p, Eigen::MatrixXd d_out,
              Eigen::VectorXd& grad) {
    Eigen::MatrixXd dz = std::move(d_out);
    for (std::size_t l = m.layers.size(); l-- > 0;) {
        const auto& s = m.layers[l];
        const auto rows = static_cast<Eigen::Index>(s.out), cols = static_cast<Eigen::Index>(s.in);
        Eigen::Map<Eigen::MatrixXd> gw(grad.data() + s.offset, rows, cols);
        Eigen::Map<Eigen::VectorXd> gb(grad.data() + s.offset + s.in * s.out, rows);
        gw.noalias() += dz * p.inputs[l].transpose();
        gb += dz.rowwise().sum();
        if (l == 0) break;
        MapMat w(params.data() + s.offset, rows, cols);
        Eigen::MatrixXd dh = w.transpose() * dz;
        const auto& z_prev = p.pre[l - 1];
        dz = dh.array() * z_prev.unaryExpr([a = m.spec.activation](double v) { return act_grad(a, v); }).array();
    }
}

Eigen::MatrixXd standardize(const TrainedModel& m, const Eigen::MatrixXd& x) {
    if (static_cast<std::size_t>(x.rows()) != m.input_dim)
        throw Error(ErrorCode::DimensionMismatch,
                    "expected " + std::to_string(m.input_dim) + " features, got " + std::to_string(x.rows()));
    Eigen::MatrixXd s = x;
    s.colwise() -= m.input_mean;
    s.array().colwise() /= m.input_scale.array();
    return s;
}

struct TowerPass {
    Pass u, v;
    Eigen::VectorXd dot, nu, nv, cosine;
    double temperature = 1.0;
};

TowerPass run_towers(const TrainedModel& m, const Eigen::VectorXd& params, const Eigen::MatrixXd& xs) {
    const auto md = static_cast<Eigen::Index>(m.protein_dim());
    TowerPass t;
    t.u = run(m, params, xs.topRows(md));
    t.v = run(m, params, xs.middleRows(md, md));
    t.dot = (t.u.out.array() * t.v.out.array()).colwise().sum().transpose();
    t.nu = (t.u.out.colwise().squaredNorm().array() + kNormEps).sqrt().transpose();
    t.nv = (t.v.out.colwise().squaredNorm().array() + kNormEps).sqrt().transpose();
    t.cosine = t.dot.array() / (t.nu.array() * t.nv.array());
    t.temperature = std::exp(params[params.size() - 1]);
    return t;
}

// Per-example loss and d loss / d logit.
void example_loss(LossKind kind, double gamma, double z, int y, double& loss, double& dz) {
    if (kind == LossKind::bce) {
        loss = softplus(z) - (y ? z : 0.0);
        dz = sigmoid(z) - (y ? 1.0 : 0.0);
        return;
    }
    const double sgn = y ? 1.0 : -1.0;
    const double t = sgn * z;
    const double q = sigmoid(t);
    const double one_minus_q = sigmoid(-t);
    const double log_q = -softplus(-t);
    const double pw = std::pow(one_minus_q, gamma);
    loss = -pw * log_q;
    dz = sgn * (gamma * q * pw * log_q - pw * one_minus_q);
}

}  // namespace

Eigen::VectorXd predict_logits(const TrainedModel& m, const Eigen::VectorXd& params, const Eigen::MatrixXd& x) {
    const auto xs = standardize(m, x);
    if (m.spec.architecture == Architecture::pair_mlp) return run(m, params, xs).out.row(0).transpose();
    const auto t = run_towers(m, params, xs);
    return t.cosine / t.temperature;
}

Eigen::VectorXd predict_logits(const TrainedModel& m, const Eigen::MatrixXd& x) { return predict_logits(m, m.params, x); }

Eigen::MatrixXd swap_channels(const Eigen::MatrixXd& x) {
    const auto md = x.rows() / 4;
    Eigen::MatrixXd s = x;
    s.topRows(md) = x.middleRows(md, md);
    s.middleRows(md, md) = x.topRows(md);
    return s;
}

std::vector<double> predict_proba(const TrainedModel& m, const Eigen::MatrixXd& x) {
    const double t = m.calibration_temperature;
    const auto z = predict_logits(m, x);
    std::vector<double> p(static_cast<std::size_t>(z.size()));
    for (Eigen::Index i = 0; i < z.size(); ++i) p[static_cast<std::size_t>(i)] = sigmoid(z[i] / t);
    if (m.spec.symmetrize) {
        const auto zr = predict_logits(m, swap_channels(x));
        for (Eigen::Index i = 0; i < zr.size(); ++i) {
            auto& v = p[static_cast<std::size_t>(i)];
            v = 0.5 * (v + sigmoid(zr[i] / t));
        }
    }
    return p;
}

double forward_score(const TrainedModel& m, std::span<const double> pair_features) {
    if (pair_features.size() != m.input_dim)
        throw Error(ErrorCode::DimensionMismatch,
                    "expected " + std::to_string(m.input_dim) + " features, got " + std::to_string(pair_features.size()));
    Eigen::MatrixXd x(static_cast<Eigen::Index>(pair_features.size()), 1);
    for (std::size_t i = 0; i < pair_features.size(); ++i) x(static_cast<Eigen::Index>(i), 0) = pair_features[i];
    return predict_proba(m, x).front();
}

double loss_and_gradient(const TrainedModel& m, const Eigen::VectorXd& params, const Eigen::MatrixXd& x,
                         std::span<const int> y, std::span<const double> weight, Eigen::VectorXd* grad) {
    const auto n = x.cols();
    if (static_cast<std::size_t>(n) != y.size() || y.size() != weight.size())
        throw Error(ErrorCode::LengthMismatch, "batch columns, labels and weights differ");
    if (n == 0) throw Error(ErrorCode::EmptyInput, "empty batch");
    const auto xs = standardize(m, x);
    const double inv_n = 1.0 / static_cast<double>(n);

    Eigen::VectorXd logits;
    Pass mlp;
    TowerPass towers;
    if (m.spec.architecture == Architecture::pair_mlp) {
        mlp = run(m, params, xs);
        logits = mlp.out.row(0).transpose();
    } else {
        towers = run_towers(m, params, xs);
        logits = towers.cosine / towers.temperature;
    }

    double total = 0.0;
    Eigen::VectorXd dlogit(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double l, d;
        const auto k = static_cast<std::size_t>(i);
        example_loss(m.spec.loss, m.spec.focal_gamma, logits[i], y[k], l, d);
        total += weight[k] * l;
        dlogit[i] = weight[k] * d * inv_n;
    }
    total *= inv_n;
    if (!grad) return total;

    grad->setZero(params.size());
    if (m.spec.architecture == Architecture::pair_mlp) {
        backprop(m, params, mlp, dlogit.transpose(), *grad);
        return total;
    }
    // logit = cos / T; d logit / d log T = -cos / T.
    const double temp = towers.temperature;
    (*grad)[params.size() - 1] = -(dlogit.array() * towers.cosine.array()).sum() / temp;
    const Eigen::ArrayXd dcos = dlogit.array() / temp;
    const Eigen::ArrayXd inv_norms = 1.0 / (towers.nu.array() * towers.nv.array());
    const auto& eu = towers.u.out;
    const auto& ev = towers.v.out;
    Eigen::MatrixXd deu = ev * (dcos * inv_norms).matrix().asDiagonal();
    deu -= eu * (dcos * towers.cosine.array() / towers.nu.array().square()).matrix().asDiagonal();
    Eigen::MatrixXd dev = eu * (dcos * inv_norms).matrix().asDiagonal();
    dev -= ev * (dcos * towers.cosine.array() / towers.nv.array().square()).matrix().asDiagonal();
    backprop(m, params, towers.u, std::move(deu), *grad);
    backprop(m, params, towers.v, std::move(dev), *grad);
    return total;
}

std::vector<double> class_weights(std::span<const int> y) {
    double pos = 0.0;
    for (int v : y) pos += v != 0;
    const double n = static_cast<double>(y.size());
    const double neg = n - pos;
    std::vector<double> w(y.size(), 1.0);
    if (pos == 0.0 || neg == 0.0) return w;
    for (std::size_t i = 0; i < y.size(); ++i) w[i] = y[i] ? n / (2.0 * pos) : n / (2.0 * neg);
    return w;
}

}  // namespace pairforge
