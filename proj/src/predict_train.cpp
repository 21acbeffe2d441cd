#include <algorithm>
#include <cmath>
#include <numeric>

#include "pairforge/metrics.hpp"
#include "pairforge/predict.hpp"
#include "pairforge/rng.hpp"

namespace pairforge {

namespace {

void fit_standardization(TrainedModel& m, const Eigen::MatrixXd& x) {
    const auto n = static_cast<double>(x.cols());
    const auto safe = [](double sd) { return sd > 1e-12 ? sd : 1.0; };
    m.input_mean = x.rowwise().mean();
    Eigen::VectorXd var = (x.colwise() - m.input_mean).array().square().rowwise().sum() / n;
    m.input_scale = var.array().sqrt().unaryExpr(safe);
    if (m.spec.architecture != Architecture::two_tower) return;

    // Shared encoder: one set of statistics pooled over both proteins.
    const auto md = static_cast<Eigen::Index>(m.protein_dim());
    Eigen::MatrixXd pooled(md, 2 * x.cols());
    pooled << x.topRows(md), x.middleRows(md, md);
    const Eigen::VectorXd mean = pooled.rowwise().mean();
    const Eigen::VectorXd sd =
        ((pooled.colwise() - mean).array().square().rowwise().sum() / (2.0 * n)).sqrt().unaryExpr(safe);
    m.input_mean.setZero();
    m.input_scale.setOnes();
    m.input_mean.head(md) = mean;
    m.input_mean.segment(md, md) = mean;
    m.input_scale.head(md) = sd;
    m.input_scale.segment(md, md) = sd;
}

double mean_loss(const TrainedModel& m, const PairMatrix& data) {
    const std::vector<double> ones(data.size(), 1.0);
    return loss_and_gradient(m, m.params, data.x, data.y, ones, nullptr);
}

std::vector<double> raw_scores(const TrainedModel& m, const Eigen::MatrixXd& x) {
    TrainedModel raw = m;
    raw.calibration_temperature = 1.0;
    return predict_proba(raw, x);
}

}  // namespace

TrainedModel train_model(const ModelSpec& spec, const TrainConfig& cfg, const PairMatrix& train,
                         const PairMatrix& validation) {
    cfg.validate();
    if (train.size() == 0) throw Error(ErrorCode::EmptySplit, "train");
    if (validation.size() == 0) throw Error(ErrorCode::EmptySplit, "validation");
    if (train.x.rows() != validation.x.rows())
        throw Error(ErrorCode::DimensionMismatch, "train and validation feature widths differ");

    TrainedModel model = build_model(spec, static_cast<std::size_t>(train.x.rows()));
    fit_standardization(model, train.x);

    const auto base_weight = cfg.class_weighting ? class_weights(train.y) : std::vector<double>(train.size(), 1.0);
    const auto record = [&](std::size_t epoch, double train_loss) {
        const auto scores = raw_scores(model, validation.x);
        const auto choice = tune_threshold(scores, validation.y);
        model.history.push_back({epoch, train_loss, mean_loss(model, validation), choice.value,
                                 std::clamp(choice.threshold, 0.0, 1.0)});
    };
    record(0, mean_loss(model, train));

    Eigen::VectorXd best_params = model.params;
    double best_mcc = model.history.back().validation_mcc;
    std::size_t stale = 0;

    const auto mask = model.decay_mask();
    Eigen::VectorXd m1 = Eigen::VectorXd::Zero(model.params.size());
    Eigen::VectorXd m2 = Eigen::VectorXd::Zero(model.params.size());
    constexpr double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    std::size_t step = 0;

    Rng rng(derive_seed(spec.seed, "batches"));
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> prev_scores = raw_scores(model, train.x);
    const auto d = train.x.rows();

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        // Loss weights from the previous epoch's scores.
        std::vector<double> weight = base_weight;
        for (std::size_t i = 0; i < train.size(); ++i) {
            if (train.y[i]) continue;
            if (cfg.hard_negative_mining && prev_scores[i] > cfg.hard_negative_floor)
                weight[i] *= cfg.hard_negative_multiplier;
            if (cfg.pu_downweighting && prev_scores[i] > cfg.pu_floor) weight[i] *= cfg.pu_factor;
        }

        rng.shuffle(std::span<std::size_t>(order));
        double epoch_loss = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
            const std::size_t len = std::min(cfg.batch_size, order.size() - start);
            Eigen::MatrixXd xb(d, static_cast<Eigen::Index>(len));
            std::vector<int> yb(len);
            std::vector<double> wb(len);
            for (std::size_t k = 0; k < len; ++k) {
                const auto i = order[start + k];
                xb.col(static_cast<Eigen::Index>(k)) = train.x.col(static_cast<Eigen::Index>(i));
                yb[k] = train.y[i];
                wb[k] = weight[i];
            }
            Eigen::VectorXd grad;
            const double loss = loss_and_gradient(model, model.params, xb, yb, wb, &grad);
            if (!std::isfinite(loss) || !grad.allFinite())
                throw Error(ErrorCode::NonFiniteLoss,
                            "epoch " + std::to_string(epoch) + " batch " + std::to_string(batch_index));
            epoch_loss += loss * static_cast<double>(len);

            ++step;
            m1 = beta1 * m1 + (1.0 - beta1) * grad;
            m2 = beta2 * m2 + (1.0 - beta2) * grad.cwiseProduct(grad);
            const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
            const Eigen::ArrayXd adam = (m1.array() / c1) / ((m2.array() / c2).sqrt() + adam_eps);
            model.params.array() -= cfg.learning_rate * (adam + cfg.weight_decay * mask.array() * model.params.array());
        }

        record(epoch, epoch_loss / static_cast<double>(train.size()));
        if (model.history.back().validation_mcc > best_mcc) {
            best_mcc = model.history.back().validation_mcc;
            best_params = model.params;
            stale = 0;
        } else if (++stale >= cfg.patience) {
            break;
        }
        if (cfg.hard_negative_mining || cfg.pu_downweighting) prev_scores = raw_scores(model, train.x);
    }
    model.params = best_params;

    if (cfg.max_epochs > 0) {
        const auto z = predict_logits(model, validation.x);
        model.calibration_temperature = fit_temperature(std::vector<double>(z.data(), z.data() + z.size()), validation.y);
    }
    const auto calibrated = predict_proba(model, validation.x);
    model.decision_threshold = std::clamp(tune_threshold(calibrated, validation.y).threshold, 0.0, 1.0);
    return model;
}

std::vector<double> ensemble_predict(const std::vector<TrainedModel>& models, const Eigen::MatrixXd& x) {
    if (models.empty()) throw Error(ErrorCode::EmptyEnsemble, "no models");
    std::vector<double> mean(static_cast<std::size_t>(x.cols()), 0.0);
    for (const auto& m : models) {
        const auto p = predict_proba(m, x);
        for (std::size_t i = 0; i < p.size(); ++i) mean[i] += p[i];
    }
    for (double& v : mean) v /= static_cast<double>(models.size());
    return mean;
}

}  // namespace pairforge
