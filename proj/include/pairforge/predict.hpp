#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "pairforge/features.hpp"

namespace pairforge {

enum class Architecture { pair_mlp, two_tower };
enum class Activation { relu, gelu, tanh, silu };
enum class LossKind { bce, focal };

std::string_view to_string(Architecture a) noexcept;
std::string_view to_string(Activation a) noexcept;
std::string_view to_string(LossKind l) noexcept;
Architecture parse_architecture(std::string_view text);
Activation parse_activation(std::string_view text);
LossKind parse_loss(std::string_view text);

struct ModelSpec {
    Architecture architecture = Architecture::pair_mlp;
    std::vector<std::size_t> hidden{64, 32};
    Activation activation = Activation::relu;
    LossKind loss = LossKind::bce;
    double focal_gamma = 2.0;
    std::size_t tower_out = 32;
    double init_temperature = 0.2;  // two-tower similarity temperature at initialisation
    bool symmetrize = false;
    std::uint64_t seed = 0;

    static std::vector<std::size_t> wide_hidden() { return {512, 256, 128}; }
};

nlohmann::ordered_json to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const nlohmann::json& j);

struct TrainConfig {
    double learning_rate = 1e-3;
    double weight_decay = 1e-4;
    std::size_t batch_size = 64;
    std::size_t max_epochs = 100;
    std::size_t patience = 10;
    bool class_weighting = true;
    bool hard_negative_mining = false;
    double hard_negative_floor = 0.7;
    double hard_negative_multiplier = 2.0;
    bool pu_downweighting = false;
    double pu_floor = 0.9;
    double pu_factor = 0.5;
    std::size_t bags = 3;

    void validate() const;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double validation_loss = 0.0;
    double validation_mcc = 0.0;
    double validation_threshold = 0.5;
};

// All parameters live in one flat vector. Per layer: W (out x in, column-major)
// then b; two_tower appends log T of the similarity.
struct LayerShape {
    std::size_t in = 0;
    std::size_t out = 0;
    std::size_t offset = 0;
};

struct TrainedModel {
    ModelSpec spec;
    std::size_t input_dim = 0;  // pair tensor width 4m'
    std::vector<LayerShape> layers;
    Eigen::VectorXd params;
    Eigen::VectorXd input_mean;
    Eigen::VectorXd input_scale;
    double calibration_temperature = 1.0;
    double decision_threshold = 0.5;
    std::vector<EpochRecord> history;

    std::size_t parameter_count() const noexcept { return static_cast<std::size_t>(params.size()); }
    std::size_t protein_dim() const noexcept { return input_dim / 4; }
    // 1 for weight-matrix entries, 0 for biases and the temperature.
    Eigen::VectorXd decay_mask() const;
};

// Seeded uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialisation; identity
// input standardisation. input_dim is the pair tensor width.
TrainedModel build_model(const ModelSpec& spec, std::size_t input_dim);

// Columns are pair tensors.
struct PairMatrix {
    Eigen::MatrixXd x;
    std::vector<int> y;

    std::size_t size() const noexcept { return static_cast<std::size_t>(x.cols()); }
};

// Raw logit for each column (orientation as given, no calibration).
Eigen::VectorXd predict_logits(const TrainedModel& m, const Eigen::MatrixXd& x);
Eigen::VectorXd predict_logits(const TrainedModel& m, const Eigen::VectorXd& params, const Eigen::MatrixXd& x);

// Calibrated probabilities, symmetrised when the spec asks for it.
std::vector<double> predict_proba(const TrainedModel& m, const Eigen::MatrixXd& x);
double forward_score(const TrainedModel& m, std::span<const double> pair_features);

// Pair tensor with the A and B channels exchanged.
Eigen::MatrixXd swap_channels(const Eigen::MatrixXd& x);

// Mean over the batch of weight_i * loss_i; gradient with respect to params.
double loss_and_gradient(const TrainedModel& m, const Eigen::VectorXd& params, const Eigen::MatrixXd& x,
                         std::span<const int> y, std::span<const double> weight, Eigen::VectorXd* grad);

// n / (2 * n_class) per example.
std::vector<double> class_weights(std::span<const int> y);

TrainedModel train_model(const ModelSpec& spec, const TrainConfig& cfg, const PairMatrix& train,
                         const PairMatrix& validation);

std::vector<double> ensemble_predict(const std::vector<TrainedModel>& models, const Eigen::MatrixXd& x);

// ---------------------------------------------------------------------------
// Attribution

enum class AttributionMode { exact, sampled };

struct AttributionReport {
    AttributionMode mode = AttributionMode::exact;
    std::vector<std::string> groups;
    std::vector<double> mean_abs;
    std::vector<double> mean_signed;
    std::vector<double> standard_error;  // sampled mode; zeros in exact mode
    std::vector<std::vector<double>> per_instance;
    std::string baseline;
    double max_efficiency_residual = 0.0;
    std::size_t instances = 0;
    std::size_t permutations = 0;
};

using ValueFunction = std::function<double(std::span<const double>)>;

struct AttributionOptions {
    AttributionMode mode = AttributionMode::exact;
    std::size_t permutations = 256;
    std::uint64_t seed = 0;
    std::string baseline_name = "training mean";
};

AttributionReport group_attribution(const ValueFunction& model, const std::vector<std::vector<double>>& instances,
                                    const std::vector<FeatureGroup>& groups, std::span<const double> baseline,
                                    const AttributionOptions& opts = {});

AttributionReport group_attribution(const TrainedModel& model, const std::vector<std::vector<double>>& instances,
                                    const std::vector<FeatureGroup>& groups, std::span<const double> baseline,
                                    const AttributionOptions& opts = {});

nlohmann::ordered_json to_json(const AttributionReport& r);

// ---------------------------------------------------------------------------
// Checkpoints: "PFMD" magic, version, spec JSON, 64-bit tensors, calibration
// temperature and threshold; history goes to "<path>.history.tsv".

void write_checkpoint(const std::string& path, const TrainedModel& m);
TrainedModel read_checkpoint(const std::string& path);
std::string history_tsv(const std::vector<EpochRecord>& history);

}  // namespace pairforge
