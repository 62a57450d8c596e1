#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "canonnet/features.hpp"
#include "canonnet/random.hpp"
#include "canonnet/synthdata.hpp"

namespace canonnet {

enum class Activation : std::uint8_t { ReLU = 0, Tanh = 1 };

std::string_view to_string(Activation a) noexcept;
Activation parse_activation(std::string_view name);

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;

  Eigen::Index inputs() const noexcept { return weight.cols(); }
  Eigen::Index outputs() const noexcept { return weight.rows(); }
};

struct Prediction {
  std::array<double, kSurfaceClassCount> logits{};
  double k = 0.0;
  /// softplus of the raw head output, so never negative.
  double h_abs = 0.0;

  SurfaceClass predicted_class() const noexcept;
};

/// Shared ReLU/tanh trunk feeding a 4-logit class head and a 2-value
/// curvature head (signed K, |H| through softplus).
///
/// Inputs are standardized with a fixed per-feature affine map
/// (input_mean, input_scale) before the first layer; the map is fitted once
/// from training data and is not trained.
class MlpModel {
 public:
  MlpModel() = default;
  /// Zero weights and biases, identity standardization.
  MlpModel(const FeatureConfig& features, std::vector<std::size_t> hidden,
           Activation activation = Activation::ReLU);

  /// He-uniform (ReLU) or Glorot-uniform (tanh) weights, zero biases.
  static MlpModel initialized(const FeatureConfig& features, std::vector<std::size_t> hidden,
                              Activation activation, std::uint64_t seed);

  /// Architecture used unless configured otherwise: 128 -> 64, ReLU.
  static std::vector<std::size_t> default_hidden() { return {128, 64}; }

  std::size_t input_size() const noexcept { return features_.input_size(); }
  std::size_t param_count() const noexcept;
  const FeatureConfig& features() const noexcept { return features_; }
  Activation activation() const noexcept { return activation_; }
  std::vector<std::size_t> hidden_sizes() const;

  std::vector<DenseLayer>& trunk() noexcept { return trunk_; }
  const std::vector<DenseLayer>& trunk() const noexcept { return trunk_; }
  DenseLayer& class_head() noexcept { return class_head_; }
  const DenseLayer& class_head() const noexcept { return class_head_; }
  DenseLayer& curvature_head() noexcept { return curvature_head_; }
  const DenseLayer& curvature_head() const noexcept { return curvature_head_; }

  Eigen::VectorXd& input_mean() noexcept { return input_mean_; }
  const Eigen::VectorXd& input_mean() const noexcept { return input_mean_; }
  Eigen::VectorXd& input_scale() noexcept { return input_scale_; }
  const Eigen::VectorXd& input_scale() const noexcept { return input_scale_; }

  /// Fits input_mean/input_scale to columns of `inputs` (features x samples).
  void fit_standardization(const Eigen::MatrixXd& inputs);

  /// Throws ShapeMismatch if f has the wrong length.
  Prediction forward(const FeatureVector& f) const;
  /// One prediction per column of `inputs`.
  std::vector<Prediction> forward_batch(const Eigen::MatrixXd& inputs) const;

  /// All trainable parameters flattened in a fixed order (trunk layers, class
  /// head, curvature head; each weight row-major then bias).
  Eigen::VectorXd flat_parameters() const;
  void set_flat_parameters(const Eigen::VectorXd& params);

 private:
  FeatureConfig features_{};
  Activation activation_ = Activation::ReLU;
  std::vector<DenseLayer> trunk_;
  DenseLayer class_head_;
  DenseLayer curvature_head_;
  Eigen::VectorXd input_mean_;
  Eigen::VectorXd input_scale_;
};

struct LossWeights {
  double cls = 0.5;
  double reg = 0.5;
};

struct Target {
  SurfaceClass label = SurfaceClass::Plane;
  double k = 0.0;
  double h_abs = 0.0;
};

double smooth_l1(double residual) noexcept;
double cross_entropy(const std::array<double, kSurfaceClassCount>& logits, SurfaceClass label);

/// w.cls * CE(logits, label) + w.reg * (smoothL1(k - k_gt) + smoothL1(h - |h_gt|))
double loss(const Prediction& p, const Target& t, const LossWeights& w);
double loss(const Prediction& p, const Sample& s, const LossWeights& w);

/// Mean loss over the columns of `inputs` and its gradient with respect to
/// flat_parameters().
struct LossAndGradient {
  double loss = 0.0;
  Eigen::VectorXd gradient;
};
LossAndGradient loss_and_gradient(const MlpModel& model, const Eigen::MatrixXd& inputs,
                                  const std::vector<Target>& targets, const LossWeights& w);

/// Summed (not averaged) loss and gradient; building block for batched,
/// thread-count-independent reductions.
LossAndGradient loss_and_gradient_sum(const MlpModel& model, const Eigen::MatrixXd& inputs,
                                      const std::vector<Target>& targets, const LossWeights& w);

// ---------------------------------------------------------------------------
// Training

enum class OptimizerKind : std::uint8_t { Adam = 0, Sgd = 1 };

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 128;
  std::size_t epochs = 200;
  LossWeights weights{};
  OptimizerKind optimizer = OptimizerKind::Adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  /// Cosine-anneal the step size to `final_lr_fraction * learning_rate`.
  bool cosine_schedule = false;
  double final_lr_fraction = 0.05;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::vector<std::size_t> hidden = MlpModel::default_hidden();
  Activation activation = Activation::ReLU;

  /// Throws InvalidArgument for non-positive settings; rescales the loss
  /// weights to sum to one.
  void validate();
};

/// Network inputs and targets for a whole dataset, one sample per column.
struct TrainingSet {
  Eigen::MatrixXd inputs;
  std::vector<Target> targets;
  /// Dataset indices that made it in; the rest failed canonicalization.
  std::vector<std::size_t> kept;
};

TrainingSet prepare_training_set(const std::vector<Sample>& samples, const FeatureConfig& features,
                                 unsigned threads = 1);

struct OptimizerState {
  std::uint64_t step = 0;
  std::uint64_t epoch = 0;
  Eigen::VectorXd m;
  Eigen::VectorXd v;
};

struct TrainResult {
  MlpModel model;
  OptimizerState optimizer;
  std::vector<double> epoch_losses;
  std::vector<double> step_losses;
};

/// Mini-batch training. Deterministic for a given seed and independent of
/// `config.threads`: batch gradients are summed over fixed 32-sample chunks in
/// chunk order. Throws Diverged when the loss turns non-finite.
///
/// With `resume`, training continues from that model/optimizer state and runs
/// `config.epochs` further epochs.
TrainResult train(const TrainingSet& data, const FeatureConfig& features, TrainConfig config,
                  const TrainResult* resume = nullptr);

TrainResult train(const std::vector<Sample>& samples, const FeatureConfig& features,
                  const TrainConfig& config);

// ---------------------------------------------------------------------------
// Checkpoints ("CNM1")

void save_model(const std::filesystem::path& path, const MlpModel& model,
                const OptimizerState* optimizer = nullptr);
std::vector<std::uint8_t> encode_model(const MlpModel& model, const OptimizerState* optimizer);

struct Checkpoint {
  MlpModel model;
  std::optional<OptimizerState> optimizer;
};

/// Throws FormatVersionMismatch on foreign magic/version or when
/// `expected_patch_size` is given and differs; CorruptRecord on bad CRC.
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           std::optional<std::size_t> expected_patch_size = std::nullopt);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes,
                             std::optional<std::size_t> expected_patch_size = std::nullopt);
MlpModel load_model(const std::filesystem::path& path,
                    std::optional<std::size_t> expected_patch_size = std::nullopt);

/// Features + forward pass for one raw patch.
Prediction predict(const MlpModel& model, const PointCloud& patch);

}  // namespace canonnet
