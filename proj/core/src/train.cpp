#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "canonnet/errors.hpp"
#include "canonnet/model.hpp"
#include "canonnet/parallel.hpp"

namespace canonnet {

namespace {
constexpr std::size_t kChunk = 32;
}  // namespace

void TrainConfig::validate() {
  if (!(learning_rate > 0.0) || batch_size == 0 || epochs == 0) {
    throw Error(ErrorKind::InvalidArgument, "learning rate, batch size and epochs must be positive");
  }
  if (!(weights.cls >= 0.0) || !(weights.reg >= 0.0) || !(weights.cls + weights.reg > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "loss weights must be non-negative, not both zero");
  }
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0) || !(adam_eps > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "Adam betas must lie in (0, 1)");
  }
  const double total = weights.cls + weights.reg;
  weights.cls /= total;
  weights.reg /= total;
}

TrainingSet prepare_training_set(const std::vector<Sample>& samples, const FeatureConfig& features,
                                 unsigned threads) {
  const std::size_t n = samples.size();
  std::vector<std::optional<FeatureVector>> feats(n);
  parallel_for(n, threads, [&](std::size_t i) {
    try {
      feats[i] = extract_features(samples[i].cloud, features);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::ShapeMismatch || e.kind() == ErrorKind::InvalidArgument) throw;
      // Degenerate patch; left out of the set.
    }
  });

  TrainingSet set;
  for (std::size_t i = 0; i < n; ++i) {
    if (feats[i]) set.kept.push_back(i);
  }
  set.inputs.resize(static_cast<Eigen::Index>(features.input_size()),
                    static_cast<Eigen::Index>(set.kept.size()));
  set.targets.reserve(set.kept.size());
  for (std::size_t j = 0; j < set.kept.size(); ++j) {
    const Sample& s = samples[set.kept[j]];
    set.inputs.col(static_cast<Eigen::Index>(j)) = feats[set.kept[j]]->values;
    set.targets.push_back(Target{s.label, s.k_gt, s.h_abs_gt});
  }
  return set;
}

TrainResult train(const TrainingSet& data, const FeatureConfig& features, TrainConfig config,
                  const TrainResult* resume) {
  config.validate();
  const std::size_t n = data.targets.size();
  if (n == 0) throw Error(ErrorKind::InvalidArgument, "training set is empty");

  TrainResult result;
  if (resume != nullptr) {
    result = *resume;
    if (result.model.input_size() != features.input_size()) {
      throw Error(ErrorKind::ShapeMismatch, "resumed model does not match the feature layout");
    }
  } else {
    result.model = MlpModel::initialized(features, config.hidden, config.activation, config.seed);
    result.model.fit_standardization(data.inputs);
  }
  MlpModel& model = result.model;
  OptimizerState& opt = result.optimizer;
  Eigen::VectorXd params = model.flat_parameters();
  if (opt.m.size() != params.size()) {
    opt.m = Eigen::VectorXd::Zero(params.size());
    opt.v = Eigen::VectorXd::Zero(params.size());
  }

  const std::size_t batches_per_epoch = (n + config.batch_size - 1) / config.batch_size;
  const std::uint64_t first_epoch = opt.epoch;
  const std::uint64_t last_epoch = first_epoch + config.epochs;
  const double total_steps = static_cast<double>(last_epoch * batches_per_epoch);

  std::vector<std::size_t> order(n);
  for (std::uint64_t epoch = first_epoch; epoch < last_epoch; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng = make_stream(config.seed, epoch);
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < batches_per_epoch; ++b) {
      const std::size_t begin = b * config.batch_size;
      const std::size_t end = std::min(n, begin + config.batch_size);
      const std::size_t chunks = (end - begin + kChunk - 1) / kChunk;

      std::vector<LossAndGradient> partial(chunks);
      parallel_for(chunks, config.threads, [&](std::size_t c) {
        const std::size_t lo = begin + c * kChunk;
        const std::size_t hi = std::min(end, lo + kChunk);
        Eigen::MatrixXd x(data.inputs.rows(), static_cast<Eigen::Index>(hi - lo));
        std::vector<Target> t;
        t.reserve(hi - lo);
        for (std::size_t k = lo; k < hi; ++k) {
          x.col(static_cast<Eigen::Index>(k - lo)) = data.inputs.col(static_cast<Eigen::Index>(order[k]));
          t.push_back(data.targets[order[k]]);
        }
        partial[c] = loss_and_gradient_sum(model, x, t, config.weights);
      });

      double batch_loss = 0.0;
      Eigen::VectorXd grad = Eigen::VectorXd::Zero(params.size());
      for (const auto& p : partial) {
        batch_loss += p.loss;
        grad += p.gradient;
      }
      const auto count = static_cast<double>(end - begin);
      batch_loss /= count;
      grad /= count;
      if (!std::isfinite(batch_loss) || !grad.allFinite()) {
        const double last = result.step_losses.empty() ? 0.0 : result.step_losses.back();
        throw Error(ErrorKind::Diverged, "loss became non-finite at epoch " + std::to_string(epoch) +
                                             "; last finite loss " + std::to_string(last));
      }

      ++opt.step;
      double lr = config.learning_rate;
      if (config.cosine_schedule) {
        const double progress = std::min(1.0, static_cast<double>(opt.step) / total_steps);
        const double floor = config.final_lr_fraction;
        lr *= floor + (1.0 - floor) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
      }
      if (config.optimizer == OptimizerKind::Adam) {
        opt.m = config.beta1 * opt.m + (1.0 - config.beta1) * grad;
        opt.v = config.beta2 * opt.v + (1.0 - config.beta2) * grad.cwiseAbs2();
        const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(opt.step));
        const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(opt.step));
        params.array() -= lr * (opt.m.array() / bc1) /
                          ((opt.v.array() / bc2).sqrt() + config.adam_eps);
      } else {
        params -= lr * grad;
      }
      model.set_flat_parameters(params);

      result.step_losses.push_back(batch_loss);
      epoch_loss += batch_loss * count;
    }
    result.epoch_losses.push_back(epoch_loss / static_cast<double>(n));
    opt.epoch = epoch + 1;
  }
  return result;
}

TrainResult train(const std::vector<Sample>& samples, const FeatureConfig& features,
                  const TrainConfig& config) {
  return train(prepare_training_set(samples, features, config.threads), features, config);
}

}  // namespace canonnet
