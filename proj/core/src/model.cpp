#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "canonnet/errors.hpp"
#include "canonnet/model.hpp"

namespace canonnet {

namespace {

double softplus(double x) noexcept {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double smooth_l1_grad(double r) noexcept {
  if (r > 1.0) return 1.0;
  if (r < -1.0) return -1.0;
  return r;
}

void activate(Eigen::MatrixXd& z, Activation a) {
  if (a == Activation::ReLU) {
    z = z.cwiseMax(0.0);
  } else {
    z = z.array().tanh();
  }
}

// Derivative expressed through the activation output.
Eigen::ArrayXXd activation_grad(const Eigen::MatrixXd& out, Activation a) {
  if (a == Activation::ReLU) return (out.array() > 0.0).cast<double>();
  return 1.0 - out.array().square();
}

DenseLayer zero_layer(std::size_t in, std::size_t out) {
  DenseLayer l;
  l.weight = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
  l.bias = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(out));
  return l;
}

template <typename Visit>
void for_each_layer(const MlpModel& m, Visit&& visit) {
  for (const auto& l : m.trunk()) visit(l);
  visit(m.class_head());
  visit(m.curvature_head());
}

template <typename Visit>
void for_each_layer(MlpModel& m, Visit&& visit) {
  for (auto& l : m.trunk()) visit(l);
  visit(m.class_head());
  visit(m.curvature_head());
}

struct ForwardCache {
  Eigen::MatrixXd input;                    // standardized
  std::vector<Eigen::MatrixXd> activations;  // per trunk layer
  Eigen::MatrixXd logits;
  Eigen::MatrixXd curvature_raw;
};

ForwardCache run_forward(const MlpModel& m, const Eigen::MatrixXd& inputs) {
  if (static_cast<std::size_t>(inputs.rows()) != m.input_size()) {
    throw Error(ErrorKind::ShapeMismatch, "input has " + std::to_string(inputs.rows()) +
                                              " features, model expects " +
                                              std::to_string(m.input_size()));
  }
  ForwardCache c;
  c.input = ((inputs.colwise() - m.input_mean()).array().colwise() / m.input_scale().array())
                .matrix();
  const Eigen::MatrixXd* prev = &c.input;
  c.activations.reserve(m.trunk().size());
  for (const auto& layer : m.trunk()) {
    Eigen::MatrixXd z = layer.weight * *prev;
    z.colwise() += layer.bias;
    activate(z, m.activation());
    c.activations.push_back(std::move(z));
    prev = &c.activations.back();
  }
  c.logits = m.class_head().weight * *prev;
  c.logits.colwise() += m.class_head().bias;
  c.curvature_raw = m.curvature_head().weight * *prev;
  c.curvature_raw.colwise() += m.curvature_head().bias;
  return c;
}

Prediction prediction_at(const ForwardCache& c, Eigen::Index col) {
  Prediction p;
  for (int k = 0; k < kSurfaceClassCount; ++k) p.logits[static_cast<std::size_t>(k)] = c.logits(k, col);
  p.k = c.curvature_raw(0, col);
  p.h_abs = softplus(c.curvature_raw(1, col));
  return p;
}

}  // namespace

std::string_view to_string(Activation a) noexcept {
  return a == Activation::ReLU ? "relu" : "tanh";
}

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::ReLU;
  if (name == "tanh") return Activation::Tanh;
  throw Error(ErrorKind::InvalidArgument, "unknown activation '" + std::string(name) + "'");
}

SurfaceClass Prediction::predicted_class() const noexcept {
  const auto it = std::max_element(logits.begin(), logits.end());
  return static_cast<SurfaceClass>(std::distance(logits.begin(), it));
}

MlpModel::MlpModel(const FeatureConfig& features, std::vector<std::size_t> hidden,
                   Activation activation)
    : features_(features), activation_(activation) {
  std::size_t in = features.input_size();
  for (std::size_t h : hidden) {
    if (h == 0) throw Error(ErrorKind::InvalidArgument, "hidden layer of width 0");
    trunk_.push_back(zero_layer(in, h));
    in = h;
  }
  class_head_ = zero_layer(in, kSurfaceClassCount);
  curvature_head_ = zero_layer(in, 2);
  input_mean_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(features.input_size()));
  input_scale_ = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(features.input_size()));
}

MlpModel MlpModel::initialized(const FeatureConfig& features, std::vector<std::size_t> hidden,
                               Activation activation, std::uint64_t seed) {
  MlpModel m(features, std::move(hidden), activation);
  Rng rng(splitmix64(seed ^ 0x5eedULL));
  for_each_layer(m, [&](DenseLayer& l) {
    const auto fan_in = static_cast<double>(l.inputs());
    const auto fan_out = static_cast<double>(l.outputs());
    const double limit = activation == Activation::ReLU ? std::sqrt(6.0 / fan_in)
                                                        : std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = u(rng);
    }
  });
  return m;
}

std::size_t MlpModel::param_count() const noexcept {
  std::size_t n = 0;
  for_each_layer(*this, [&](const DenseLayer& l) {
    n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  });
  return n;
}

std::vector<std::size_t> MlpModel::hidden_sizes() const {
  std::vector<std::size_t> out;
  for (const auto& l : trunk_) out.push_back(static_cast<std::size_t>(l.outputs()));
  return out;
}

void MlpModel::fit_standardization(const Eigen::MatrixXd& inputs) {
  if (static_cast<std::size_t>(inputs.rows()) != input_size() || inputs.cols() == 0) {
    throw Error(ErrorKind::ShapeMismatch, "standardization data has the wrong shape");
  }
  input_mean_ = inputs.rowwise().mean();
  const Eigen::MatrixXd centered = inputs.colwise() - input_mean_;
  input_scale_ = (centered.array().square().rowwise().sum() / static_cast<double>(inputs.cols()))
                     .sqrt()
                     .matrix();
  for (Eigen::Index i = 0; i < input_scale_.size(); ++i) {
    if (!(input_scale_(i) > 1e-12)) input_scale_(i) = 1.0;
  }
}

Prediction MlpModel::forward(const FeatureVector& f) const {
  const ForwardCache c = run_forward(*this, f.values);
  return prediction_at(c, 0);
}

std::vector<Prediction> MlpModel::forward_batch(const Eigen::MatrixXd& inputs) const {
  const ForwardCache c = run_forward(*this, inputs);
  std::vector<Prediction> out;
  out.reserve(static_cast<std::size_t>(inputs.cols()));
  for (Eigen::Index j = 0; j < inputs.cols(); ++j) out.push_back(prediction_at(c, j));
  return out;
}

Eigen::VectorXd MlpModel::flat_parameters() const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(param_count()));
  Eigen::Index pos = 0;
  for_each_layer(*this, [&](const DenseLayer& l) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      out.segment(pos, l.weight.cols()) = l.weight.row(r).transpose();
      pos += l.weight.cols();
    }
    out.segment(pos, l.bias.size()) = l.bias;
    pos += l.bias.size();
  });
  return out;
}

void MlpModel::set_flat_parameters(const Eigen::VectorXd& params) {
  if (static_cast<std::size_t>(params.size()) != param_count()) {
    throw Error(ErrorKind::ShapeMismatch, "parameter vector has the wrong length");
  }
  Eigen::Index pos = 0;
  for_each_layer(*this, [&](DenseLayer& l) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      l.weight.row(r) = params.segment(pos, l.weight.cols()).transpose();
      pos += l.weight.cols();
    }
    l.bias = params.segment(pos, l.bias.size());
    pos += l.bias.size();
  });
}

double smooth_l1(double r) noexcept {
  const double a = std::abs(r);
  return a < 1.0 ? 0.5 * r * r : a - 0.5;
}

double cross_entropy(const std::array<double, kSurfaceClassCount>& logits, SurfaceClass label) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double l : logits) sum += std::exp(l - mx);
  return mx + std::log(sum) - logits[static_cast<std::size_t>(label)];
}

double loss(const Prediction& p, const Target& t, const LossWeights& w) {
  return w.cls * cross_entropy(p.logits, t.label) +
         w.reg * (smooth_l1(p.k - t.k) + smooth_l1(p.h_abs - t.h_abs));
}

double loss(const Prediction& p, const Sample& s, const LossWeights& w) {
  return loss(p, Target{s.label, s.k_gt, s.h_abs_gt}, w);
}

LossAndGradient loss_and_gradient_sum(const MlpModel& model, const Eigen::MatrixXd& inputs,
                                      const std::vector<Target>& targets, const LossWeights& w) {
  if (static_cast<std::size_t>(inputs.cols()) != targets.size()) {
    throw Error(ErrorKind::ShapeMismatch, "inputs and targets differ in count");
  }
  const ForwardCache c = run_forward(model, inputs);
  const Eigen::Index batch = inputs.cols();

  LossAndGradient out;
  Eigen::MatrixXd d_logits(kSurfaceClassCount, batch);
  Eigen::MatrixXd d_curv(2, batch);
  for (Eigen::Index j = 0; j < batch; ++j) {
    const Target& t = targets[static_cast<std::size_t>(j)];
    const Eigen::VectorXd z = c.logits.col(j);
    const double mx = z.maxCoeff();
    const Eigen::VectorXd e = (z.array() - mx).exp().matrix();
    const double sum = e.sum();
    const auto label = static_cast<Eigen::Index>(t.label);
    const double ce = mx + std::log(sum) - z(label);
    d_logits.col(j) = w.cls * e / sum;
    d_logits(label, j) -= w.cls;

    const double k = c.curvature_raw(0, j);
    const double h_raw = c.curvature_raw(1, j);
    const double h = softplus(h_raw);
    out.loss += w.cls * ce + w.reg * (smooth_l1(k - t.k) + smooth_l1(h - t.h_abs));
    d_curv(0, j) = w.reg * smooth_l1_grad(k - t.k);
    d_curv(1, j) = w.reg * smooth_l1_grad(h - t.h_abs) * sigmoid(h_raw);
  }

  const auto& trunk = model.trunk();
  const Eigen::MatrixXd& last = trunk.empty() ? c.input : c.activations.back();

  // Gradients collected per layer in forward order, then flattened.
  std::vector<DenseLayer> grads(trunk.size() + 2);
  grads[trunk.size()].weight = d_logits * last.transpose();
  grads[trunk.size()].bias = d_logits.rowwise().sum();
  grads[trunk.size() + 1].weight = d_curv * last.transpose();
  grads[trunk.size() + 1].bias = d_curv.rowwise().sum();

  Eigen::MatrixXd d_act = model.class_head().weight.transpose() * d_logits +
                          model.curvature_head().weight.transpose() * d_curv;
  for (std::size_t li = trunk.size(); li-- > 0;) {
    const Eigen::MatrixXd d_pre =
        (d_act.array() * activation_grad(c.activations[li], model.activation())).matrix();
    const Eigen::MatrixXd& below = li == 0 ? c.input : c.activations[li - 1];
    grads[li].weight = d_pre * below.transpose();
    grads[li].bias = d_pre.rowwise().sum();
    if (li > 0) d_act = trunk[li].weight.transpose() * d_pre;
  }

  out.gradient.resize(static_cast<Eigen::Index>(model.param_count()));
  Eigen::Index pos = 0;
  for (const auto& g : grads) {
    for (Eigen::Index r = 0; r < g.weight.rows(); ++r) {
      out.gradient.segment(pos, g.weight.cols()) = g.weight.row(r).transpose();
      pos += g.weight.cols();
    }
    out.gradient.segment(pos, g.bias.size()) = g.bias;
    pos += g.bias.size();
  }
  return out;
}

LossAndGradient loss_and_gradient(const MlpModel& model, const Eigen::MatrixXd& inputs,
                                  const std::vector<Target>& targets, const LossWeights& w) {
  LossAndGradient out = loss_and_gradient_sum(model, inputs, targets, w);
  const auto n = static_cast<double>(std::max<Eigen::Index>(inputs.cols(), 1));
  out.loss /= n;
  out.gradient /= n;
  return out;
}

Prediction predict(const MlpModel& model, const PointCloud& patch) {
  return model.forward(extract_features(patch, model.features()));
}

}  // namespace canonnet
