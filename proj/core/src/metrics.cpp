#include <algorithm>
#include <cmath>
#include <optional>

#include "canonnet/errors.hpp"
#include "canonnet/eval.hpp"
#include "canonnet/parallel.hpp"

namespace canonnet {

double rectified_error(double pred, double gt) {
  return std::abs(pred - gt) / std::max(std::abs(gt), 1.0);
}

namespace {
double rms(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s / static_cast<double>(v.size()));
}
}  // namespace

CurvatureErrors curvature_errors(const std::vector<double>& k_pred, const std::vector<double>& h_pred,
                                 const std::vector<Sample>& samples) {
  if (k_pred.size() != samples.size() || h_pred.size() != samples.size()) {
    throw Error(ErrorKind::ShapeMismatch, "prediction and sample counts differ");
  }
  CurvatureErrors e;
  e.k_errors.reserve(samples.size());
  e.h_errors.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    e.k_errors.push_back(rectified_error(k_pred[i], samples[i].k_gt));
    e.h_errors.push_back(rectified_error(h_pred[i], std::abs(samples[i].h_abs_gt)));
  }
  e.d_k_rmse = rms(e.k_errors);
  e.d_h_rmse = rms(e.h_errors);
  return e;
}

EvalReport evaluate(const MlpModel& model, const std::vector<Sample>& samples, unsigned threads) {
  for (const Sample& s : samples) {
    if (static_cast<std::size_t>(s.cloud.size()) != model.features().patch_size) {
      throw Error(ErrorKind::ShapeMismatch, "dataset patch size differs from the model's");
    }
  }
  std::vector<std::optional<Prediction>> preds(samples.size());
  parallel_for(samples.size(), threads, [&](std::size_t i) {
    try {
      preds[i] = predict(model, samples[i].cloud);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::ShapeMismatch) throw;
    }
  });

  EvalReport report;
  std::vector<double> k_pred;
  std::vector<double> h_pred;
  std::vector<Sample> kept;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!preds[i]) {
      ++report.skipped;
      continue;
    }
    const auto truth = static_cast<std::size_t>(samples[i].label);
    const auto guess = static_cast<std::size_t>(preds[i]->predicted_class());
    ++report.confusion[truth][guess];
    correct += truth == guess ? 1 : 0;
    k_pred.push_back(preds[i]->k);
    h_pred.push_back(preds[i]->h_abs);
    kept.push_back(samples[i]);
  }
  report.samples = kept.size();
  report.accuracy = kept.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(kept.size());
  report.curvature = curvature_errors(k_pred, h_pred, kept);
  return report;
}

CurvatureErrors evaluate_curvature(const MlpModel& model, const std::vector<Sample>& samples,
                                   unsigned threads) {
  return evaluate(model, samples, threads).curvature;
}

}  // namespace canonnet
