#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "canonnet/errors.hpp"
#include "canonnet/eval.hpp"

namespace canonnet {

namespace {
// RMS distance to the centroid of (x, y) uniform on [-0.5, 0.5]^2.
const double kTrainingRmsRadius = std::sqrt(1.0 / 6.0);
}  // namespace

std::vector<std::size_t> farthest_point_sampling(const PointCloud& cloud, std::size_t k,
                                                 std::size_t start) {
  const auto n = static_cast<std::size_t>(cloud.size());
  if (k > n) throw Error(ErrorKind::InvalidArgument, "cannot sample more points than exist");
  if (k == 0) return {};
  if (start >= n) throw Error(ErrorKind::InvalidArgument, "start index out of range");

  const auto& m = cloud.matrix();
  std::vector<std::size_t> picked{start};
  picked.reserve(k);
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::size_t current = start;
  while (picked.size() < k) {
    std::size_t best = 0;
    double best_d = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = (m.row(static_cast<Eigen::Index>(i)) - m.row(static_cast<Eigen::Index>(current)))
                           .squaredNorm();
      dist[i] = std::min(dist[i], d);
      if (dist[i] > best_d) {
        best_d = dist[i];
        best = i;
      }
    }
    picked.push_back(best);
    current = best;
  }
  return picked;
}

std::vector<std::size_t> k_nearest(const PointCloud& cloud, const Vec3& query, std::size_t k) {
  const auto n = static_cast<std::size_t>(cloud.size());
  if (k > n) throw Error(ErrorKind::InvalidArgument, "cannot take more neighbours than points");
  std::vector<std::pair<double, std::size_t>> d(n);
  for (std::size_t i = 0; i < n; ++i) {
    d[i] = {(cloud.point(static_cast<Eigen::Index>(i)) - query).squaredNorm(), i};
  }
  std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
  std::vector<std::size_t> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = d[i].second;
  return out;
}

std::size_t central_point(const PointCloud& cloud) {
  if (cloud.empty()) throw Error(ErrorKind::InvalidArgument, "empty cloud has no central point");
  return k_nearest(cloud, cloud.centroid(), 1).front();
}

Descriptor describe_point(const PointCloud& cloud, std::size_t center, const MlpModel& model,
                          const DescriptorConfig& config) {
  const std::size_t patch_size = model.features().patch_size;
  if (config.resolutions.empty()) {
    throw Error(ErrorKind::InvalidArgument, "descriptor needs at least one resolution");
  }
  for (std::size_t i = 0; i < config.resolutions.size(); ++i) {
    const std::size_t r = config.resolutions[i];
    if (r < patch_size || r > static_cast<std::size_t>(cloud.size()) ||
        (i > 0 && r > config.resolutions[i - 1])) {
      throw Error(ErrorKind::InvalidArgument,
                  "resolutions must descend within [patch_size, cloud size]");
    }
  }

  Descriptor out;
  const auto levels = static_cast<Eigen::Index>(config.resolutions.size());
  out.values = Eigen::VectorXd::Zero(levels * static_cast<Eigen::Index>(kOutputsPerLevel));
  out.missing.assign(config.resolutions.size(), false);
  const Vec3 c = cloud.point(static_cast<Eigen::Index>(center));

  for (std::size_t level = 0; level < config.resolutions.size(); ++level) {
    const PointCloud sub = cloud.reordered(farthest_point_sampling(cloud, config.resolutions[level], center));
    PointCloud patch = sub.reordered(k_nearest(sub, c, patch_size));
    if (config.normalize_scale) {
      Eigen::MatrixX3d m = patch.matrix();
      m.rowwise() -= patch.centroid().transpose();
      const double rms = std::sqrt(m.rowwise().squaredNorm().mean());
      if (rms > 0.0) m *= kTrainingRmsRadius / rms;
      patch = PointCloud(std::move(m));
    }
    try {
      const Prediction p = predict(model, patch);
      auto seg = out.values.segment(static_cast<Eigen::Index>(level * kOutputsPerLevel),
                                    static_cast<Eigen::Index>(kOutputsPerLevel));
      for (int k = 0; k < kSurfaceClassCount; ++k) seg(k) = p.logits[static_cast<std::size_t>(k)];
      seg(kSurfaceClassCount) = p.k;
      seg(kSurfaceClassCount + 1) = p.h_abs;
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::ShapeMismatch || e.kind() == ErrorKind::InvalidArgument) throw;
      out.missing[level] = true;
    }
  }
  return out;
}

Descriptor build_descriptor(const PointCloud& cloud, const MlpModel& model,
                            const DescriptorConfig& config) {
  return describe_point(cloud, central_point(cloud), model, config);
}

}  // namespace canonnet
