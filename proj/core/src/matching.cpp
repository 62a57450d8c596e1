#include <algorithm>
#include <cmath>
#include <limits>

#include "canonnet/errors.hpp"
#include "canonnet/eval.hpp"
#include "canonnet/parallel.hpp"

namespace canonnet {

PointCloud make_scene(Rng& rng, const SceneConfig& config) {
  if (config.min_patches == 0 || config.max_patches < config.min_patches) {
    throw Error(ErrorKind::InvalidArgument, "bad scene patch count range");
  }
  std::uniform_int_distribution<std::size_t> count(config.min_patches, config.max_patches);
  std::uniform_int_distribution<int> cls(0, kSurfaceClassCount - 1);
  std::uniform_real_distribution<double> place(-0.5 * config.spread, 0.5 * config.spread);

  const std::size_t patches = count(rng);
  Eigen::MatrixX3d all(static_cast<Eigen::Index>(patches * config.points_per_patch), 3);
  for (std::size_t p = 0; p < patches; ++p) {
    const QuadraticSurface s =
        sample_surface_of_class(static_cast<SurfaceClass>(cls(rng)), rng, config.coefficient_range);
    const PointCloud local = sample_surface_points(s, config.points_per_patch, rng);
    const Mat3 r = random_rotation(rng);
    const Vec3 t(place(rng), place(rng), place(rng));
    Eigen::MatrixX3d m = config.patch_scale * local.matrix() * r.transpose();
    m.rowwise() += t.transpose();
    all.middleRows(static_cast<Eigen::Index>(p * config.points_per_patch),
                   static_cast<Eigen::Index>(config.points_per_patch)) = m;
  }
  return PointCloud(std::move(all));
}

double mean_nearest_neighbor_spacing(const PointCloud& cloud) {
  const Eigen::Index n = cloud.size();
  if (n < 2) return 0.0;
  const auto& m = cloud.matrix();
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i) best = std::min(best, (m.row(i) - m.row(j)).squaredNorm());
    }
    total += std::sqrt(best);
  }
  return total / static_cast<double>(n);
}

std::vector<std::pair<std::size_t, std::size_t>> mutual_nearest_neighbors(const Eigen::MatrixXd& a,
                                                                           const Eigen::MatrixXd& b) {
  if (a.cols() != b.cols()) throw Error(ErrorKind::ShapeMismatch, "descriptor widths differ");
  const Eigen::Index na = a.rows();
  const Eigen::Index nb = b.rows();
  std::vector<std::pair<std::size_t, std::size_t>> out;
  if (na == 0 || nb == 0) return out;

  Eigen::MatrixXd d(na, nb);
  for (Eigen::Index i = 0; i < na; ++i) {
    for (Eigen::Index j = 0; j < nb; ++j) d(i, j) = (a.row(i) - b.row(j)).squaredNorm();
  }
  std::vector<Eigen::Index> best_b(static_cast<std::size_t>(na));
  std::vector<Eigen::Index> best_a(static_cast<std::size_t>(nb));
  for (Eigen::Index i = 0; i < na; ++i) d.row(i).minCoeff(&best_b[static_cast<std::size_t>(i)]);
  for (Eigen::Index j = 0; j < nb; ++j) d.col(j).minCoeff(&best_a[static_cast<std::size_t>(j)]);
  for (Eigen::Index i = 0; i < na; ++i) {
    const Eigen::Index j = best_b[static_cast<std::size_t>(i)];
    if (best_a[static_cast<std::size_t>(j)] == i) {
      out.emplace_back(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    }
  }
  return out;
}

namespace {

Eigen::MatrixXd describe_keypoints(const PointCloud& cloud, const std::vector<std::size_t>& keypoints,
                                   const MlpModel& model, const MatchConfig& config) {
  const std::size_t reach = config.descriptor.resolutions.front();
  const auto width = static_cast<Eigen::Index>(config.descriptor.resolutions.size() * kOutputsPerLevel);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(keypoints.size()), width);
  parallel_for(keypoints.size(), config.threads, [&](std::size_t k) {
    const Vec3 p = cloud.point(static_cast<Eigen::Index>(keypoints[k]));
    const PointCloud hood = cloud.reordered(k_nearest(cloud, p, reach));
    // The keypoint itself is its own nearest neighbour.
    out.row(static_cast<Eigen::Index>(k)) =
        describe_point(hood, 0, model, config.descriptor).values.transpose();
  });
  return out;
}

}  // namespace

MatchReport feature_match_recall(const PointCloud& source, const PointCloud& target,
                                 const RigidTransform& gt, const MlpModel& model, double tau,
                                 const MatchConfig& config) {
  if (!(tau > 0.0)) throw Error(ErrorKind::InvalidArgument, "tau must be positive");
  if (config.descriptor.resolutions.empty()) {
    throw Error(ErrorKind::InvalidArgument, "descriptor needs at least one resolution");
  }
  const std::size_t keypoints = std::min<std::size_t>(config.keypoints, source.size());

  // Start from the point farthest from the centroid so selection is pose-free.
  Eigen::Index start = 0;
  (source.matrix().rowwise() - source.centroid().transpose()).rowwise().squaredNorm().maxCoeff(&start);
  const std::vector<std::size_t> src_kp =
      farthest_point_sampling(source, keypoints, static_cast<std::size_t>(start));

  const RigidTransform to_target = gt.inverse();
  std::vector<std::size_t> tgt_kp;
  tgt_kp.reserve(src_kp.size());
  for (std::size_t i : src_kp) {
    tgt_kp.push_back(k_nearest(target, to_target.apply(source.point(static_cast<Eigen::Index>(i))), 1)
                         .front());
  }

  const Eigen::MatrixXd da = describe_keypoints(source, src_kp, model, config);
  const Eigen::MatrixXd db = describe_keypoints(target, tgt_kp, model, config);
  const auto pairs = mutual_nearest_neighbors(da, db);
  if (pairs.empty()) throw Error(ErrorKind::NoCorrespondences, "no mutual nearest neighbours");

  MatchReport report;
  report.tau = tau;
  report.keypoints = keypoints;
  report.correspondences = pairs.size();
  for (const auto& [i, j] : pairs) {
    const Vec3 x = source.point(static_cast<Eigen::Index>(src_kp[i]));
    const Vec3 y = target.point(static_cast<Eigen::Index>(tgt_kp[j]));
    const double d = (x - gt.apply(y)).norm();
    report.pair_distances.push_back(d);
    report.inliers += d < tau ? 1 : 0;
  }
  report.fmr = static_cast<double>(report.inliers) / static_cast<double>(pairs.size());
  report.inlier_ratio = static_cast<double>(report.inliers) / static_cast<double>(keypoints);
  return report;
}

double recall_at(const MatchReport& report, double tau) {
  if (report.pair_distances.empty()) return 0.0;
  const auto hits = std::count_if(report.pair_distances.begin(), report.pair_distances.end(),
                                  [&](double d) { return d < tau; });
  return static_cast<double>(hits) / static_cast<double>(report.pair_distances.size());
}

}  // namespace canonnet
