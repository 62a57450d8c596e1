#include "canonnet/features.hpp"

#include <string>

#include "canonnet/errors.hpp"

namespace canonnet {

FeatureVector featurize_points(const PointCloud& cloud, bool polynomial) {
  const Eigen::Index per = polynomial ? 6 : 3;
  FeatureVector f;
  f.values.resize(cloud.size() * per);
  const auto& m = cloud.matrix();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double x = m(i, 0);
    const double y = m(i, 1);
    const double z = m(i, 2);
    auto seg = f.values.segment(i * per, per);
    seg(0) = x;
    seg(1) = y;
    seg(2) = z;
    if (polynomial) {
      seg(3) = x * x;
      seg(4) = y * y;
      seg(5) = x * y;
    }
  }
  return f;
}

FeatureVector featurize(const CanonicalPatch& patch) {
  return featurize_points(patch.canonical_points, true);
}

FeatureVector extract_features(const PointCloud& cloud, const FeatureConfig& config) {
  if (static_cast<std::size_t>(cloud.size()) != config.patch_size) {
    throw Error(ErrorKind::ShapeMismatch, "patch has " + std::to_string(cloud.size()) +
                                              " points, model expects " +
                                              std::to_string(config.patch_size));
  }
  Eigen::VectorXd spectrum;
  FeatureVector points;
  if (config.canonicalize) {
    const CanonicalPatch patch = canonicalize(cloud, config.canon);
    points = featurize_points(patch.canonical_points, config.polynomial);
    spectrum = patch.embedding.eigenvalues;
  } else {
    points = featurize_points(cloud, config.polynomial);
    if (config.eigenvalue_count > 0) {
      const WeightedGraph g = build_graph(cloud, config.canon.temperature, config.canon.self_loops);
      spectrum = jacobi_eigensolve(laplacian(g, config.canon.laplacian), config.canon.jacobi_tol,
                                   config.canon.max_sweeps)
                     .values;
    }
  }
  if (config.eigenvalue_count == 0) return points;

  const auto k = static_cast<Eigen::Index>(config.eigenvalue_count);
  if (spectrum.size() < k + 1) {
    throw Error(ErrorKind::ShapeMismatch, "not enough eigenvalues for the requested features");
  }
  FeatureVector f;
  f.values.resize(points.values.size() + k);
  f.values << points.values, spectrum.segment(1, k);
  return f;
}

}  // namespace canonnet
