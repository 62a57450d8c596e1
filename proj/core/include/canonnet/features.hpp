#pragma once

#include <cstddef>

#include <Eigen/Core>

#include "canonnet/geometry.hpp"
#include "canonnet/spectral.hpp"

namespace canonnet {

/// How a raw patch becomes a network input. Stored in checkpoints so a model
/// file fully describes its own inference path.
struct FeatureConfig {
  std::size_t patch_size = 20;
  /// Run the spectral canonicalization before featurizing. When off, points
  /// are used in the order and pose they arrive in.
  bool canonicalize = true;
  /// Append x^2, y^2, xy to each point's (x, y, z).
  bool polynomial = true;
  /// Append this many of the smallest nonzero Laplacian eigenvalues.
  std::size_t eigenvalue_count = 0;
  CanonicalizeConfig canon{};

  std::size_t per_point() const noexcept { return polynomial ? 6 : 3; }
  std::size_t input_size() const noexcept { return patch_size * per_point() + eigenvalue_count; }
};

struct FeatureVector {
  Eigen::VectorXd values;
};

/// Per point, in canonical order: x, y, z, x^2, y^2, xy.
FeatureVector featurize(const CanonicalPatch& patch);

/// Per-point features of `cloud` in its given order.
FeatureVector featurize_points(const PointCloud& cloud, bool polynomial);

/// Full input for `cloud` under `config`. Propagates canonicalization errors;
/// throws ShapeMismatch if the cloud size differs from config.patch_size.
FeatureVector extract_features(const PointCloud& cloud, const FeatureConfig& config);

}  // namespace canonnet
