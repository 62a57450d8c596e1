#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "canonnet/random.hpp"

namespace canonnet {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Ordered set of 3D points, stored one point per row.
class PointCloud {
 public:
  PointCloud() = default;
  /// Throws InvalidArgument on non-finite coordinates.
  explicit PointCloud(Eigen::MatrixX3d points);

  static PointCloud from_points(std::span<const Vec3> points);

  Eigen::Index size() const noexcept { return points_.rows(); }
  bool empty() const noexcept { return points_.rows() == 0; }
  Vec3 point(Eigen::Index i) const { return points_.row(i).transpose(); }
  const Eigen::MatrixX3d& matrix() const noexcept { return points_; }

  Vec3 centroid() const;
  double bounding_box_diagonal() const;

  /// Rows reordered so that output row i is input row order[i].
  PointCloud reordered(std::span<const std::size_t> order) const;

  friend bool operator==(const PointCloud& a, const PointCloud& b) {
    return a.points_.rows() == b.points_.rows() && a.points_ == b.points_;
  }

 private:
  Eigen::MatrixX3d points_;
};

/// Proper rigid motion p -> R p + t.
class RigidTransform {
 public:
  RigidTransform() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}
  /// Throws InvalidArgument unless R is orthonormal with det +1 (within 1e-12,
  /// scaled by the matrix size).
  RigidTransform(const Mat3& rotation, const Vec3& translation);

  static RigidTransform identity() { return {}; }

  const Mat3& rotation() const noexcept { return rotation_; }
  const Vec3& translation() const noexcept { return translation_; }

  Vec3 apply(const Vec3& p) const { return rotation_ * p + translation_; }
  RigidTransform inverse() const;
  /// (this * other)(p) == this->apply(other.apply(p)).
  RigidTransform operator*(const RigidTransform& other) const;

 private:
  Mat3 rotation_;
  Vec3 translation_;
};

PointCloud apply_transform(const PointCloud& cloud, const RigidTransform& xf);

/// Haar-distributed rotation (QR of a Gaussian matrix, sign-corrected).
Mat3 random_rotation(Rng& rng);

/// Rodrigues rotation about a unit axis.
Mat3 axis_angle_rotation(const Vec3& unit_axis, double angle);

/// Minimal-angle rotation taking direction `v` onto +z. Anti-parallel input is
/// handled by a half turn about the x-axis. `v` must be nonzero.
Mat3 rotation_onto_z(const Vec3& v);

Mat3 rotation_about_z(double angle);

/// Full N x N Euclidean distance matrix.
Eigen::MatrixXd pairwise_distances(const PointCloud& cloud);

/// z = a x^2 + b y^2 + c xy + d x + e y
struct QuadraticSurface {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double d = 0.0;
  double e = 0.0;

  double height(double x, double y) const noexcept {
    return a * x * x + b * y * y + c * x * y + d * x + e * y;
  }

  friend bool operator==(const QuadraticSurface&, const QuadraticSurface&) = default;
};

struct CurvaturePair {
  double gaussian = 0.0;
  /// Signed mean curvature (k1 + k2) / 2 for the upward normal.
  double mean = 0.0;
  double mean_abs = 0.0;
};

enum class SurfaceClass : std::uint8_t { Plane = 0, Parabolic = 1, Valley = 2, Saddle = 3 };

inline constexpr int kSurfaceClassCount = 4;
inline constexpr double kDefaultZeroThreshold = 1e-6;

std::string_view to_string(SurfaceClass c) noexcept;

/// Closed-form Monge-patch curvature of `s` at (x, y).
///
/// With p = f_x, q = f_y, r = f_xx = 2a, s = f_xy = c, t = f_yy = 2b:
///   K = (r t - s^2) / (1 + p^2 + q^2)^2
///   H = ((1 + q^2) r - 2 p q s + (1 + p^2) t) / (2 (1 + p^2 + q^2)^{3/2})
/// H is the average of the principal curvatures, hence the factor 2 in the
/// denominator.
CurvaturePair monge_curvature(const QuadraticSurface& s, double x, double y);

/// Saddle if K < -eps, Parabolic if K > eps, otherwise Plane when |H| <= eps
/// and Valley when not. Both signs of H count as Valley.
SurfaceClass classify_surface(const CurvaturePair& k, double eps = kDefaultZeroThreshold);

/// n points (x, y, f(x, y)) with (x, y) uniform on [-0.5, 0.5]^2.
PointCloud sample_surface_points(const QuadraticSurface& s, std::size_t n, Rng& rng);

}  // namespace canonnet
