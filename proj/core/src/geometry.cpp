#include "canonnet/geometry.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Geometry>
#include <Eigen/LU>
#include <Eigen/QR>

#include "canonnet/errors.hpp"

namespace canonnet {

PointCloud::PointCloud(Eigen::MatrixX3d points) : points_(std::move(points)) {
  if (!points_.allFinite()) {
    throw Error(ErrorKind::InvalidArgument, "point cloud has non-finite coordinates");
  }
}

PointCloud PointCloud::from_points(std::span<const Vec3> points) {
  Eigen::MatrixX3d m(static_cast<Eigen::Index>(points.size()), 3);
  for (std::size_t i = 0; i < points.size(); ++i) {
    m.row(static_cast<Eigen::Index>(i)) = points[i].transpose();
  }
  return PointCloud(std::move(m));
}

Vec3 PointCloud::centroid() const {
  if (points_.rows() == 0) return Vec3::Zero();
  return points_.colwise().mean().transpose();
}

double PointCloud::bounding_box_diagonal() const {
  if (points_.rows() == 0) return 0.0;
  return (points_.colwise().maxCoeff() - points_.colwise().minCoeff()).norm();
}

PointCloud PointCloud::reordered(std::span<const std::size_t> order) const {
  Eigen::MatrixX3d out(static_cast<Eigen::Index>(order.size()), 3);
  for (std::size_t i = 0; i < order.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = points_.row(static_cast<Eigen::Index>(order[i]));
  }
  PointCloud result;
  result.points_ = std::move(out);
  return result;
}

RigidTransform::RigidTransform(const Mat3& rotation, const Vec3& translation)
    : rotation_(rotation), translation_(translation) {
  constexpr double kTol = 1e-12 * 3;
  const double ortho = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  const double det = rotation.determinant();
  if (!rotation.allFinite() || !translation.allFinite() || ortho > kTol ||
      std::abs(det - 1.0) > kTol) {
    throw Error(ErrorKind::InvalidArgument, "rotation is not a proper orthonormal matrix");
  }
}

RigidTransform RigidTransform::inverse() const {
  RigidTransform inv;
  inv.rotation_ = rotation_.transpose();
  inv.translation_ = -(inv.rotation_ * translation_);
  return inv;
}

RigidTransform RigidTransform::operator*(const RigidTransform& other) const {
  RigidTransform out;
  out.rotation_ = rotation_ * other.rotation_;
  out.translation_ = rotation_ * other.translation_ + translation_;
  return out;
}

PointCloud apply_transform(const PointCloud& cloud, const RigidTransform& xf) {
  Eigen::MatrixX3d out = cloud.matrix() * xf.rotation().transpose();
  out.rowwise() += xf.translation().transpose();
  return PointCloud(std::move(out));
}

Mat3 random_rotation(Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Mat3 g;
  for (int i = 0; i < 9; ++i) g(i / 3, i % 3) = gauss(rng);
  Eigen::HouseholderQR<Mat3> qr(g);
  Mat3 q = qr.householderQ();
  const Mat3 r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < 3; ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  if (q.determinant() < 0.0) q.col(0) *= -1.0;
  // One Newton step back onto SO(3) so the 1e-12 orthonormality check holds.
  q = 0.5 * (q + q.inverse().transpose());
  return q;
}

Mat3 axis_angle_rotation(const Vec3& k, double angle) {
  Mat3 kx;
  kx << 0.0, -k.z(), k.y(),
        k.z(), 0.0, -k.x(),
        -k.y(), k.x(), 0.0;
  return Mat3::Identity() + std::sin(angle) * kx + (1.0 - std::cos(angle)) * kx * kx;
}

Mat3 rotation_onto_z(const Vec3& v) {
  const double n = v.norm();
  if (!(n > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "cannot rotate a zero vector onto z");
  }
  const Vec3 u = v / n;
  const Vec3 z = Vec3::UnitZ();
  const Vec3 axis = u.cross(z);
  const double s = axis.norm();
  const double c = u.dot(z);
  if (s == 0.0) {
    if (c > 0.0) return Mat3::Identity();
    return axis_angle_rotation(Vec3::UnitX(), std::numbers::pi);
  }
  return axis_angle_rotation(axis / s, std::atan2(s, c));
}

Mat3 rotation_about_z(double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Mat3 r;
  r << c, -s, 0.0,
       s, c, 0.0,
       0.0, 0.0, 1.0;
  return r;
}

Eigen::MatrixXd pairwise_distances(const PointCloud& cloud) {
  const Eigen::Index n = cloud.size();
  Eigen::MatrixXd d(n, n);
  const auto& m = cloud.matrix();
  for (Eigen::Index i = 0; i < n; ++i) {
    d(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      d(i, j) = d(j, i) = (m.row(i) - m.row(j)).norm();
    }
  }
  return d;
}

std::string_view to_string(SurfaceClass c) noexcept {
  switch (c) {
    case SurfaceClass::Plane: return "plane";
    case SurfaceClass::Parabolic: return "parabolic";
    case SurfaceClass::Valley: return "valley";
    case SurfaceClass::Saddle: return "saddle";
  }
  return "unknown";
}

CurvaturePair monge_curvature(const QuadraticSurface& s, double x, double y) {
  const double p = 2.0 * s.a * x + s.c * y + s.d;
  const double q = 2.0 * s.b * y + s.c * x + s.e;
  const double r = 2.0 * s.a;
  const double sxy = s.c;
  const double t = 2.0 * s.b;
  const double g = 1.0 + p * p + q * q;

  CurvaturePair k;
  k.gaussian = (r * t - sxy * sxy) / (g * g);
  k.mean = ((1.0 + q * q) * r - 2.0 * p * q * sxy + (1.0 + p * p) * t) / (2.0 * std::pow(g, 1.5));
  k.mean_abs = std::abs(k.mean);
  return k;
}

SurfaceClass classify_surface(const CurvaturePair& k, double eps) {
  if (!(eps > 0.0)) throw Error(ErrorKind::InvalidArgument, "zero threshold must be positive");
  if (k.gaussian < -eps) return SurfaceClass::Saddle;
  if (k.gaussian > eps) return SurfaceClass::Parabolic;
  return std::abs(k.mean) <= eps ? SurfaceClass::Plane : SurfaceClass::Valley;
}

PointCloud sample_surface_points(const QuadraticSurface& s, std::size_t n, Rng& rng) {
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  Eigen::MatrixX3d m(static_cast<Eigen::Index>(n), 3);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double x = u(rng);
    const double y = u(rng);
    m(i, 0) = x;
    m(i, 1) = y;
    m(i, 2) = s.height(x, y);
  }
  return PointCloud(std::move(m));
}

}  // namespace canonnet
