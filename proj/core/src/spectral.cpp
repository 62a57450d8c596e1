#include "canonnet/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "canonnet/errors.hpp"

namespace canonnet {

namespace {
constexpr double kCoincidentTol = 1e-12;
constexpr double kTieTol = 1e-12;
}  // namespace

WeightedGraph build_graph(const PointCloud& cloud, double temperature, bool self_loops) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw Error(ErrorKind::InvalidArgument, "heat-kernel temperature must be positive");
  }
  const Eigen::Index n = cloud.size();
  if (n < 3) {
    throw Error(ErrorKind::InvalidArgument, "spectral pipeline needs at least 3 points");
  }
  const auto& x = cloud.matrix();
  WeightedGraph g;
  g.temperature = temperature;
  g.weights.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    g.weights(i, i) = self_loops ? 1.0 : 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d2 = (x.row(i) - x.row(j)).squaredNorm();
      if (std::sqrt(d2) <= kCoincidentTol) {
        throw Error(ErrorKind::DegenerateInput, "points " + std::to_string(i) + " and " +
                                                    std::to_string(j) + " coincide");
      }
      g.weights(i, j) = g.weights(j, i) = std::exp(-d2 / temperature);
    }
  }
  return g;
}

Eigen::MatrixXd normalized_laplacian(const WeightedGraph& g) {
  const Eigen::VectorXd deg = g.degrees();
  if ((deg.array() <= 0.0).any()) {
    throw Error(ErrorKind::DegenerateInput, "graph has an isolated vertex");
  }
  const Eigen::VectorXd inv_sqrt = deg.array().rsqrt();
  Eigen::MatrixXd l = -(inv_sqrt.asDiagonal() * g.weights * inv_sqrt.asDiagonal());
  l.diagonal().array() += 1.0;
  return l;
}

Eigen::MatrixXd combinatorial_laplacian(const WeightedGraph& g) {
  Eigen::MatrixXd l = -g.weights;
  l.diagonal() += g.degrees();
  return l;
}

Eigen::MatrixXd laplacian(const WeightedGraph& g, LaplacianKind kind) {
  return kind == LaplacianKind::Normalized ? normalized_laplacian(g) : combinatorial_laplacian(g);
}

Eigen::VectorXd sign_normalize(const Eigen::VectorXd& phi) {
  Eigen::Index imax = 0;
  phi.cwiseAbs().maxCoeff(&imax);
  return phi(imax) < 0.0 ? Eigen::VectorXd(-phi) : phi;
}

SpectralEmbedding fiedler_embedding(const Eigen::MatrixXd& lap, double degeneracy_tol,
                                    double jacobi_tol, int max_sweeps) {
  if (lap.rows() < 3) {
    throw Error(ErrorKind::InvalidArgument, "Fiedler embedding needs at least 3 vertices");
  }
  const EigenDecomposition eig = jacobi_eigensolve(lap, jacobi_tol, max_sweeps);
  const auto& lam = eig.values;

  SpectralEmbedding emb;
  emb.eigenvalues = lam;
  emb.eigenvalue = lam(1);
  emb.spectral_gap = std::min(lam(1) - lam(0), lam(2) - lam(1));
  if (emb.spectral_gap < degeneracy_tol) {
    throw Error(ErrorKind::DegenerateSpectrum,
                "spectral gap " + std::to_string(emb.spectral_gap) + " below tolerance");
  }

  Eigen::VectorXd phi = eig.vectors.col(1);
  phi.normalize();
  Eigen::VectorXd mags = phi.cwiseAbs();
  Eigen::Index imax = 0;
  const double top = mags.maxCoeff(&imax);
  mags(imax) = -1.0;
  if (top - mags.maxCoeff() <= kTieTol) {
    throw Error(ErrorKind::SignAmbiguous, "two Fiedler entries share the largest magnitude");
  }
  emb.fiedler = sign_normalize(phi);
  return emb;
}

OrderedCloud canonical_order(const PointCloud& cloud, const SpectralEmbedding& emb) {
  const auto& phi = emb.fiedler;
  if (phi.size() != cloud.size()) {
    throw Error(ErrorKind::ShapeMismatch, "embedding and cloud sizes differ");
  }
  OrderedCloud out;
  out.permutation.resize(static_cast<std::size_t>(phi.size()));
  std::iota(out.permutation.begin(), out.permutation.end(), std::size_t{0});
  std::sort(out.permutation.begin(), out.permutation.end(), [&](std::size_t i, std::size_t j) {
    return phi(static_cast<Eigen::Index>(i)) < phi(static_cast<Eigen::Index>(j));
  });
  for (std::size_t k = 1; k < out.permutation.size(); ++k) {
    const double gap = phi(static_cast<Eigen::Index>(out.permutation[k])) -
                       phi(static_cast<Eigen::Index>(out.permutation[k - 1]));
    if (gap <= kTieTol) {
      throw Error(ErrorKind::TiedEmbedding, "Fiedler entries tie at canonical position " +
                                                std::to_string(k));
    }
  }
  out.points = cloud.reordered(out.permutation);
  return out;
}

CanonicalPatch canonical_orient(const OrderedCloud& ordered, const SpectralEmbedding& emb,
                                const Vec3& anchor, double centroid_tol, double axis_tol) {
  const Eigen::Index n = ordered.points.size();
  if (n == 0) throw Error(ErrorKind::InvalidArgument, "empty patch");

  Eigen::MatrixX3d x = ordered.points.matrix();
  x.rowwise() -= anchor.transpose();
  const Vec3 m = x.colwise().mean().transpose();

  CanonicalPatch patch;
  patch.permutation = ordered.permutation;
  patch.anchor = anchor;
  patch.centroid_norm = m.norm();
  patch.embedding = emb;
  if (patch.centroid_norm < centroid_tol) {
    throw Error(ErrorKind::DegenerateCentroid, "centroid coincides with the anchor");
  }
  patch.r1 = rotation_onto_z(m);

  // Largest Fiedler value sits at the last canonical position.
  const Vec3 landmark = patch.r1 * x.row(n - 1).transpose();
  if (std::hypot(landmark.x(), landmark.y()) < axis_tol) {
    throw Error(ErrorKind::DegenerateLandmark, "landmark lies on the z-axis");
  }
  patch.r2 = rotation_about_z(-std::atan2(landmark.y(), landmark.x()));

  const Mat3 r = patch.r2 * patch.r1;
  patch.canonical_points = PointCloud(Eigen::MatrixX3d(x * r.transpose()));
  return patch;
}

CanonicalPatch canonicalize(const PointCloud& cloud, const CanonicalizeConfig& config) {
  const WeightedGraph g = build_graph(cloud, config.temperature, config.self_loops);
  const Eigen::MatrixXd lap = laplacian(g, config.laplacian);
  const SpectralEmbedding emb =
      fiedler_embedding(lap, config.degeneracy_tol, config.jacobi_tol, config.max_sweeps);
  const OrderedCloud ordered = canonical_order(cloud, emb);

  Vec3 anchor = Vec3::Zero();
  if (config.anchor == TranslationAnchor::DegreeWeightedCentroid) {
    // Summed in canonical order so the result does not depend on input order.
    const Eigen::VectorXd deg = g.degrees();
    double total = 0.0;
    for (std::size_t k = 0; k < ordered.permutation.size(); ++k) {
      const double w = deg(static_cast<Eigen::Index>(ordered.permutation[k]));
      anchor += w * ordered.points.point(static_cast<Eigen::Index>(k));
      total += w;
    }
    anchor /= total;
  }
  return canonical_orient(ordered, emb, anchor, config.centroid_tol, config.axis_tol);
}

OrderedCloud spectral_order(const PointCloud& cloud, const CanonicalizeConfig& config) {
  const WeightedGraph g = build_graph(cloud, config.temperature, config.self_loops);
  const SpectralEmbedding emb = fiedler_embedding(laplacian(g, config.laplacian),
                                                  config.degeneracy_tol, config.jacobi_tol,
                                                  config.max_sweeps);
  return canonical_order(cloud, emb);
}

double permutation_agreement(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  if (a.size() != b.size()) throw Error(ErrorKind::ShapeMismatch, "permutation sizes differ");
  if (a.empty()) return 1.0;
  std::size_t same = 0;
  for (std::size_t i = 0; i < a.size(); ++i) same += a[i] == b[i] ? 1 : 0;
  return static_cast<double>(same) / static_cast<double>(a.size());
}

double ordering_consistency(const PointCloud& cloud, const PointCloud& noisy,
                            const CanonicalizeConfig& config) {
  if (cloud.size() != noisy.size()) {
    throw Error(ErrorKind::ShapeMismatch, "clouds differ in size");
  }
  return permutation_agreement(spectral_order(cloud, config).permutation,
                               spectral_order(noisy, config).permutation);
}

}  // namespace canonnet
