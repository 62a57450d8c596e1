#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>

#include "canonnet/geometry.hpp"
#include "canonnet/jacobi.hpp"

namespace canonnet {

enum class LaplacianKind {
  /// I - D^{-1/2} W D^{-1/2}
  Normalized,
  /// D - W
  Combinatorial,
};

/// Point the patch is translated to before the rotations are fitted.
enum class TranslationAnchor {
  /// Degree-weighted mean of the points, sum_i D_ii x_i / sum_i D_ii.
  DegreeWeightedCentroid,
  /// Keep the input origin. Not invariant to translation.
  None,
};

struct CanonicalizeConfig {
  double temperature = 1.0;
  double degeneracy_tol = 1e-8;
  double centroid_tol = 1e-9;
  double axis_tol = 1e-9;
  LaplacianKind laplacian = LaplacianKind::Normalized;
  /// Keep W_ii = exp(0) = 1 instead of zeroing the diagonal.
  bool self_loops = false;
  TranslationAnchor anchor = TranslationAnchor::DegreeWeightedCentroid;
  double jacobi_tol = kDefaultJacobiTol;
  int max_sweeps = kDefaultJacobiSweeps;
};

/// Fully connected heat-kernel graph, W_ij = exp(-|x_i - x_j|^2 / t).
struct WeightedGraph {
  Eigen::MatrixXd weights;
  double temperature = 1.0;

  Eigen::VectorXd degrees() const { return weights.rowwise().sum(); }
};

/// Throws InvalidArgument for t <= 0 or fewer than 3 points and
/// DegenerateInput when two points coincide within 1e-12.
WeightedGraph build_graph(const PointCloud& cloud, double temperature, bool self_loops = false);

/// Symmetric normalized Laplacian; spectrum lies in [0, 2].
Eigen::MatrixXd normalized_laplacian(const WeightedGraph& g);
Eigen::MatrixXd combinatorial_laplacian(const WeightedGraph& g);
Eigen::MatrixXd laplacian(const WeightedGraph& g, LaplacianKind kind);

struct SpectralEmbedding {
  /// Unit-norm eigenvector of the second-smallest eigenvalue, sign fixed so
  /// that its largest-magnitude entry is positive.
  Eigen::VectorXd fiedler;
  double eigenvalue = 0.0;
  /// min(lambda_2 - lambda_1, lambda_3 - lambda_2)
  double spectral_gap = 0.0;
  /// Whole spectrum, ascending.
  Eigen::VectorXd eigenvalues;
};

/// Throws DegenerateSpectrum when the gap falls below `degeneracy_tol` and
/// SignAmbiguous when the two largest |phi| entries agree within 1e-12.
SpectralEmbedding fiedler_embedding(const Eigen::MatrixXd& laplacian, double degeneracy_tol = 1e-8,
                                    double jacobi_tol = kDefaultJacobiTol,
                                    int max_sweeps = kDefaultJacobiSweeps);

/// Flips the sign of `phi` so its largest-magnitude entry is positive.
Eigen::VectorXd sign_normalize(const Eigen::VectorXd& phi);

struct OrderedCloud {
  PointCloud points;
  /// points row i is input row permutation[i].
  std::vector<std::size_t> permutation;
};

/// Sorts points by ascending Fiedler value. Throws TiedEmbedding when two
/// values agree within 1e-12.
OrderedCloud canonical_order(const PointCloud& cloud, const SpectralEmbedding& emb);

struct CanonicalPatch {
  PointCloud canonical_points;
  std::vector<std::size_t> permutation;
  Mat3 r1 = Mat3::Identity();
  Mat3 r2 = Mat3::Identity();
  /// Subtracted from the reordered points before r1 is applied.
  Vec3 anchor = Vec3::Zero();
  double centroid_norm = 0.0;
  SpectralEmbedding embedding;
};

/// Rotates the (anchored) centroid onto +z, then spins about z so the last
/// point in canonical order (largest Fiedler value) lands on the half-plane
/// y = 0, x > 0.
///
/// `anchor` is subtracted before the rotations; pass zero for the literal
/// pipeline. Throws DegenerateCentroid and DegenerateLandmark when either
/// rotation is undefined.
CanonicalPatch canonical_orient(const OrderedCloud& ordered, const SpectralEmbedding& emb,
                                const Vec3& anchor, double centroid_tol = 1e-9,
                                double axis_tol = 1e-9);

/// build_graph -> laplacian -> fiedler_embedding -> canonical_order ->
/// canonical_orient.
CanonicalPatch canonicalize(const PointCloud& cloud, const CanonicalizeConfig& config = {});

/// Ordering stage only: build_graph -> laplacian -> fiedler_embedding ->
/// canonical_order.
OrderedCloud spectral_order(const PointCloud& cloud, const CanonicalizeConfig& config = {});

/// Fraction of canonical positions whose source index agrees between the
/// two clouds. Clouds must have the same size.
double ordering_consistency(const PointCloud& cloud, const PointCloud& noisy,
                            const CanonicalizeConfig& config = {});

/// Same measure on two precomputed permutations.
double permutation_agreement(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b);

}  // namespace canonnet
