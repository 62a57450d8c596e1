#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "canonnet/geometry.hpp"
#include "canonnet/model.hpp"
#include "canonnet/synthdata.hpp"

namespace canonnet {

// ---------------------------------------------------------------------------
// Curvature and classification metrics

/// |pred - gt| / max(|gt|, 1)
double rectified_error(double pred, double gt);

struct CurvatureErrors {
  double d_k_rmse = 0.0;
  double d_h_rmse = 0.0;
  std::vector<double> k_errors;
  std::vector<double> h_errors;
};

/// RMSE of rectified errors; `h_pred` is compared against |H|.
CurvatureErrors curvature_errors(const std::vector<double>& k_pred, const std::vector<double>& h_pred,
                                 const std::vector<Sample>& samples);

struct EvalReport {
  std::size_t samples = 0;
  /// Samples whose canonicalization failed; excluded from every metric.
  std::size_t skipped = 0;
  double accuracy = 0.0;
  /// confusion[truth][predicted]
  std::array<std::array<std::size_t, kSurfaceClassCount>, kSurfaceClassCount> confusion{};
  CurvatureErrors curvature;
};

EvalReport evaluate(const MlpModel& model, const std::vector<Sample>& samples, unsigned threads = 1);
CurvatureErrors evaluate_curvature(const MlpModel& model, const std::vector<Sample>& samples,
                                   unsigned threads = 1);

// ---------------------------------------------------------------------------
// Multi-resolution descriptor

/// Greedy farthest-point subsample of `k` indices, starting at `start`.
/// Ties go to the lowest index.
std::vector<std::size_t> farthest_point_sampling(const PointCloud& cloud, std::size_t k,
                                                 std::size_t start);

/// Indices of the `k` points nearest to `query`, nearest first; ties by index.
std::vector<std::size_t> k_nearest(const PointCloud& cloud, const Vec3& query, std::size_t k);

/// Index of the point closest to the centroid.
std::size_t central_point(const PointCloud& cloud);

struct DescriptorConfig {
  /// Subsample sizes per level, descending.
  std::vector<std::size_t> resolutions{100, 50, 20};
  /// Rescale each level's patch about its centroid to the RMS radius of the
  /// training patches, sqrt(1/6).
  bool normalize_scale = true;
};

inline constexpr std::size_t kOutputsPerLevel = kSurfaceClassCount + 2;

struct Descriptor {
  /// (logits, k, |H|) per level, concatenated.
  Eigen::VectorXd values;
  /// Levels whose canonicalization failed; their segment is zero.
  std::vector<bool> missing;
};

/// Descriptor of the neighbourhood around `cloud.point(center)`. Each level
/// farthest-point subsamples the cloud (seeded at the center), takes the
/// model's patch_size nearest neighbours of the center, canonicalizes and runs
/// the model.
Descriptor describe_point(const PointCloud& cloud, std::size_t center, const MlpModel& model,
                          const DescriptorConfig& config = {});

/// describe_point centred on central_point(cloud).
Descriptor build_descriptor(const PointCloud& cloud, const MlpModel& model,
                            const DescriptorConfig& config = {});

// ---------------------------------------------------------------------------
// Feature-match recall on synthetic scenes

struct SceneConfig {
  std::size_t min_patches = 3;
  std::size_t max_patches = 6;
  std::size_t points_per_patch = 400;
  /// Surfaces are scaled by this factor and spread over a cube of this side.
  double patch_scale = 1.0;
  double spread = 2.0;
  CoefficientRange coefficient_range{-1.0, 1.0};
};

/// Union of randomly posed quadratic patches.
PointCloud make_scene(Rng& rng, const SceneConfig& config = {});

/// Mean distance from each point to its nearest other point.
double mean_nearest_neighbor_spacing(const PointCloud& cloud);

struct MatchConfig {
  std::size_t keypoints = 64;
  DescriptorConfig descriptor{};
  unsigned threads = 1;
};

struct MatchReport {
  double fmr = 0.0;
  /// Mutual nearest-neighbour (best-buddy) pairs.
  std::size_t correspondences = 0;
  std::size_t inliers = 0;
  double tau = 0.0;
  /// inliers / keypoints
  double inlier_ratio = 0.0;
  std::size_t keypoints = 0;
  /// Pair distances ||x_i - T y_j|| of the best buddies.
  std::vector<double> pair_distances;
};

/// Keypoints are farthest-point samples of `source`; their counterparts in
/// `target` are the target points nearest to T^{-1} x_i. Descriptors of both
/// sets are matched by mutual nearest neighbour and a pair counts when
/// ||x_i - T y_j|| < tau. `gt` maps target coordinates into source
/// coordinates. Throws NoCorrespondences when no best buddies exist.
MatchReport feature_match_recall(const PointCloud& source, const PointCloud& target,
                                 const RigidTransform& gt, const MlpModel& model, double tau,
                                 const MatchConfig& config = {});

/// Fraction of pair distances under tau; used to sweep thresholds.
double recall_at(const MatchReport& report, double tau);

/// Mutual nearest neighbours between rows of a and rows of b (Euclidean).
std::vector<std::pair<std::size_t, std::size_t>> mutual_nearest_neighbors(const Eigen::MatrixXd& a,
                                                                           const Eigen::MatrixXd& b);

// ---------------------------------------------------------------------------
// Ablations

struct OrderingAblationConfig {
  std::vector<double> temperatures{0.5, 1.0, 2.0, 5.0};
  std::vector<LaplacianKind> laplacians{LaplacianKind::Normalized, LaplacianKind::Combinatorial};
  std::vector<double> noise_levels{0.0, 0.01, 0.03, 0.05, 0.07, 0.10};
  std::size_t patches = 210;
  std::size_t patch_size = 20;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct OrderingCell {
  double temperature = 1.0;
  LaplacianKind laplacian = LaplacianKind::Normalized;
  double noise = 0.0;
  double consistency = 0.0;
  std::size_t patches = 0;
  std::size_t skipped = 0;
};

/// Mean ordering consistency for every (temperature, laplacian, noise) cell.
/// All cells share the same clean patches and noise draws.
std::vector<OrderingCell> ablate_ordering_robustness(const OrderingAblationConfig& config);
std::string ordering_table_csv(const std::vector<OrderingCell>& cells);

struct PipelineVariant {
  std::string name;
  bool canonicalize = true;
  bool polynomial = true;
  std::size_t eigenvalue_count = 0;
};

/// full, no_canonicalization, no_polynomial, eigenvalues.
std::vector<PipelineVariant> default_pipeline_variants();

struct PipelineAblationConfig {
  std::vector<PipelineVariant> variants = default_pipeline_variants();
  std::vector<double> noise_levels{0.0, 0.01, 0.03};
  std::size_t train_per_class = 2000;
  std::size_t test_per_class = 500;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  TrainConfig train{};
  /// Randomly rotate and permute every patch before featurization.
  bool random_pose = true;
  unsigned threads = 1;
};

struct PipelineCell {
  std::string variant;
  std::uint64_t seed = 0;
  double noise = 0.0;
  double accuracy = 0.0;
  std::size_t test_samples = 0;
};

/// Trains one model per (variant, seed) with an identical budget on a noise
/// mix drawn from `noise_levels`, then scores accuracy per noise level.
std::vector<PipelineCell> ablate_pipeline(const PipelineAblationConfig& config);
std::string pipeline_table_csv(const std::vector<PipelineCell>& cells);

/// Mean accuracy of a variant over seeds and noise levels.
double mean_accuracy(const std::vector<PipelineCell>& cells, const std::string& variant);

}  // namespace canonnet
