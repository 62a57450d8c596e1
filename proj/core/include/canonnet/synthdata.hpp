#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "canonnet/geometry.hpp"
#include "canonnet/random.hpp"

namespace canonnet {

struct CoefficientRange {
  double lo = -1.0;
  double hi = 1.0;
};

struct Sample {
  PointCloud cloud;
  QuadraticSurface surface;
  SurfaceClass label = SurfaceClass::Plane;
  /// Curvatures of `surface` at the origin.
  double k_gt = 0.0;
  double h_abs_gt = 0.0;
  std::uint64_t seed = 0;
};

struct DatasetSpec {
  std::size_t samples_per_class = 100;
  std::size_t patch_size = 20;
  CoefficientRange coefficient_range{};
  /// Relative noise level of each sample, drawn uniformly from this list.
  std::vector<double> noise_levels{0.0};
  std::uint64_t seed = 0;
  double label_eps = kDefaultZeroThreshold;
};

inline constexpr std::size_t kMaxRejectionDraws = 100'000;

/// Draws a quadratic whose origin curvature classifies as `target`.
///
/// Plane is constructed directly (a = b = c = 0) and Valley by pinning
/// c = +-2 sqrt(ab) for a, b of equal sign; Parabolic and Saddle are plain
/// rejection sampling. Throws RejectionLimit after kMaxRejectionDraws misses.
QuadraticSurface sample_surface_of_class(SurfaceClass target, Rng& rng,
                                         const CoefficientRange& range = {},
                                         double eps = kDefaultZeroThreshold);

/// Isotropic Gaussian noise with std `level * (bounding-box diagonal / 2)`.
PointCloud perturb(const PointCloud& cloud, double level, Rng& rng);

/// Builds one labelled sample from its own seed.
Sample make_sample(SurfaceClass target, std::uint64_t sample_seed, const DatasetSpec& spec);

/// samples_per_class samples of each class, interleaved by class. Sample i
/// uses seed splitmix64-derived from (spec.seed, i), so output does not
/// depend on `threads`.
std::vector<Sample> generate_dataset(const DatasetSpec& spec, unsigned threads = 1);

/// Binary dataset file ("CNN1", little-endian, CRC32 per record).
void write_dataset(const std::filesystem::path& path, const std::vector<Sample>& samples,
                   std::size_t patch_size);
std::vector<std::uint8_t> encode_dataset(const std::vector<Sample>& samples, std::size_t patch_size);

struct Dataset {
  std::size_t patch_size = 0;
  std::vector<Sample> samples;
};

/// Throws FormatVersionMismatch on a foreign magic or version and
/// CorruptRecord on truncation or checksum failure.
Dataset read_dataset(const std::filesystem::path& path);
Dataset decode_dataset(std::span<const std::uint8_t> bytes);

}  // namespace canonnet
