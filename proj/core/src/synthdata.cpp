#include "canonnet/synthdata.hpp"

#include <cmath>
#include <string>

#include "canonnet/errors.hpp"
#include "canonnet/parallel.hpp"

namespace canonnet {

QuadraticSurface sample_surface_of_class(SurfaceClass target, Rng& rng,
                                         const CoefficientRange& range, double eps) {
  if (!(range.hi > range.lo)) {
    throw Error(ErrorKind::InvalidArgument, "coefficient range is empty");
  }
  std::uniform_real_distribution<double> coef(range.lo, range.hi);
  QuadraticSurface s;

  if (target == SurfaceClass::Plane) {
    s.d = coef(rng);
    s.e = coef(rng);
    return s;
  }

  for (std::size_t draw = 0; draw < kMaxRejectionDraws; ++draw) {
    s.a = coef(rng);
    s.b = coef(rng);
    s.c = coef(rng);
    s.d = coef(rng);
    s.e = coef(rng);
    if (target == SurfaceClass::Valley) {
      if (!(s.a * s.b > 0.0)) continue;
      s.c = std::copysign(2.0 * std::sqrt(s.a * s.b), s.c);
      if (s.c < range.lo || s.c > range.hi) continue;
    }
    if (classify_surface(monge_curvature(s, 0.0, 0.0), eps) == target) return s;
  }
  throw Error(ErrorKind::RejectionLimit,
              "no " + std::string(to_string(target)) + " surface in " +
                  std::to_string(kMaxRejectionDraws) + " draws");
}

PointCloud perturb(const PointCloud& cloud, double level, Rng& rng) {
  if (level == 0.0) return cloud;
  const double sigma = level * 0.5 * cloud.bounding_box_diagonal();
  std::normal_distribution<double> gauss(0.0, sigma);
  Eigen::MatrixX3d m = cloud.matrix();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < 3; ++j) m(i, j) += gauss(rng);
  }
  return PointCloud(std::move(m));
}

Sample make_sample(SurfaceClass target, std::uint64_t sample_seed, const DatasetSpec& spec) {
  Rng rng(sample_seed);
  Sample s;
  s.seed = sample_seed;
  s.label = target;
  s.surface = sample_surface_of_class(target, rng, spec.coefficient_range, spec.label_eps);
  const CurvaturePair k = monge_curvature(s.surface, 0.0, 0.0);
  s.k_gt = k.gaussian;
  s.h_abs_gt = k.mean_abs;
  s.cloud = sample_surface_points(s.surface, spec.patch_size, rng);
  double level = 0.0;
  if (spec.noise_levels.size() == 1) {
    level = spec.noise_levels.front();
  } else if (spec.noise_levels.size() > 1) {
    std::uniform_int_distribution<std::size_t> pick(0, spec.noise_levels.size() - 1);
    level = spec.noise_levels[pick(rng)];
  }
  s.cloud = perturb(s.cloud, level, rng);
  return s;
}

std::vector<Sample> generate_dataset(const DatasetSpec& spec, unsigned threads) {
  if (spec.patch_size < 3) throw Error(ErrorKind::InvalidArgument, "patch_size must be >= 3");
  for (double level : spec.noise_levels) {
    if (!(level >= 0.0)) throw Error(ErrorKind::InvalidArgument, "noise level must be >= 0");
  }
  const std::size_t total = spec.samples_per_class * kSurfaceClassCount;
  std::vector<Sample> out(total);
  parallel_for(total, threads, [&](std::size_t i) {
    const auto target = static_cast<SurfaceClass>(i % kSurfaceClassCount);
    const std::uint64_t seed = splitmix64(splitmix64(spec.seed) + i);
    out[i] = make_sample(target, seed, spec);
  });
  return out;
}

}  // namespace canonnet
