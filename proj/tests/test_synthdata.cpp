#include <Eigen/QR>
#include <gtest/gtest.h>

#include "canonnet/errors.hpp"
#include "canonnet/synthdata.hpp"
#include "test_support.hpp"

namespace canonnet {
namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::Io;
}

// Least-squares fit of z = a x^2 + b y^2 + c xy + d x + e y to the points.
QuadraticSurface fit_quadratic(const PointCloud& c) {
  Eigen::MatrixXd a(c.size(), 5);
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    const Vec3 p = c.point(i);
    a.row(i) << p.x() * p.x(), p.y() * p.y(), p.x() * p.y(), p.x(), p.y();
  }
  const Eigen::VectorXd coef = a.colPivHouseholderQr().solve(c.matrix().col(2));
  return {coef(0), coef(1), coef(2), coef(3), coef(4)};
}

TEST(SampleSurfaceOfClass, Plane) {
  Rng rng(41);
  const QuadraticSurface s = sample_surface_of_class(SurfaceClass::Plane, rng);
  const CurvaturePair k = monge_curvature(s, 0, 0);
  EXPECT_EQ(k.gaussian, 0.0);
  EXPECT_EQ(k.mean, 0.0);
}

TEST(SampleSurfaceOfClass, SaddleSign) {
  Rng rng(42);
  for (int i = 0; i < 200; ++i) {
    const QuadraticSurface s = sample_surface_of_class(SurfaceClass::Saddle, rng);
    EXPECT_LT(4 * s.a * s.b - s.c * s.c, 0.0);
  }
}

TEST(SampleSurfaceOfClass, LabelsReclassify) {
  Rng rng(43);
  for (int c = 0; c < kSurfaceClassCount; ++c) {
    const auto cls = static_cast<SurfaceClass>(c);
    for (int i = 0; i < 1000; ++i) {
      const QuadraticSurface s = sample_surface_of_class(cls, rng);
      EXPECT_EQ(classify_surface(monge_curvature(s, 0, 0)), cls);
      for (double v : {s.a, s.b, s.c, s.d, s.e}) {
        EXPECT_GE(v, -1.0);
        EXPECT_LE(v, 1.0);
      }
    }
  }
}

TEST(SampleSurfaceOfClass, RejectionLimit) {
  Rng rng(44);
  EXPECT_EQ(kind_of([&] { sample_surface_of_class(SurfaceClass::Saddle, rng, {0.5, 0.6}); }),
            ErrorKind::RejectionLimit);
}

TEST(GenerateDataset, BalancedAndLabelled) {
  DatasetSpec spec;
  spec.samples_per_class = 100;
  spec.seed = 45;
  const auto samples = generate_dataset(spec);
  ASSERT_EQ(samples.size(), 400u);
  std::array<int, kSurfaceClassCount> counts{};
  for (const auto& s : samples) {
    ++counts[static_cast<std::size_t>(s.label)];
    const CurvaturePair k = monge_curvature(s.surface, 0, 0);
    EXPECT_EQ(s.label, classify_surface(k));
    EXPECT_EQ(s.k_gt, k.gaussian);
    EXPECT_EQ(s.h_abs_gt, k.mean_abs);
    EXPECT_EQ(s.cloud.size(), 20);
    EXPECT_LE(s.cloud.matrix().leftCols(2).cwiseAbs().maxCoeff(), 0.5);
  }
  for (int c : counts) EXPECT_EQ(c, 100);
}

TEST(GenerateDataset, DeterministicAcrossThreads) {
  DatasetSpec spec;
  spec.samples_per_class = 50;
  spec.seed = 46;
  spec.noise_levels = {0.0, 0.01, 0.03};
  const auto a = encode_dataset(generate_dataset(spec, 1), 20);
  EXPECT_EQ(a, encode_dataset(generate_dataset(spec, 1), 20));
  EXPECT_EQ(a, encode_dataset(generate_dataset(spec, 4), 20));
  spec.seed = 47;
  EXPECT_NE(a, encode_dataset(generate_dataset(spec, 1), 20));
}

TEST(GenerateDataset, LeastSquaresFitRecoversLabels) {
  DatasetSpec spec;
  spec.samples_per_class = 250;
  spec.seed = 48;
  const auto samples = generate_dataset(spec);
  int agree = 0;
  for (const auto& s : samples) {
    agree += classify_surface(monge_curvature(fit_quadratic(s.cloud), 0, 0), 1e-3) == s.label;
  }
  EXPECT_GE(agree, static_cast<int>(0.99 * static_cast<double>(samples.size())));
}

TEST(Perturb, NoiseScale) {
  Rng rng(49);
  const PointCloud c = testing::random_patch(rng, 2000);
  EXPECT_EQ(perturb(c, 0.0, rng), c);
  const double level = 0.02;
  const Eigen::MatrixX3d diff = perturb(c, level, rng).matrix() - c.matrix();
  const double sd = std::sqrt(diff.squaredNorm() / static_cast<double>(diff.size()));
  EXPECT_NEAR(sd, level * 0.5 * c.bounding_box_diagonal(), 0.05 * sd);
}

TEST(DatasetIo, RoundTrip) {
  DatasetSpec spec;
  spec.samples_per_class = 10;
  spec.seed = 50;
  spec.noise_levels = {0.01};
  const auto samples = generate_dataset(spec);
  const Dataset back = decode_dataset(encode_dataset(samples, 20));
  ASSERT_EQ(back.samples.size(), samples.size());
  EXPECT_EQ(back.patch_size, 20u);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    EXPECT_EQ(back.samples[i].cloud, samples[i].cloud);
    EXPECT_EQ(back.samples[i].surface, samples[i].surface);
    EXPECT_EQ(back.samples[i].label, samples[i].label);
    EXPECT_EQ(back.samples[i].k_gt, samples[i].k_gt);
    EXPECT_EQ(back.samples[i].h_abs_gt, samples[i].h_abs_gt);
    EXPECT_EQ(back.samples[i].seed, samples[i].seed);
  }
}

TEST(DatasetIo, EmptyList) {
  const Dataset d = decode_dataset(encode_dataset({}, 20));
  EXPECT_TRUE(d.samples.empty());
}

TEST(DatasetIo, DetectsDamage) {
  DatasetSpec spec;
  spec.samples_per_class = 2;
  const auto bytes = encode_dataset(generate_dataset(spec), 20);

  auto truncated = bytes;
  truncated.resize(bytes.size() - 7);
  EXPECT_EQ(kind_of([&] { decode_dataset(truncated); }), ErrorKind::CorruptRecord);

  auto flipped = bytes;
  flipped[40] ^= 0x10;
  EXPECT_EQ(kind_of([&] { decode_dataset(flipped); }), ErrorKind::CorruptRecord);

  auto magic = bytes;
  magic[0] = 'X';
  EXPECT_EQ(kind_of([&] { decode_dataset(magic); }), ErrorKind::FormatVersionMismatch);

  auto version = bytes;
  version[4] = 2;
  EXPECT_EQ(kind_of([&] { decode_dataset(version); }), ErrorKind::FormatVersionMismatch);
}

}  // namespace
}  // namespace canonnet
