#include <random>

#include <benchmark/benchmark.h>

#include "canonnet/eval.hpp"
#include "canonnet/jacobi.hpp"

namespace canonnet {
namespace {

PointCloud patch(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  const QuadraticSurface s = sample_surface_of_class(SurfaceClass::Saddle, rng);
  return sample_surface_points(s, n, rng);
}

void BM_Jacobi(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  Rng rng(1);
  std::normal_distribution<double> g;
  Eigen::MatrixXd a(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) a(i, j) = a(j, i) = g(rng);
  }
  for (auto _ : state) benchmark::DoNotOptimize(jacobi_eigensolve(a));
}
BENCHMARK(BM_Jacobi)->Arg(8)->Arg(20)->Arg(32)->Arg(64);

void BM_Canonicalize(benchmark::State& state) {
  const PointCloud c = patch(static_cast<std::size_t>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(canonicalize(c));
}
BENCHMARK(BM_Canonicalize)->Arg(20)->Arg(50)->Arg(100);

void BM_Forward(benchmark::State& state) {
  const FeatureConfig f;
  const MlpModel m = MlpModel::initialized(f, MlpModel::default_hidden(), Activation::ReLU, 3);
  const FeatureVector x = extract_features(patch(f.patch_size, 4), f);
  for (auto _ : state) benchmark::DoNotOptimize(m.forward(x));
}
BENCHMARK(BM_Forward);

void BM_ForwardBatch(benchmark::State& state) {
  const FeatureConfig f;
  const MlpModel m = MlpModel::initialized(f, MlpModel::default_hidden(), Activation::ReLU, 3);
  const auto batch = static_cast<Eigen::Index>(state.range(0));
  Eigen::MatrixXd inputs(static_cast<Eigen::Index>(f.input_size()), batch);
  for (Eigen::Index i = 0; i < batch; ++i) {
    inputs.col(i) = extract_features(patch(f.patch_size, 10 + static_cast<std::uint64_t>(i)), f).values;
  }
  for (auto _ : state) benchmark::DoNotOptimize(m.forward_batch(inputs));
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_ForwardBatch)->Arg(32)->Arg(128);

void BM_Predict(benchmark::State& state) {
  const FeatureConfig f;
  const MlpModel m = MlpModel::initialized(f, MlpModel::default_hidden(), Activation::ReLU, 3);
  const PointCloud c = patch(f.patch_size, 5);
  for (auto _ : state) benchmark::DoNotOptimize(predict(m, c));
}
BENCHMARK(BM_Predict);

}  // namespace
}  // namespace canonnet

BENCHMARK_MAIN();
