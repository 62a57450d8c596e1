#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "canonnet/errors.hpp"
#include "canonnet/eval.hpp"
#include "canonnet/jacobi.hpp"
#include "canonnet/parallel.hpp"
#include "cli.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using namespace canonnet;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const Outcome& o, double secs) {
  std::printf("[%s] %2d %-28s %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(), secs);
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

void run_criterion(int id, const std::string& name, const std::function<Outcome()>& fn) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = fn();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  report(id, name, o, seconds_since(t0));
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

Outcome invariance() {
  const auto t0 = Clock::now();
  Rng rng(1001);
  std::size_t ordering_mismatch = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const PointCloud c = testing::random_patch(rng);
    const CanonicalPatch base = canonicalize(c);
    for (int p = 0; p < 10; ++p) {
      const std::vector<std::size_t> perm = testing::random_permutation(rng, c.size());
      const PointCloud shuffled = c.reordered(perm);
      for (int r = 0; r < 10; ++r) {
        const CanonicalPatch got = canonicalize(apply_transform(shuffled, testing::random_rigid(rng)));
        for (std::size_t i = 0; i < c.size(); ++i) {
          if (perm[got.permutation[i]] != base.permutation[i]) {
            ++ordering_mismatch;
            break;
          }
        }
        worst = std::max(worst, (got.canonical_points.matrix() - base.canonical_points.matrix())
                                    .cwiseAbs()
                                    .maxCoeff());
      }
    }
  }
  const double secs = seconds_since(t0);
  const bool ok = ordering_mismatch == 0 && worst <= 1e-6 && secs < 30.0;
  return {ok, "mismatched orderings " + std::to_string(ordering_mismatch) + ", max coord diff " +
                  fmt("%.2e", worst) + ", " + fmt("%.1fs", secs)};
}

std::vector<OrderingCell> ordering_cells;
double ordering_seconds = 0.0;

void run_ordering_ablation(unsigned threads) {
  OrderingAblationConfig cfg;
  cfg.patches = 1000;
  cfg.seed = 2024;
  cfg.threads = threads;
  const auto t0 = Clock::now();
  try {
    ordering_cells = ablate_ordering_robustness(cfg);
  } catch (const std::exception& e) {
    std::printf("ordering ablation failed: %s\n", e.what());
  }
  ordering_seconds = seconds_since(t0);
}

Outcome zero_noise_row() {
  std::size_t cells = 0, exact = 0, min_patches = ~std::size_t{0};
  for (const OrderingCell& c : ordering_cells) {
    if (c.noise != 0.0) continue;
    ++cells;
    if (c.consistency == 1.0) ++exact;
    min_patches = std::min(min_patches, c.patches - c.skipped);
  }
  const bool ok = cells > 0 && exact == cells && min_patches >= 200;
  return {ok, std::to_string(exact) + "/" + std::to_string(cells) + " cells at 1.0, min patches " +
                  std::to_string(min_patches)};
}

Outcome noise_trend() {
  const std::map<double, double> reference{{0.01, 83.0}, {0.03, 63.38}, {0.05, 51.05}, {0.07, 42.57}, {0.10, 34.57}};
  std::map<std::pair<double, int>, std::vector<std::pair<double, double>>> rows;
  for (const OrderingCell& c : ordering_cells) {
    rows[{c.temperature, static_cast<int>(c.laplacian)}].emplace_back(c.noise, 100.0 * c.consistency);
  }
  bool ok = ordering_seconds < 600.0;
  double worst_ref = 0.0;
  std::size_t monotone_breaks = 0;
  std::ostringstream target;
  for (auto& [key, row] : rows) {
    std::sort(row.begin(), row.end());
    for (std::size_t i = 1; i < row.size(); ++i) {
      if (!(row[i].second < row[i - 1].second + 1.0)) ++monotone_breaks;
    }
    if (key.first == 1.0 && key.second == static_cast<int>(LaplacianKind::Normalized)) {
      for (const auto& [noise, value] : row) {
        const auto it = reference.find(noise);
        if (it == reference.end()) continue;
        worst_ref = std::max(worst_ref, std::abs(value - it->second));
        target << fmt(" %.2f", value);
      }
    }
  }
  ok = ok && worst_ref <= 6.0 && monotone_breaks == 0;
  return {ok, "t=1 normalized row" + target.str() + ", max deviation " + fmt("%.2f", worst_ref) +
                  " points, monotonicity breaks " + std::to_string(monotone_breaks) + ", " +
                  fmt("%.1fs", ordering_seconds)};
}

MlpModel trained_model;
bool have_model = false;

Outcome curvature_errors_criterion(unsigned threads) {
  const auto t0 = Clock::now();
  DatasetSpec train_spec;
  train_spec.samples_per_class = 10000;
  train_spec.noise_levels = {0.0, 0.01, 0.03};
  train_spec.seed = 11;
  DatasetSpec test_spec;
  test_spec.samples_per_class = 500;
  test_spec.seed = 12;
  const FeatureConfig features;
  TrainConfig cfg;
  cfg.seed = 13;
  cfg.threads = threads;
  const TrainResult result = train(generate_dataset(train_spec, threads), features, cfg);
  trained_model = result.model;
  have_model = true;
  const std::vector<Sample> test = generate_dataset(test_spec, threads);
  const EvalReport rep = evaluate(trained_model, test, threads);
  const double secs = seconds_since(t0);
  const bool ok = rep.samples - rep.skipped >= 2000 && rep.curvature.d_k_rmse <= 2.0 &&
                  rep.curvature.d_h_rmse <= 0.3 && secs < 1800.0;
  return {ok, "d_k_rmse " + fmt("%.4f", rep.curvature.d_k_rmse) + ", d_h_rmse " + fmt("%.4f", rep.curvature.d_h_rmse) +
                  ", evaluated " + std::to_string(rep.samples - rep.skipped) + ", accuracy " +
                  fmt("%.4f", rep.accuracy)};
}

Outcome pipeline_directionality(unsigned threads) {
  PipelineAblationConfig cfg;
  cfg.threads = threads;
  const std::vector<PipelineCell> cells = ablate_pipeline(cfg);
  const double full = 100.0 * mean_accuracy(cells, "full");
  const double canon = full - 100.0 * mean_accuracy(cells, "no_canonicalization");
  const double poly = full - 100.0 * mean_accuracy(cells, "no_polynomial");
  const double eig = 100.0 * mean_accuracy(cells, "eigenvalues") - full;
  const bool ok = canon >= 3.0 && poly >= 1.0 && std::abs(eig) <= 2.0;
  return {ok, "canonicalization " + fmt("%+.2f", canon) + ", polynomial " + fmt("%+.2f", poly) +
                  ", eigenvalues " + fmt("%+.2f", eig) + " points"};
}

Outcome eigensolver_oracle() {
  Rng rng(6006);
  std::uniform_int_distribution<int> dim(1, 32);
  double worst_residual = 0.0, worst_orth = 0.0;
  std::size_t bad = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Eigen::MatrixXd a = testing::random_symmetric(rng, dim(rng));
    const EigenDecomposition e = jacobi_eigensolve(a);
    const double fro = a.norm();
    double residual = 0.0;
    for (Eigen::Index k = 0; k < a.rows(); ++k) {
      residual = std::max(residual, (a * e.vectors.col(k) - e.values(k) * e.vectors.col(k)).norm());
    }
    const double orth =
        (e.vectors.transpose() * e.vectors - Eigen::MatrixXd::Identity(a.rows(), a.rows())).cwiseAbs().maxCoeff();
    if (residual > 1e-9 * fro || orth > 1e-10) ++bad;
    worst_residual = std::max(worst_residual, residual / fro);
    worst_orth = std::max(worst_orth, orth);
  }
  return {bad == 0, "max residual/|A|_F " + fmt("%.2e", worst_residual) + ", max orthogonality " +
                        fmt("%.2e", worst_orth) + ", failures " + std::to_string(bad)};
}

Outcome gradient_oracle() {
  Rng rng(7007);
  std::uniform_int_distribution<int> cls(0, 3);
  std::normal_distribution<double> g;
  const FeatureConfig features;
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const Activation act = trial % 2 ? Activation::Tanh : Activation::ReLU;
    const MlpModel m = MlpModel::initialized(features, MlpModel::default_hidden(), act, 500 + trial);
    const FeatureVector f = extract_features(testing::random_patch(rng), features);
    const Eigen::MatrixXd x = f.values;
    const std::vector<Target> t{{static_cast<SurfaceClass>(cls(rng)), 2 * g(rng), std::abs(g(rng))}};
    const LossWeights w{0.5, 0.5};
    const LossAndGradient lg = loss_and_gradient(m, x, t, w);
    MlpModel probe = m;
    const Eigen::VectorXd p0 = m.flat_parameters();
    Eigen::VectorXd fd(p0.size());
    const double h = 1e-5;
    for (Eigen::Index i = 0; i < p0.size(); ++i) {
      Eigen::VectorXd p = p0;
      p(i) += h;
      probe.set_flat_parameters(p);
      const double up = loss(probe.forward(f), t[0], w);
      p(i) -= 2 * h;
      probe.set_flat_parameters(p);
      const double down = loss(probe.forward(f), t[0], w);
      fd(i) = (up - down) / (2 * h);
    }
    worst = std::max(worst, (lg.gradient - fd).norm() / std::max(1e-12, lg.gradient.norm() + fd.norm()));
  }
  return {worst < 1e-4, "max relative error " + fmt("%.2e", worst) + " over 50 cases"};
}

Outcome parameter_budget() {
  const MlpModel m(FeatureConfig{}, MlpModel::default_hidden());
  return {m.param_count() <= 35000, "param_count " + std::to_string(m.param_count())};
}

Outcome scene_fmr(unsigned threads) {
  if (!have_model) return {false, "no trained model available"};
  constexpr int kScenes = 50;
  MatchConfig mc;
  mc.threads = threads;
  double identity = 0.0, noisy = 0.0, unrelated = 0.0;
  for (int s = 0; s < kScenes; ++s) {
    Rng rng = make_stream(9009, static_cast<std::uint64_t>(s));
    const PointCloud src = make_scene(rng);
    const double tau = 2.0 * mean_nearest_neighbor_spacing(src);
    identity += feature_match_recall(src, src, RigidTransform(), trained_model, tau, mc).fmr;

    const RigidTransform gt = testing::random_rigid(rng, 1.0);
    const PointCloud moved = perturb(apply_transform(src, gt.inverse()), 0.005, rng);
    noisy += feature_match_recall(src, moved, gt, trained_model, tau, mc).fmr;

    const PointCloud other = make_scene(rng);
    unrelated += feature_match_recall(src, other, testing::random_rigid(rng, 1.0), trained_model, tau, mc).fmr;
  }
  identity /= kScenes;
  noisy /= kScenes;
  unrelated /= kScenes;
  const bool ok = identity == 1.0 && noisy >= 0.6 && unrelated < 0.2;
  return {ok, "identity " + fmt("%.4f", identity) + ", noisy+rigid " + fmt("%.4f", noisy) + ", unrelated " +
                  fmt("%.4f", unrelated) + " over " + std::to_string(kScenes) + " scenes"};
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "canonnet");
  return cli::run(args);
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

std::size_t differing_files(const fs::path& a, const fs::path& b, std::size_t& compared) {
  std::size_t diff = 0;
  for (const auto& entry : fs::directory_iterator(a)) {
    ++compared;
    const fs::path other = b / entry.path().filename();
    if (!fs::exists(other) || slurp(entry.path()) != slurp(other)) ++diff;
  }
  return diff;
}

Outcome cli_determinism() {
  const fs::path root = fs::temp_directory_path() / "canonnet_acceptance_cli";
  fs::remove_all(root);
  fs::create_directories(root);

  std::ostringstream pts;
  pts.precision(17);
  for (int i = 0; i < 150; ++i) {
    const double x = std::sin(0.37 * i) * 0.5, y = std::cos(1.13 * i) * 0.5;
    pts << x << ' ' << y << ' ' << 0.3 * x * x - 0.2 * y * y << '\n';
  }
  std::ofstream(root / "cloud.txt") << pts.str();
  std::ofstream(root / "patch.txt") << [] {
    std::ostringstream p;
    p.precision(17);
    Rng rng(10010);
    const PointCloud c = testing::random_patch(rng);
    for (std::size_t i = 0; i < c.size(); ++i) {
      const Vec3 v = c.point(static_cast<Eigen::Index>(i));
      p << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
    }
    return p.str();
  }();

  const std::string n_threads = std::to_string(std::max(4u, resolve_threads(0)));
  std::size_t compared = 0, diff = 0, nonzero = 0;
  std::vector<std::string> failed;
  auto both = [&](const std::string& name, const std::vector<std::string>& args) {
    fs::path outs[2];
    const std::string threads[2] = {"1", n_threads};
    for (int k = 0; k < 2; ++k) {
      outs[k] = root / (name + "_t" + threads[k]);
      fs::create_directories(outs[k]);
      std::vector<std::string> full = args;
      full.insert(full.end(), {"--seed", "17", "--threads", threads[k], "--out", outs[k].string()});
      if (cli(full) != 0) ++nonzero;
    }
    const std::size_t d = differing_files(outs[0], outs[1], compared);
    if (d) failed.push_back(name);
    diff += d;
    return outs[0];
  };

  const fs::path data = both("generate", {"generate", "--samples-per-class", "40", "--noise", "0,0.01"});
  const fs::path model = both("train", {"train", "--data", (data / "dataset.cnn").string(), "--epochs", "3",
                                        "--batch-size", "32"});
  both("eval", {"eval", "--model", (model / "model.cnm").string(), "--data", (data / "dataset.cnn").string()});
  both("canon", {"canon", "--input", (root / "patch.txt").string()});
  both("descriptor", {"descriptor", "--model", (model / "model.cnm").string(), "--input",
                      (root / "cloud.txt").string()});
  both("ablate", {"ablate", "--kind", "all", "--patches", "20", "--train-per-class", "20", "--test-per-class", "10",
                  "--epochs", "2", "--seeds", "1,2"});
  fs::remove_all(root);

  std::string names;
  for (const std::string& f : failed) names += " " + f;
  const bool ok = diff == 0 && nonzero == 0 && compared > 0;
  return {ok, std::to_string(compared) + " files compared, " + std::to_string(diff) + " differ" +
                  (names.empty() ? "" : " in" + names) + ", nonzero exits " + std::to_string(nonzero)};
}

}  // namespace

int main() {
  const unsigned threads = resolve_threads(0);
  run_criterion(1, "invariance", invariance);
  run_ordering_ablation(threads);
  run_criterion(2, "zero-noise consistency", zero_noise_row);
  run_criterion(3, "ordering noise trend", noise_trend);
  run_criterion(4, "curvature errors", [&] { return curvature_errors_criterion(threads); });
  run_criterion(5, "pipeline ablation direction", [&] { return pipeline_directionality(threads); });
  run_criterion(6, "eigensolver oracle", eigensolver_oracle);
  run_criterion(7, "gradient oracle", gradient_oracle);
  run_criterion(8, "parameter budget", parameter_budget);
  run_criterion(9, "synthetic scene FMR", [&] { return scene_fmr(threads); });
  run_criterion(10, "CLI determinism", cli_determinism);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
