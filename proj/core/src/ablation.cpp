#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "canonnet/errors.hpp"
#include "canonnet/eval.hpp"
#include "canonnet/parallel.hpp"

namespace canonnet {

namespace {

std::vector<Sample> balanced_samples(std::size_t count, std::size_t patch_size, std::uint64_t seed,
                                     const std::vector<double>& noise_levels, unsigned threads) {
  DatasetSpec spec;
  spec.samples_per_class = (count + kSurfaceClassCount - 1) / kSurfaceClassCount;
  spec.patch_size = patch_size;
  spec.seed = seed;
  spec.noise_levels = noise_levels;
  std::vector<Sample> out = generate_dataset(spec, threads);
  out.resize(count);
  return out;
}

void pose_randomly(std::vector<Sample>& samples, std::uint64_t seed) {
  for (std::size_t i = 0; i < samples.size(); ++i) {
    Rng rng = make_stream(seed, i);
    const RigidTransform xf(random_rotation(rng), Vec3::Zero());
    std::vector<std::size_t> order(static_cast<std::size_t>(samples[i].cloud.size()));
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    samples[i].cloud = apply_transform(samples[i].cloud, xf).reordered(order);
  }
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

std::vector<OrderingCell> ablate_ordering_robustness(const OrderingAblationConfig& config) {
  if (config.patches == 0) throw Error(ErrorKind::InvalidArgument, "no patches requested");
  const std::vector<Sample> clean =
      balanced_samples(config.patches, config.patch_size, config.seed, {0.0}, config.threads);

  const std::size_t levels = config.noise_levels.size();
  std::vector<PointCloud> noisy;
  noisy.reserve(clean.size() * levels);
  const std::uint64_t noise_seed = splitmix64(config.seed ^ 0x6e6f697365ULL);
  for (std::size_t p = 0; p < clean.size(); ++p) {
    for (std::size_t l = 0; l < levels; ++l) {
      Rng rng = make_stream(noise_seed, p * levels + l);
      noisy.push_back(perturb(clean[p].cloud, config.noise_levels[l], rng));
    }
  }

  std::vector<OrderingCell> cells;
  for (double t : config.temperatures) {
    for (LaplacianKind lap : config.laplacians) {
      CanonicalizeConfig canon;
      canon.temperature = t;
      canon.laplacian = lap;

      std::vector<std::optional<std::vector<std::size_t>>> base(clean.size());
      std::vector<std::optional<std::vector<std::size_t>>> moved(clean.size() * levels);
      parallel_for(clean.size(), config.threads, [&](std::size_t p) {
        try {
          base[p] = spectral_order(clean[p].cloud, canon).permutation;
        } catch (const Error&) {
        }
        for (std::size_t l = 0; l < levels; ++l) {
          try {
            moved[p * levels + l] = spectral_order(noisy[p * levels + l], canon).permutation;
          } catch (const Error&) {
          }
        }
      });

      for (std::size_t l = 0; l < levels; ++l) {
        OrderingCell cell;
        cell.temperature = t;
        cell.laplacian = lap;
        cell.noise = config.noise_levels[l];
        double total = 0.0;
        for (std::size_t p = 0; p < clean.size(); ++p) {
          const auto& b = base[p];
          const auto& m = moved[p * levels + l];
          if (!b || !m) {
            ++cell.skipped;
            continue;
          }
          total += permutation_agreement(*b, *m);
          ++cell.patches;
        }
        cell.consistency = cell.patches ? total / static_cast<double>(cell.patches) : 0.0;
        cells.push_back(cell);
      }
    }
  }
  return cells;
}

std::string ordering_table_csv(const std::vector<OrderingCell>& cells) {
  std::ostringstream os;
  os << "temperature,laplacian,noise,consistency,patches,skipped\n";
  for (const auto& c : cells) {
    os << format_double(c.temperature) << ','
       << (c.laplacian == LaplacianKind::Normalized ? "normalized" : "combinatorial") << ','
       << format_double(c.noise) << ',' << format_double(c.consistency) << ',' << c.patches << ','
       << c.skipped << '\n';
  }
  return os.str();
}

std::vector<PipelineVariant> default_pipeline_variants() {
  return {
      {"full", true, true, 0},
      {"no_canonicalization", false, true, 0},
      {"no_polynomial", true, false, 0},
      {"eigenvalues", true, true, 5},
  };
}

std::vector<PipelineCell> ablate_pipeline(const PipelineAblationConfig& config) {
  if (config.variants.empty() || config.seeds.empty() || config.noise_levels.empty()) {
    throw Error(ErrorKind::InvalidArgument, "pipeline ablation needs variants, seeds and noise levels");
  }
  std::vector<PipelineCell> cells;
  for (std::uint64_t seed : config.seeds) {
    std::vector<Sample> train_set =
        balanced_samples(config.train_per_class * kSurfaceClassCount, 20, splitmix64(seed),
                         config.noise_levels, config.threads);
    if (config.random_pose) pose_randomly(train_set, splitmix64(seed + 1));

    std::vector<std::vector<Sample>> test_sets;
    for (std::size_t l = 0; l < config.noise_levels.size(); ++l) {
      auto test = balanced_samples(config.test_per_class * kSurfaceClassCount, 20,
                                   splitmix64(splitmix64(seed) + 1000 + l), {config.noise_levels[l]},
                                   config.threads);
      if (config.random_pose) pose_randomly(test, splitmix64(seed + 2000 + l));
      test_sets.push_back(std::move(test));
    }

    for (const auto& variant : config.variants) {
      FeatureConfig features;
      features.canonicalize = variant.canonicalize;
      features.polynomial = variant.polynomial;
      features.eigenvalue_count = variant.eigenvalue_count;

      TrainConfig tc = config.train;
      tc.seed = seed;
      tc.threads = config.threads;
      const TrainResult trained = train(train_set, features, tc);

      for (std::size_t l = 0; l < config.noise_levels.size(); ++l) {
        const EvalReport report = evaluate(trained.model, test_sets[l], config.threads);
        PipelineCell cell;
        cell.variant = variant.name;
        cell.seed = seed;
        cell.noise = config.noise_levels[l];
        cell.accuracy = report.accuracy;
        cell.test_samples = report.samples;
        cells.push_back(cell);
      }
    }
  }
  return cells;
}

std::string pipeline_table_csv(const std::vector<PipelineCell>& cells) {
  std::ostringstream os;
  os << "variant,seed,noise,accuracy,test_samples\n";
  for (const auto& c : cells) {
    os << c.variant << ',' << c.seed << ',' << format_double(c.noise) << ','
       << format_double(c.accuracy) << ',' << c.test_samples << '\n';
  }
  return os.str();
}

double mean_accuracy(const std::vector<PipelineCell>& cells, const std::string& variant) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& c : cells) {
    if (c.variant == variant) {
      total += c.accuracy;
      ++n;
    }
  }
  if (n == 0) throw Error(ErrorKind::InvalidArgument, "no cells for variant " + variant);
  return total / static_cast<double>(n);
}

}  // namespace canonnet
