#include "cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "canonnet/binary_io.hpp"
#include "canonnet/eval.hpp"
#include "canonnet/parallel.hpp"

namespace canonnet::cli {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code_for(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidArgument:
      return kExitConfig;
    case ErrorKind::DegenerateSpectrum:
    case ErrorKind::SignAmbiguous:
    case ErrorKind::TiedEmbedding:
    case ErrorKind::DegenerateCentroid:
    case ErrorKind::DegenerateLandmark:
    case ErrorKind::NoConvergence:
    case ErrorKind::Diverged:
      return kExitNumerical;
    case ErrorKind::DegenerateInput:
    case ErrorKind::RejectionLimit:
    case ErrorKind::FormatVersionMismatch:
    case ErrorKind::CorruptRecord:
    case ErrorKind::ShapeMismatch:
    case ErrorKind::NoCorrespondences:
    case ErrorKind::Io:
      return kExitData;
  }
  return kExitData;
}

namespace {

struct Common {
  std::string out;
  std::uint64_t seed = 0;
  unsigned threads = 0;
};

// Options that do not influence results and stay out of the resolved config.
bool is_run_local(const CLI::Option* opt) {
  const std::string& name = opt->get_lnames().front();
  return name == "help" || name == "threads" || name == "out";
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--out", c.out, "Existing output directory")->required();
  sub->add_option("--seed", c.seed, "Master seed");
  sub->add_option("--threads", c.threads, "Worker threads (0 = all cores)");
}

std::string resolved_config(const CLI::App* sub) {
  std::ostringstream os;
  os << '[' << sub->get_name() << "]\n";
  for (const CLI::Option* opt : sub->get_options()) {
    if (opt->get_lnames().empty() || is_run_local(opt)) continue;
    std::string value;
    if (opt->count() > 0) {
      const auto& results = opt->results();
      for (std::size_t i = 0; i < results.size(); ++i) value += (i ? "," : "") + results[i];
    } else {
      value = opt->get_default_str();
    }
    os << opt->get_lnames().front() << "=\"" << value << "\"\n";
  }
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::Io, "cannot write " + path.string());
  f << text;
  if (!f) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

fs::path output_dir(const Common& c) {
  const fs::path dir(c.out);
  if (!fs::is_directory(dir)) throw Error(ErrorKind::Io, "output directory does not exist: " + c.out);
  return dir;
}

std::string hex32(std::uint32_t v) {
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", v);
  return buf;
}

std::uint32_t text_crc(const std::string& s) {
  return crc32({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
}

template <class T>
std::vector<T> parse_list(const std::string& text, const char* what) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::istringstream is(item);
    T v{};
    if (!(is >> v) || !(is >> std::ws).eof()) {
      throw Error(ErrorKind::InvalidArgument, std::string("bad ") + what + " list: " + text);
    }
    out.push_back(v);
  }
  if (out.empty()) throw Error(ErrorKind::InvalidArgument, std::string("empty ") + what + " list");
  return out;
}

LaplacianKind parse_laplacian(const std::string& s) {
  if (s == "normalized") return LaplacianKind::Normalized;
  if (s == "combinatorial") return LaplacianKind::Combinatorial;
  throw Error(ErrorKind::InvalidArgument, "unknown laplacian: " + s);
}

const char* laplacian_name(LaplacianKind k) {
  return k == LaplacianKind::Normalized ? "normalized" : "combinatorial";
}

TranslationAnchor parse_anchor(const std::string& s) {
  if (s == "degree") return TranslationAnchor::DegreeWeightedCentroid;
  if (s == "none") return TranslationAnchor::None;
  throw Error(ErrorKind::InvalidArgument, "unknown anchor: " + s);
}

PointCloud read_points(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorKind::Io, "cannot open " + path);
  std::vector<Vec3> pts;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream is(line);
    Vec3 p;
    if (!(is >> p.x() >> p.y() >> p.z()) || !(is >> std::ws).eof()) {
      throw Error(ErrorKind::CorruptRecord, path + ":" + std::to_string(lineno) + ": expected \"x y z\"");
    }
    pts.push_back(p);
  }
  return PointCloud::from_points(pts);
}

json matrix_json(const Mat3& m) {
  json rows = json::array();
  for (int r = 0; r < 3; ++r) rows.push_back({m(r, 0), m(r, 1), m(r, 2)});
  return rows;
}

json class_names() {
  json names = json::array();
  for (int c = 0; c < kSurfaceClassCount; ++c) {
    names.push_back(std::string(to_string(static_cast<SurfaceClass>(c))));
  }
  return names;
}

// ---------------------------------------------------------------------------

struct GenerateArgs {
  std::size_t samples_per_class = 100;
  std::size_t patch_size = 20;
  std::string noise = "0";
  double coef_min = -1.0;
  double coef_max = 1.0;
};

int cmd_generate(const CLI::App* sub, const Common& c, const GenerateArgs& a) {
  const fs::path dir = output_dir(c);
  DatasetSpec spec;
  spec.samples_per_class = a.samples_per_class;
  spec.patch_size = a.patch_size;
  spec.noise_levels = parse_list<double>(a.noise, "noise");
  spec.coefficient_range = {a.coef_min, a.coef_max};
  spec.seed = c.seed;
  if (spec.patch_size < 3 || !(a.coef_min < a.coef_max)) {
    throw Error(ErrorKind::InvalidArgument, "patch-size must be >= 3 and coef-min < coef-max");
  }

  const std::string config = resolved_config(sub);
  const auto samples = generate_dataset(spec, resolve_threads(c.threads));
  write_dataset(dir / "dataset.cnn", samples, spec.patch_size);

  json counts = json::object();
  std::array<std::size_t, kSurfaceClassCount> per{};
  for (const auto& s : samples) ++per[static_cast<std::size_t>(s.label)];
  for (int k = 0; k < kSurfaceClassCount; ++k) {
    counts[std::string(to_string(static_cast<SurfaceClass>(k)))] = per[static_cast<std::size_t>(k)];
  }
  write_json(dir / "manifest.json", {{"command", "generate"},
                                     {"seed", c.seed},
                                     {"records", samples.size()},
                                     {"patch_size", spec.patch_size},
                                     {"class_counts", counts},
                                     {"spec_hash", hex32(text_crc(config))},
                                     {"dataset", "dataset.cnn"}});
  write_text(dir / "config.ini", config);
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::string resume;
  std::size_t epochs = 200;
  std::size_t batch_size = 128;
  double lr = 1e-3;
  double w_cls = 0.5;
  double w_reg = 0.5;
  std::string optimizer = "adam";
  std::string hidden = "128,64";
  std::string activation = "relu";
  bool cosine = false;
  bool canonicalize = true;
  bool polynomial = true;
  std::size_t eigenvalues = 0;
  double temperature = 1.0;
  std::string laplacian = "normalized";
};

int cmd_train(const CLI::App* sub, const Common& c, const TrainArgs& a) {
  const fs::path dir = output_dir(c);
  TrainConfig tc;
  tc.learning_rate = a.lr;
  tc.batch_size = a.batch_size;
  tc.epochs = a.epochs;
  tc.weights = {a.w_cls, a.w_reg};
  if (a.optimizer == "adam") {
    tc.optimizer = OptimizerKind::Adam;
  } else if (a.optimizer == "sgd") {
    tc.optimizer = OptimizerKind::Sgd;
  } else {
    throw Error(ErrorKind::InvalidArgument, "unknown optimizer: " + a.optimizer);
  }
  tc.hidden = parse_list<std::size_t>(a.hidden, "hidden");
  tc.activation = parse_activation(a.activation);
  tc.cosine_schedule = a.cosine;
  tc.seed = c.seed;
  tc.threads = resolve_threads(c.threads);
  tc.validate();

  const Dataset data = read_dataset(a.data);
  FeatureConfig features;
  std::optional<TrainResult> resume;
  if (!a.resume.empty()) {
    Checkpoint ck = load_checkpoint(a.resume, data.patch_size);
    if (!ck.optimizer) throw Error(ErrorKind::CorruptRecord, "checkpoint has no optimizer state");
    features = ck.model.features();
    resume = TrainResult{std::move(ck.model), std::move(*ck.optimizer), {}, {}};
  } else {
    features.patch_size = data.patch_size;
    features.canonicalize = a.canonicalize;
    features.polynomial = a.polynomial;
    features.eigenvalue_count = a.eigenvalues;
    features.canon.temperature = a.temperature;
    features.canon.laplacian = parse_laplacian(a.laplacian);
  }

  const std::string config = resolved_config(sub);
  const TrainingSet set = prepare_training_set(data.samples, features, tc.threads);
  const std::uint64_t first_epoch = resume ? resume->optimizer.epoch : 0;
  const TrainResult r = train(set, features, tc, resume ? &*resume : nullptr);

  save_model(dir / "model.cnm", r.model, &r.optimizer);
  std::ostringstream csv;
  csv << "epoch,loss\n";
  char buf[64];
  for (std::size_t e = 0; e < r.epoch_losses.size(); ++e) {
    std::snprintf(buf, sizeof buf, "%llu,%.17g\n", static_cast<unsigned long long>(first_epoch + e + 1),
                  r.epoch_losses[e]);
    csv << buf;
  }
  write_text(dir / "loss.csv", csv.str());
  write_json(dir / "manifest.json", {{"command", "train"},
                                     {"seed", c.seed},
                                     {"records", data.samples.size()},
                                     {"kept", set.kept.size()},
                                     {"skipped", data.samples.size() - set.kept.size()},
                                     {"epochs_total", r.optimizer.epoch},
                                     {"steps_total", r.optimizer.step},
                                     {"final_loss", r.epoch_losses.empty() ? 0.0 : r.epoch_losses.back()},
                                     {"param_count", r.model.param_count()},
                                     {"spec_hash", hex32(text_crc(config))},
                                     {"model", "model.cnm"}});
  write_text(dir / "config.ini", config);
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string model;
  std::string data;
};

int cmd_eval(const CLI::App* sub, const Common& c, const EvalArgs& a) {
  const fs::path dir = output_dir(c);
  const Dataset data = read_dataset(a.data);
  const MlpModel model = load_model(a.model, data.patch_size);
  const EvalReport rep = evaluate(model, data.samples, resolve_threads(c.threads));

  json confusion = json::array();
  for (const auto& row : rep.confusion) confusion.push_back(row);
  write_json(dir / "report.json", {{"samples", rep.samples},
                                   {"skipped", rep.skipped},
                                   {"accuracy", rep.accuracy},
                                   {"d_k_rmse", rep.curvature.d_k_rmse},
                                   {"d_h_rmse", rep.curvature.d_h_rmse},
                                   {"classes", class_names()},
                                   {"confusion", confusion}});

  std::ostringstream csv;
  char buf[160];
  csv << "metric,value\n";
  std::snprintf(buf, sizeof buf, "samples,%zu\nskipped,%zu\n", rep.samples, rep.skipped);
  csv << buf;
  std::snprintf(buf, sizeof buf, "accuracy,%.17g\nd_k_rmse,%.17g\nd_h_rmse,%.17g\n", rep.accuracy,
                rep.curvature.d_k_rmse, rep.curvature.d_h_rmse);
  csv << buf;
  for (int t = 0; t < kSurfaceClassCount; ++t) {
    for (int p = 0; p < kSurfaceClassCount; ++p) {
      csv << "confusion_" << to_string(static_cast<SurfaceClass>(t)) << '_'
          << to_string(static_cast<SurfaceClass>(p)) << ','
          << rep.confusion[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)] << '\n';
    }
  }
  write_text(dir / "report.csv", csv.str());
  write_text(dir / "config.ini", resolved_config(sub));
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct CanonArgs {
  std::string input;
  double temperature = 1.0;
  std::string laplacian = "normalized";
  std::string anchor = "degree";
  bool self_loops = false;
};

int cmd_canon(const CLI::App* sub, const Common& c, const CanonArgs& a) {
  const fs::path dir = output_dir(c);
  CanonicalizeConfig cfg;
  cfg.temperature = a.temperature;
  cfg.laplacian = parse_laplacian(a.laplacian);
  cfg.anchor = parse_anchor(a.anchor);
  cfg.self_loops = a.self_loops;
  write_text(dir / "config.ini", resolved_config(sub));

  const PointCloud cloud = read_points(a.input);
  CanonicalPatch patch;
  try {
    patch = canonicalize(cloud, cfg);
  } catch (const Error& e) {
    write_json(dir / "canon.json", {{"error", to_string(e.kind())}, {"message", e.what()}});
    throw;
  }

  json pts = json::array();
  std::ostringstream txt;
  char buf[96];
  for (Eigen::Index i = 0; i < patch.canonical_points.size(); ++i) {
    const Vec3 p = patch.canonical_points.point(i);
    pts.push_back({p.x(), p.y(), p.z()});
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", p.x(), p.y(), p.z());
    txt << buf;
  }
  write_json(dir / "canon.json", {{"points", patch.canonical_points.size()},
                                  {"permutation", patch.permutation},
                                  {"canonical_points", pts},
                                  {"r1", matrix_json(patch.r1)},
                                  {"r2", matrix_json(patch.r2)},
                                  {"anchor", {patch.anchor.x(), patch.anchor.y(), patch.anchor.z()}},
                                  {"fiedler_eigenvalue", patch.embedding.eigenvalue},
                                  {"spectral_gap", patch.embedding.spectral_gap}});
  write_text(dir / "canonical.txt", txt.str());
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct DescriptorArgs {
  std::string model;
  std::string input;
  std::string resolutions = "100,50,20";
  long long center = -1;
  bool normalize_scale = true;
};

int cmd_descriptor(const CLI::App* sub, const Common& c, const DescriptorArgs& a) {
  const fs::path dir = output_dir(c);
  DescriptorConfig cfg;
  cfg.resolutions = parse_list<std::size_t>(a.resolutions, "resolutions");
  cfg.normalize_scale = a.normalize_scale;
  const MlpModel model = load_model(a.model);
  const PointCloud cloud = read_points(a.input);
  if (a.center >= static_cast<long long>(cloud.size())) {
    throw Error(ErrorKind::InvalidArgument, "center index out of range");
  }
  const std::size_t center =
      a.center < 0 ? central_point(cloud) : static_cast<std::size_t>(a.center);
  const Descriptor d = describe_point(cloud, center, model, cfg);

  std::vector<double> values(d.values.data(), d.values.data() + d.values.size());
  write_json(dir / "descriptor.json", {{"center", center},
                                       {"resolutions", cfg.resolutions},
                                       {"values", values},
                                       {"missing", d.missing}});
  std::ostringstream csv;
  csv << "level,resolution,logit_plane,logit_parabolic,logit_valley,logit_saddle,k,h_abs,missing\n";
  char buf[64];
  for (std::size_t l = 0; l < cfg.resolutions.size(); ++l) {
    csv << l << ',' << cfg.resolutions[l];
    for (std::size_t j = 0; j < kOutputsPerLevel; ++j) {
      std::snprintf(buf, sizeof buf, ",%.17g", values[l * kOutputsPerLevel + j]);
      csv << buf;
    }
    csv << ',' << (d.missing[l] ? 1 : 0) << '\n';
  }
  write_text(dir / "descriptor.csv", csv.str());
  write_text(dir / "config.ini", resolved_config(sub));
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct AblateArgs {
  std::string kind = "all";
  std::size_t patches = 210;
  std::size_t patch_size = 20;
  std::string temperatures = "0.5,1,2,5";
  std::string laplacians = "normalized,combinatorial";
  std::string noise = "0,0.01,0.03,0.05,0.07,0.1";
  std::size_t train_per_class = 2000;
  std::size_t test_per_class = 500;
  std::string seeds = "1,2,3";
  std::size_t epochs = 200;
  std::string pipeline_noise = "0,0.01,0.03";
  bool random_pose = true;
};

int cmd_ablate(const CLI::App* sub, const Common& c, const AblateArgs& a) {
  const fs::path dir = output_dir(c);
  if (a.kind != "ordering" && a.kind != "pipeline" && a.kind != "all") {
    throw Error(ErrorKind::InvalidArgument, "kind must be ordering, pipeline or all");
  }
  const unsigned threads = resolve_threads(c.threads);
  const std::string config = resolved_config(sub);
  json summary = {{"command", "ablate"}, {"seed", c.seed}, {"spec_hash", hex32(text_crc(config))}};

  if (a.kind != "pipeline") {
    OrderingAblationConfig oc;
    oc.temperatures = parse_list<double>(a.temperatures, "temperature");
    oc.laplacians.clear();
    std::stringstream ss(a.laplacians);
    for (std::string item; std::getline(ss, item, ',');) oc.laplacians.push_back(parse_laplacian(item));
    oc.noise_levels = parse_list<double>(a.noise, "noise");
    oc.patches = a.patches;
    oc.patch_size = a.patch_size;
    oc.seed = c.seed;
    oc.threads = threads;
    const auto cells = ablate_ordering_robustness(oc);
    write_text(dir / "ordering.csv", ordering_table_csv(cells));
    json rows = json::array();
    for (const auto& cell : cells) {
      rows.push_back({{"temperature", cell.temperature},
                      {"laplacian", laplacian_name(cell.laplacian)},
                      {"noise", cell.noise},
                      {"consistency", cell.consistency},
                      {"patches", cell.patches},
                      {"skipped", cell.skipped}});
    }
    summary["ordering"] = rows;
  }

  if (a.kind != "ordering") {
    PipelineAblationConfig pc;
    pc.noise_levels = parse_list<double>(a.pipeline_noise, "pipeline-noise");
    pc.train_per_class = a.train_per_class;
    pc.test_per_class = a.test_per_class;
    pc.seeds.clear();
    for (std::uint64_t s : parse_list<std::uint64_t>(a.seeds, "seed")) pc.seeds.push_back(s + c.seed);
    pc.train.epochs = a.epochs;
    pc.random_pose = a.random_pose;
    pc.threads = threads;
    const auto cells = ablate_pipeline(pc);
    write_text(dir / "pipeline.csv", pipeline_table_csv(cells));
    json means = json::object();
    for (const auto& v : pc.variants) means[v.name] = mean_accuracy(cells, v.name);
    summary["pipeline_mean_accuracy"] = means;
  }

  write_json(dir / "summary.json", summary);
  write_text(dir / "config.ini", config);
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Spectral canonicalization and curvature learning for point-cloud patches", "canonnet"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "Key-value config file with one [subcommand] section; flags override it");

  Common common;
  GenerateArgs gen;
  TrainArgs tr;
  EvalArgs ev;
  CanonArgs ca;
  DescriptorArgs de;
  AblateArgs ab;

  auto* g = app.add_subcommand("generate", "Write a labelled synthetic dataset");
  add_common(g, common);
  g->add_option("--samples-per-class", gen.samples_per_class);
  g->add_option("--patch-size", gen.patch_size);
  g->add_option("--noise", gen.noise, "Comma-separated relative noise levels");
  g->add_option("--coef-min", gen.coef_min);
  g->add_option("--coef-max", gen.coef_max);

  auto* t = app.add_subcommand("train", "Train a model on a dataset file");
  add_common(t, common);
  t->add_option("--data", tr.data)->required();
  t->add_option("--resume", tr.resume, "Checkpoint to continue from");
  t->add_option("--epochs", tr.epochs);
  t->add_option("--batch-size", tr.batch_size);
  t->add_option("--lr", tr.lr);
  t->add_option("--w-cls", tr.w_cls);
  t->add_option("--w-reg", tr.w_reg);
  t->add_option("--optimizer", tr.optimizer, "adam or sgd");
  t->add_option("--hidden", tr.hidden, "Comma-separated hidden widths");
  t->add_option("--activation", tr.activation, "relu or tanh");
  t->add_option("--cosine", tr.cosine);
  t->add_option("--canonicalize", tr.canonicalize);
  t->add_option("--polynomial", tr.polynomial);
  t->add_option("--eigenvalues", tr.eigenvalues);
  t->add_option("--temperature", tr.temperature);
  t->add_option("--laplacian", tr.laplacian, "normalized or combinatorial");

  auto* e = app.add_subcommand("eval", "Score a model on a dataset file");
  add_common(e, common);
  e->add_option("--model", ev.model)->required();
  e->add_option("--data", ev.data)->required();

  auto* c = app.add_subcommand("canon", "Canonicalize a text file of \"x y z\" points");
  add_common(c, common);
  c->add_option("--input", ca.input)->required();
  c->add_option("--temperature", ca.temperature);
  c->add_option("--laplacian", ca.laplacian, "normalized or combinatorial");
  c->add_option("--anchor", ca.anchor, "degree or none");
  c->add_option("--self-loops", ca.self_loops);

  auto* d = app.add_subcommand("descriptor", "Multi-resolution descriptor of one point");
  add_common(d, common);
  d->add_option("--model", de.model)->required();
  d->add_option("--input", de.input)->required();
  d->add_option("--resolutions", de.resolutions, "Comma-separated, descending");
  d->add_option("--center", de.center, "Point index; -1 picks the point nearest the centroid");
  d->add_option("--normalize-scale", de.normalize_scale);

  auto* a = app.add_subcommand("ablate", "Ordering-robustness and pipeline ablation sweeps");
  add_common(a, common);
  a->add_option("--kind", ab.kind, "ordering, pipeline or all");
  a->add_option("--patches", ab.patches);
  a->add_option("--patch-size", ab.patch_size);
  a->add_option("--temperatures", ab.temperatures);
  a->add_option("--laplacians", ab.laplacians);
  a->add_option("--noise", ab.noise);
  a->add_option("--train-per-class", ab.train_per_class);
  a->add_option("--test-per-class", ab.test_per_class);
  a->add_option("--seeds", ab.seeds);
  a->add_option("--epochs", ab.epochs);
  a->add_option("--pipeline-noise", ab.pipeline_noise);
  a->add_option("--random-pose", ab.random_pose);

  for (auto* sub : app.get_subcommands({})) {
    for (auto* opt : sub->get_options()) opt->capture_default_str();
  }

  std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (g->parsed()) return cmd_generate(g, common, gen);
    if (t->parsed()) return cmd_train(t, common, tr);
    if (e->parsed()) return cmd_eval(e, common, ev);
    if (c->parsed()) return cmd_canon(c, common, ca);
    if (d->parsed()) return cmd_descriptor(d, common, de);
    return cmd_ablate(a, common, ab);
  } catch (const Error& err) {
    std::cerr << "canonnet: " << err.what() << '\n';
    return exit_code_for(err.kind());
  } catch (const std::exception& err) {
    std::cerr << "canonnet: " << err.what() << '\n';
    return kExitData;
  }
}

}  // namespace canonnet::cli
