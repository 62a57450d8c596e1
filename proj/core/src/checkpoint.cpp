#include <string>

#include "canonnet/binary_io.hpp"
#include "canonnet/errors.hpp"
#include "canonnet/model.hpp"

namespace canonnet {

namespace {

constexpr std::string_view kMagic = "CNM1";
constexpr std::uint32_t kVersion = 1;

void put_vector(ByteWriter& w, const Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) w.f64(v(i));
}

Eigen::VectorXd get_vector(ByteReader& r, Eigen::Index n) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = r.f64();
  return v;
}

void put_features(ByteWriter& w, const FeatureConfig& f) {
  w.u8(f.canonicalize ? 1 : 0);
  w.u8(f.polynomial ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(f.eigenvalue_count));
  w.f64(f.canon.temperature);
  w.f64(f.canon.degeneracy_tol);
  w.f64(f.canon.centroid_tol);
  w.f64(f.canon.axis_tol);
  w.u8(static_cast<std::uint8_t>(f.canon.laplacian));
  w.u8(f.canon.self_loops ? 1 : 0);
  w.u8(static_cast<std::uint8_t>(f.canon.anchor));
  w.f64(f.canon.jacobi_tol);
  w.u32(static_cast<std::uint32_t>(f.canon.max_sweeps));
}

FeatureConfig get_features(ByteReader& r, std::size_t patch_size) {
  FeatureConfig f;
  f.patch_size = patch_size;
  f.canonicalize = r.u8() != 0;
  f.polynomial = r.u8() != 0;
  f.eigenvalue_count = r.u32();
  f.canon.temperature = r.f64();
  f.canon.degeneracy_tol = r.f64();
  f.canon.centroid_tol = r.f64();
  f.canon.axis_tol = r.f64();
  const std::uint8_t lap = r.u8();
  f.canon.self_loops = r.u8() != 0;
  const std::uint8_t anchor = r.u8();
  if (lap > 1 || anchor > 1) throw Error(ErrorKind::CorruptRecord, "bad feature config in checkpoint");
  f.canon.laplacian = static_cast<LaplacianKind>(lap);
  f.canon.anchor = static_cast<TranslationAnchor>(anchor);
  f.canon.jacobi_tol = r.f64();
  f.canon.max_sweeps = static_cast<int>(r.u32());
  return f;
}

}  // namespace

std::vector<std::uint8_t> encode_model(const MlpModel& model, const OptimizerState* optimizer) {
  ByteWriter w;
  w.bytes(kMagic);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(model.features().patch_size));
  const auto hidden = model.hidden_sizes();
  w.u32(static_cast<std::uint32_t>(model.input_size()));
  w.u32(static_cast<std::uint32_t>(hidden.size()));
  for (std::size_t h : hidden) w.u32(static_cast<std::uint32_t>(h));
  w.u8(static_cast<std::uint8_t>(model.activation()));
  put_features(w, model.features());

  put_vector(w, model.input_mean());
  put_vector(w, model.input_scale());
  put_vector(w, model.flat_parameters());

  w.u8(optimizer != nullptr ? 1 : 0);
  if (optimizer != nullptr) {
    w.u64(optimizer->step);
    w.u64(optimizer->epoch);
    put_vector(w, optimizer->m);
    put_vector(w, optimizer->v);
  }
  w.u32(crc32(w.tail(0)));
  return w.buffer();
}

void save_model(const std::filesystem::path& path, const MlpModel& model,
                const OptimizerState* optimizer) {
  write_file(path, encode_model(model, optimizer));
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes,
                             std::optional<std::size_t> expected_patch_size) {
  ByteReader r(bytes);
  if (bytes.size() < kMagic.size() || r.bytes(kMagic.size()) != kMagic) {
    throw Error(ErrorKind::FormatVersionMismatch, "not a model checkpoint (bad magic)");
  }
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw Error(ErrorKind::FormatVersionMismatch,
                "checkpoint version " + std::to_string(version) + " is not supported");
  }
  const std::size_t patch_size = r.u32();
  if (expected_patch_size && *expected_patch_size != patch_size) {
    throw Error(ErrorKind::FormatVersionMismatch,
                "checkpoint patch_size " + std::to_string(patch_size) + " but " +
                    std::to_string(*expected_patch_size) + " was expected");
  }
  if (bytes.size() < 4 ||
      crc32(bytes.first(bytes.size() - 4)) != ByteReader(bytes.last(4)).u32()) {
    throw Error(ErrorKind::CorruptRecord, "checkpoint checksum mismatch");
  }

  const std::size_t input_size = r.u32();
  const std::uint32_t depth = r.u32();
  if (depth > 64) throw Error(ErrorKind::CorruptRecord, "implausible layer count");
  std::vector<std::size_t> hidden(depth);
  for (auto& h : hidden) h = r.u32();
  const std::uint8_t act = r.u8();
  if (act > 1) throw Error(ErrorKind::CorruptRecord, "unknown activation id");
  const FeatureConfig features = get_features(r, patch_size);
  if (features.input_size() != input_size) {
    throw Error(ErrorKind::CorruptRecord, "feature config disagrees with input size");
  }

  Checkpoint ck;
  ck.model = MlpModel(features, hidden, static_cast<Activation>(act));
  const auto in = static_cast<Eigen::Index>(input_size);
  ck.model.input_mean() = get_vector(r, in);
  ck.model.input_scale() = get_vector(r, in);
  ck.model.set_flat_parameters(get_vector(r, static_cast<Eigen::Index>(ck.model.param_count())));

  if (r.u8() != 0) {
    OptimizerState opt;
    opt.step = r.u64();
    opt.epoch = r.u64();
    const auto p = static_cast<Eigen::Index>(ck.model.param_count());
    opt.m = get_vector(r, p);
    opt.v = get_vector(r, p);
    ck.optimizer = std::move(opt);
  }
  r.u32();  // checksum, verified above
  if (r.remaining() != 0) throw Error(ErrorKind::CorruptRecord, "trailing bytes in checkpoint");
  return ck;
}

Checkpoint load_checkpoint(const std::filesystem::path& path,
                           std::optional<std::size_t> expected_patch_size) {
  return decode_checkpoint(read_file(path), expected_patch_size);
}

MlpModel load_model(const std::filesystem::path& path,
                    std::optional<std::size_t> expected_patch_size) {
  return load_checkpoint(path, expected_patch_size).model;
}

}  // namespace canonnet
