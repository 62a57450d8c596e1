#include <string>

#include "canonnet/binary_io.hpp"
#include "canonnet/errors.hpp"
#include "canonnet/synthdata.hpp"

namespace canonnet {

namespace {
constexpr std::string_view kMagic = "CNN1";
constexpr std::uint32_t kVersion = 1;
}  // namespace

std::vector<std::uint8_t> encode_dataset(const std::vector<Sample>& samples,
                                         std::size_t patch_size) {
  ByteWriter w;
  w.bytes(kMagic);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(patch_size));
  w.u64(samples.size());
  for (const Sample& s : samples) {
    if (static_cast<std::size_t>(s.cloud.size()) != patch_size) {
      throw Error(ErrorKind::ShapeMismatch, "sample cloud size differs from patch_size");
    }
    const std::size_t start = w.size();
    w.u8(static_cast<std::uint8_t>(s.label));
    w.f64(s.surface.a);
    w.f64(s.surface.b);
    w.f64(s.surface.c);
    w.f64(s.surface.d);
    w.f64(s.surface.e);
    w.f64(s.k_gt);
    w.f64(s.h_abs_gt);
    w.u64(s.seed);
    const auto& m = s.cloud.matrix();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (int j = 0; j < 3; ++j) w.f64(m(i, j));
    }
    w.u32(crc32(w.tail(start)));
  }
  return w.buffer();
}

void write_dataset(const std::filesystem::path& path, const std::vector<Sample>& samples,
                   std::size_t patch_size) {
  write_file(path, encode_dataset(samples, patch_size));
}

Dataset decode_dataset(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (bytes.size() < kMagic.size() || r.bytes(kMagic.size()) != kMagic) {
    throw Error(ErrorKind::FormatVersionMismatch, "not a dataset file (bad magic)");
  }
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw Error(ErrorKind::FormatVersionMismatch,
                "dataset version " + std::to_string(version) + " is not supported");
  }
  Dataset ds;
  ds.patch_size = r.u32();
  const std::uint64_t count = r.u64();
  const std::size_t record_bytes = 1 + 8 * 8 + ds.patch_size * 3 * 8 + 4;
  if (count > r.remaining() / record_bytes) {
    throw Error(ErrorKind::CorruptRecord, "file shorter than its record count");
  }
  ds.samples.reserve(count);
  for (std::uint64_t k = 0; k < count; ++k) {
    const std::size_t start = r.position();
    Sample s;
    const std::uint8_t label = r.u8();
    if (label >= kSurfaceClassCount) {
      throw Error(ErrorKind::CorruptRecord, "record " + std::to_string(k) + " has bad class");
    }
    s.label = static_cast<SurfaceClass>(label);
    s.surface.a = r.f64();
    s.surface.b = r.f64();
    s.surface.c = r.f64();
    s.surface.d = r.f64();
    s.surface.e = r.f64();
    s.k_gt = r.f64();
    s.h_abs_gt = r.f64();
    s.seed = r.u64();
    Eigen::MatrixX3d m(static_cast<Eigen::Index>(ds.patch_size), 3);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (int j = 0; j < 3; ++j) m(i, j) = r.f64();
    }
    const std::uint32_t expected = crc32(r.slice(start, r.position()));
    if (r.u32() != expected) {
      throw Error(ErrorKind::CorruptRecord, "checksum mismatch in record " + std::to_string(k));
    }
    if (!m.allFinite()) {
      throw Error(ErrorKind::CorruptRecord, "non-finite coordinates in record " + std::to_string(k));
    }
    s.cloud = PointCloud(std::move(m));
    ds.samples.push_back(std::move(s));
  }
  if (r.remaining() != 0) {
    throw Error(ErrorKind::CorruptRecord, "trailing bytes after last record");
  }
  return ds;
}

Dataset read_dataset(const std::filesystem::path& path) { return decode_dataset(read_file(path)); }

}  // namespace canonnet
