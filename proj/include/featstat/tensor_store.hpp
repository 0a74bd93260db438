#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace featstat {

enum class Dtype : std::uint8_t { F32 = 1, F64 = 2 };

std::size_t dtype_size(Dtype dtype) noexcept;

struct TensorShape {
  std::uint64_t time = 0;
  std::uint64_t batch = 0;
  std::uint64_t channels = 0;

  friend bool operator==(const TensorShape&, const TensorShape&) = default;
};

/// One epoch's extracted feature block, laid out time x batch x channel in
/// row-major order. Values are held as double; f32 tensors only ever hold
/// float-representable values so that writing them back is lossless.
class FeatureTensor {
 public:
  FeatureTensor() = default;
  FeatureTensor(TensorShape shape, std::vector<double> values, Dtype dtype = Dtype::F32);

  const TensorShape& shape() const noexcept { return shape_; }
  Dtype dtype() const noexcept { return dtype_; }
  std::span<const double> values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }

  std::size_t index(std::uint64_t t, std::uint64_t b, std::uint64_t c) const noexcept {
    return static_cast<std::size_t>((t * shape_.batch + b) * shape_.channels + c);
  }
  double at(std::uint64_t t, std::uint64_t b, std::uint64_t c) const noexcept {
    return values_[index(t, b, c)];
  }

  /// The C channel values at (t, b).
  std::span<const double> channel_slice(std::uint64_t t, std::uint64_t b) const noexcept {
    return std::span<const double>(values_).subspan(index(t, b, 0), shape_.channels);
  }

  /// Number of NaN/Inf elements; only non-zero for tensors read leniently.
  std::size_t non_finite_count() const noexcept { return non_finite_; }

  /// Bitwise comparison of shape, dtype and every element.
  bool bit_equal(const FeatureTensor& other) const noexcept;

 private:
  TensorShape shape_;
  Dtype dtype_ = Dtype::F32;
  std::vector<double> values_;
  std::size_t non_finite_ = 0;
};

enum class ReadMode { Strict, Lenient };

// magic(4) + version u16 + dtype u8 + ndim u8 + three u64 dims
inline constexpr std::size_t kTensorHeaderSize = 32;

/// Serializes `tensor` in the `.fst` format. Returns bytes written.
std::size_t write_tensor(const FeatureTensor& tensor, std::ostream& out);
std::size_t write_tensor_file(const FeatureTensor& tensor, const std::filesystem::path& path);

FeatureTensor read_tensor(std::istream& in, ReadMode mode = ReadMode::Strict);
FeatureTensor read_tensor_file(const std::filesystem::path& path, ReadMode mode = ReadMode::Strict);

// ---------------------------------------------------------------------------
// Run manifest (JSON lines).

struct ManifestEntry {
  std::int64_t epoch = 0;
  std::string tensor_path;
  std::optional<std::map<std::string, double>> scores;
  std::string encoder_tag;

  std::optional<double> score(const std::string& metric) const;
};

struct RunManifest {
  /// Directory the tensor paths are relative to.
  std::filesystem::path base_dir;
  std::vector<ManifestEntry> entries;

  std::filesystem::path resolve(const ManifestEntry& entry) const;
  /// First non-empty encoder tag, or an empty string.
  std::string encoder_tag() const;
};

RunManifest parse_manifest(std::istream& in, const std::filesystem::path& base_dir = {});
RunManifest load_manifest(const std::filesystem::path& path);
void write_manifest(const RunManifest& manifest, std::ostream& out);
void save_manifest(const RunManifest& manifest, const std::filesystem::path& path);

}  // namespace featstat
