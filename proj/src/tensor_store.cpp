#include "featstat/tensor_store.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "featstat/error.hpp"

namespace featstat {
namespace {

constexpr std::array<char, 4> kMagic{'F', 'S', 'T', 'F'};
constexpr std::uint16_t kVersion = 1;
constexpr std::uint8_t kRank = 3;

template <typename U>
void put_le(std::string& buf, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    buf.push_back(static_cast<char>((value >> (8 * i)) & 0xFFu));
  }
}

template <typename U>
U get_le(const unsigned char* p) {
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    value |= static_cast<U>(p[i]) << (8 * i);
  }
  return value;
}

bool checked_product(std::uint64_t a, std::uint64_t b, std::uint64_t& out) {
  if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / a) return false;
  out = a * b;
  return true;
}

}  // namespace

std::size_t dtype_size(Dtype dtype) noexcept {
  return dtype == Dtype::F64 ? 8 : 4;
}

FeatureTensor::FeatureTensor(TensorShape shape, std::vector<double> values, Dtype dtype)
    : shape_(shape), dtype_(dtype), values_(std::move(values)) {
  if (shape.time == 0 || shape.batch == 0 || shape.channels == 0) {
    throw Error(Errc::InvalidShape, "tensor dimensions must all be >= 1");
  }
  std::uint64_t tb = 0, tbc = 0;
  if (!checked_product(shape.time, shape.batch, tb) || !checked_product(tb, shape.channels, tbc)) {
    throw Error(Errc::DimOverflow, "T*B*C overflows 64 bits");
  }
  if (tbc != values_.size()) {
    throw Error(Errc::InvalidShape, "data length " + std::to_string(values_.size()) +
                                        " does not match T*B*C = " + std::to_string(tbc));
  }
  for (double& v : values_) {
    if (dtype_ == Dtype::F32) v = static_cast<double>(static_cast<float>(v));
    if (!std::isfinite(v)) ++non_finite_;
  }
}

bool FeatureTensor::bit_equal(const FeatureTensor& other) const noexcept {
  if (shape_ != other.shape_ || dtype_ != other.dtype_ || values_.size() != other.values_.size()) {
    return false;
  }
  return std::memcmp(values_.data(), other.values_.data(), values_.size() * sizeof(double)) == 0;
}

std::size_t write_tensor(const FeatureTensor& tensor, std::ostream& out) {
  std::string buf;
  const std::size_t width = dtype_size(tensor.dtype());
  buf.reserve(kTensorHeaderSize + tensor.size() * width);
  buf.append(kMagic.data(), kMagic.size());
  put_le<std::uint16_t>(buf, kVersion);
  buf.push_back(static_cast<char>(tensor.dtype()));
  buf.push_back(static_cast<char>(kRank));
  put_le<std::uint64_t>(buf, tensor.shape().time);
  put_le<std::uint64_t>(buf, tensor.shape().batch);
  put_le<std::uint64_t>(buf, tensor.shape().channels);
  for (double v : tensor.values()) {
    if (tensor.dtype() == Dtype::F32) {
      put_le<std::uint32_t>(buf, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    } else {
      put_le<std::uint64_t>(buf, std::bit_cast<std::uint64_t>(v));
    }
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error(Errc::WriteFailure, "failed to write tensor bytes");
  return buf.size();
}

std::size_t write_tensor_file(const FeatureTensor& tensor, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::WriteFailure, "cannot open " + path.string() + " for writing");
  const std::size_t n = write_tensor(tensor, out);
  out.flush();
  if (!out) throw Error(Errc::WriteFailure, "failed to write " + path.string());
  return n;
}

FeatureTensor read_tensor(std::istream& in, ReadMode mode) {
  std::array<unsigned char, kTensorHeaderSize> header{};
  in.read(reinterpret_cast<char*>(header.data()), 4);
  if (in.gcount() == 4 && std::memcmp(header.data(), kMagic.data(), 4) != 0) {
    throw Error(Errc::BadMagic, "not an FSTF tensor (bad magic)");
  }
  if (in.gcount() != 4) throw Error(Errc::TruncatedData, "stream ends inside the header");
  in.read(reinterpret_cast<char*>(header.data() + 4), kTensorHeaderSize - 4);
  if (static_cast<std::size_t>(in.gcount()) != kTensorHeaderSize - 4) {
    throw Error(Errc::TruncatedData, "stream ends inside the header");
  }

  const auto version = get_le<std::uint16_t>(header.data() + 4);
  if (version != kVersion) {
    throw Error(Errc::UnsupportedVersion, "unsupported tensor version " + std::to_string(version));
  }
  const std::uint8_t dtype_tag = header[6];
  if (dtype_tag != static_cast<std::uint8_t>(Dtype::F32) &&
      dtype_tag != static_cast<std::uint8_t>(Dtype::F64)) {
    throw Error(Errc::UnsupportedDtype, "unknown dtype tag " + std::to_string(dtype_tag));
  }
  const auto dtype = static_cast<Dtype>(dtype_tag);
  if (header[7] != kRank) {
    throw Error(Errc::UnsupportedRank,
                "only rank-3 tensors are supported, got rank " + std::to_string(header[7]));
  }
  TensorShape shape;
  shape.time = get_le<std::uint64_t>(header.data() + 8);
  shape.batch = get_le<std::uint64_t>(header.data() + 16);
  shape.channels = get_le<std::uint64_t>(header.data() + 24);
  if (shape.time == 0 || shape.batch == 0 || shape.channels == 0) {
    throw Error(Errc::InvalidShape, "tensor dimensions must all be >= 1");
  }

  const std::size_t width = dtype_size(dtype);
  std::uint64_t tb = 0, count = 0, bytes = 0;
  if (!checked_product(shape.time, shape.batch, tb) || !checked_product(tb, shape.channels, count) ||
      !checked_product(count, width, bytes) ||
      count > std::vector<double>().max_size() ||
      bytes > static_cast<std::uint64_t>(std::numeric_limits<std::streamsize>::max())) {
    throw Error(Errc::DimOverflow, "T*B*C exceeds addressable size");
  }

  // Grow as data arrives so a lying header cannot force a huge allocation.
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, 1u << 20)));
  std::vector<unsigned char> chunk(std::size_t{1} << 16);
  std::uint64_t remaining = bytes;
  while (remaining > 0) {
    const auto want = static_cast<std::size_t>(std::min<std::uint64_t>(remaining, chunk.size()));
    in.read(reinterpret_cast<char*>(chunk.data()), static_cast<std::streamsize>(want));
    const auto got = static_cast<std::size_t>(in.gcount());
    if (got != want) {
      const std::uint64_t have = (bytes - remaining + got) / width;
      throw Error(Errc::TruncatedData, "expected " + std::to_string(count) + " elements, found " +
                                           std::to_string(have));
    }
    for (std::size_t off = 0; off < got; off += width) {
      if (dtype == Dtype::F32) {
        values.push_back(std::bit_cast<float>(get_le<std::uint32_t>(chunk.data() + off)));
      } else {
        values.push_back(std::bit_cast<double>(get_le<std::uint64_t>(chunk.data() + off)));
      }
    }
    remaining -= got;
  }

  FeatureTensor tensor(shape, std::move(values), dtype);
  if (mode == ReadMode::Strict && tensor.non_finite_count() > 0) {
    throw Error(Errc::NonFinite, std::to_string(tensor.non_finite_count()) +
                                     " non-finite element(s) in tensor");
  }
  return tensor;
}

FeatureTensor read_tensor_file(const std::filesystem::path& path, ReadMode mode) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  return read_tensor(in, mode);
}

// ---------------------------------------------------------------------------

std::optional<double> ManifestEntry::score(const std::string& metric) const {
  if (!scores) return std::nullopt;
  const auto it = scores->find(metric);
  if (it == scores->end()) return std::nullopt;
  return it->second;
}

std::filesystem::path RunManifest::resolve(const ManifestEntry& entry) const {
  const std::filesystem::path p(entry.tensor_path);
  return p.is_absolute() ? p : base_dir / p;
}

std::string RunManifest::encoder_tag() const {
  for (const auto& e : entries) {
    if (!e.encoder_tag.empty()) return e.encoder_tag;
  }
  return {};
}

RunManifest parse_manifest(std::istream& in, const std::filesystem::path& base_dir) {
  using nlohmann::json;
  RunManifest manifest;
  manifest.base_dir = base_dir;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto malformed = [&](const std::string& why) {
      return Error(Errc::MalformedLine, "manifest line " + std::to_string(line_no) + ": " + why);
    };
    json doc;
    try {
      doc = json::parse(line);
    } catch (const json::parse_error& e) {
      throw malformed(e.what());
    }
    if (!doc.is_object()) throw malformed("expected a JSON object");

    ManifestEntry entry;
    const auto epoch = doc.find("epoch");
    if (epoch == doc.end() || !epoch->is_number_integer() ||
        (epoch->is_number_integer() && epoch->get<std::int64_t>() < 0)) {
      throw malformed("\"epoch\" must be a non-negative integer");
    }
    entry.epoch = epoch->get<std::int64_t>();
    const auto tensor = doc.find("tensor");
    if (tensor == doc.end() || !tensor->is_string()) throw malformed("\"tensor\" must be a string");
    entry.tensor_path = tensor->get<std::string>();
    if (const auto enc = doc.find("encoder"); enc != doc.end()) {
      if (!enc->is_string()) throw malformed("\"encoder\" must be a string");
      entry.encoder_tag = enc->get<std::string>();
    }
    if (const auto scores = doc.find("scores"); scores != doc.end() && !scores->is_null()) {
      if (!scores->is_object()) throw malformed("\"scores\" must be an object");
      std::map<std::string, double> parsed;
      for (const auto& [name, value] : scores->items()) {
        if (!value.is_number()) throw malformed("score \"" + name + "\" is not a number");
        parsed.emplace(name, value.get<double>());
      }
      entry.scores = std::move(parsed);
    }
    if (!manifest.entries.empty() && entry.epoch <= manifest.entries.back().epoch) {
      throw Error(Errc::NonMonotonicEpochs,
                  "manifest line " + std::to_string(line_no) + ": epoch " +
                      std::to_string(entry.epoch) + " does not follow epoch " +
                      std::to_string(manifest.entries.back().epoch));
    }
    manifest.entries.push_back(std::move(entry));
  }
  return manifest;
}

RunManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open manifest " + path.string());
  return parse_manifest(in, path.parent_path());
}

void write_manifest(const RunManifest& manifest, std::ostream& out) {
  using nlohmann::json;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto& e = manifest.entries[i];
    if (i > 0 && e.epoch <= manifest.entries[i - 1].epoch) {
      throw Error(Errc::NonMonotonicEpochs, "epochs must be strictly increasing");
    }
    json doc = json::object();
    doc["epoch"] = e.epoch;
    doc["tensor"] = e.tensor_path;
    if (!e.encoder_tag.empty()) doc["encoder"] = e.encoder_tag;
    if (e.scores) doc["scores"] = *e.scores;
    out << doc.dump() << '\n';
  }
  if (!out) throw Error(Errc::WriteFailure, "failed to write manifest");
}

void save_manifest(const RunManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::WriteFailure, "cannot open " + path.string() + " for writing");
  write_manifest(manifest, out);
}

}  // namespace featstat
