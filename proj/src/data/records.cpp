// Copyright 2026 The asrbench Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "asrbench/data/records.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "asrbench/error.hpp"
#include "json.hpp"

namespace asrbench::data {
namespace {

static_assert(std::endian::native == std::endian::little, "record I/O assumes a little-endian host");

constexpr char kMagic[4] = {'A', 'S', 'R', 'B'};
constexpr std::size_t kHeaderBytes = 4 + 2 + 4 + 4;

class Writer {
 public:
  explicit Writer(std::vector<std::uint8_t>& out) : out_(out) {}
  template <typename T>
  void put(T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    out_.insert(out_.end(), p, p + sizeof(T));
  }
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    out_.insert(out_.end(), p, p + n);
  }

 private:
  std::vector<std::uint8_t>& out_;
};

struct Overrun {};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}
  template <typename T>
  T get() {
    T v;
    std::memcpy(&v, take(sizeof(T)), sizeof(T));
    return v;
  }
  const std::uint8_t* take(std::size_t n) {
    if (n > in_.size() - pos_) throw Overrun{};
    const auto* p = in_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::size_t position() const { return pos_; }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

std::uint32_t crc(std::span<const std::uint8_t> bytes) {
  uLong c = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; records are far below 4 GiB.
  c = crc32(c, bytes.data(), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(c);
}

std::vector<Utterance> parse_payload(Reader& r, std::uint32_t count, std::uint32_t dim,
                                     std::int64_t first_id) {
  std::vector<Utterance> out;
  out.reserve(count);
  for (std::uint32_t s = 0; s < count; ++s) {
    Utterance u;
    u.id = first_id + s;
    const auto frames = r.get<std::uint32_t>();
    const std::size_t n = std::size_t{frames} * dim;
    if (dim != 0 && n / dim != frames) throw Overrun{};
    if (n > SIZE_MAX / sizeof(float)) throw Overrun{};
    const auto* raw = r.take(n * sizeof(float));
    u.features.resize(frames, dim);
    std::vector<float> tmp(n);
    std::memcpy(tmp.data(), raw, n * sizeof(float));
    for (std::size_t i = 0; i < n; ++i) u.features.data()[i] = tmp[i];
    const auto len = r.get<std::uint32_t>();
    const auto* text = r.take(len);
    u.transcript.assign(reinterpret_cast<const char*>(text), len);
    u.duration_ms = duration_from_frames(static_cast<int>(frames));
    out.push_back(std::move(u));
  }
  return out;
}

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return bytes;
}

void spill(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace

double duration_from_frames(int frames, const features::FeConfig& cfg) {
  if (frames <= 0) return 0;
  const double samples = static_cast<double>(frames - 1) * cfg.stride_samples + cfg.window_samples;
  return 1000.0 * samples / features::kSampleRate;
}

bool within_duration_limit(double duration_ms) { return duration_ms <= kMaxDurationMs; }

std::vector<Utterance> filter_long(std::vector<Utterance> utterances) {
  std::erase_if(utterances, [](const Utterance& u) { return !within_duration_limit(u.duration_ms); });
  return utterances;
}

std::vector<std::uint8_t> encode_record(std::span<const Utterance> samples, int feature_dim) {
  std::vector<std::uint8_t> out;
  Writer w(out);
  w.bytes(kMagic, 4);
  w.put<std::uint16_t>(kRecordVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(samples.size()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(feature_dim));
  for (const auto& u : samples) {
    if (u.features.cols() != feature_dim)
      throw InvalidArgument("record sample has " + std::to_string(u.features.cols()) + " features, expected " +
                            std::to_string(feature_dim));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(u.features.rows()));
    for (Eigen::Index i = 0; i < u.features.size(); ++i) w.put<float>(static_cast<float>(u.features.data()[i]));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(u.transcript.size()));
    w.bytes(u.transcript.data(), u.transcript.size());
  }
  const std::uint32_t c = crc(std::span(out).subspan(kHeaderBytes));
  w.put<std::uint32_t>(c);
  return out;
}

std::vector<Utterance> decode_record(std::span<const std::uint8_t> bytes, std::int64_t first_id) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw BadMagic("not an ASRB record");
  if (bytes.size() < kHeaderBytes + 4) throw TruncatedFile("record shorter than its header");
  Reader header(bytes);
  header.take(4);
  const auto version = header.get<std::uint16_t>();
  if (version != kRecordVersion) throw UnsupportedFormat("record version " + std::to_string(version));
  const auto count = header.get<std::uint32_t>();
  const auto dim = header.get<std::uint32_t>();

  const auto payload = bytes.subspan(kHeaderBytes, bytes.size() - kHeaderBytes - 4);
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + bytes.size() - 4, 4);
  const bool crc_ok = crc(payload) == stored;

  // The payload is parsed even when the checksum disagrees so that a short
  // file is reported as truncated rather than corrupt.
  Reader body(bytes.subspan(kHeaderBytes));
  try {
    auto samples = parse_payload(body, count, dim, first_id);
    if (!crc_ok) throw ChecksumError("record checksum mismatch");
    if (body.position() != payload.size()) throw DataError("record has trailing bytes");
    return samples;
  } catch (const Overrun&) {
    if (crc_ok) throw DataError("record payload is malformed");
    throw TruncatedFile("record payload ends early");
  }
}

std::string shard_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "shard-%05zu.rec", index);
  return buf;
}

std::vector<std::filesystem::path> write_records(std::span<const Utterance> utterances,
                                                 const std::filesystem::path& dir, int per_file) {
  if (per_file < 1) throw InvalidArgument("samples per file must be >= 1");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  const int dim = utterances.empty() ? features::kFeatureDim : static_cast<int>(utterances[0].features.cols());
  std::vector<std::filesystem::path> files;
  for (std::size_t begin = 0, index = 0; begin < utterances.size(); begin += per_file, ++index) {
    const auto n = std::min<std::size_t>(per_file, utterances.size() - begin);
    const auto path = dir / shard_name(index);
    spill(path, encode_record(utterances.subspan(begin, n), dim));
    files.push_back(path);
  }
  return files;
}

std::vector<Utterance> read_record_file(const std::filesystem::path& path, std::int64_t first_id) {
  return decode_record(slurp(path), first_id);
}

std::vector<std::filesystem::path> list_shards(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("no such record directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (entry.is_regular_file() && name.starts_with("shard-") && name.ends_with(".rec")) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::vector<Utterance> read_records(std::span<const std::filesystem::path> files) {
  std::vector<Utterance> out;
  for (std::size_t i = 0; i < files.size(); ++i) {
    auto part = read_record_file(files[i], static_cast<std::int64_t>(i) * kSamplesPerFile);
    std::move(part.begin(), part.end(), std::back_inserter(out));
  }
  return out;
}

void write_manifest(const std::filesystem::path& dir, const Manifest& m) {
  nlohmann::json j;
  j["version"] = Manifest::kVersion;
  j["element_count"] = m.element_count;
  j["total_duration_ms"] = m.total_duration_ms;
  j["feature_dim"] = m.feature_dim;
  j["shards"] = m.shards;
  const auto& s = m.standardization;
  j["standardization"]["mean"] = std::vector<double>(s.mean.data(), s.mean.data() + s.mean.size());
  j["standardization"]["stddev"] = std::vector<double>(s.stddev.data(), s.stddev.data() + s.stddev.size());
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) throw IoError("cannot write manifest in " + dir.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("manifest write failed in " + dir.string());
}

Manifest read_manifest(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw IoError("missing manifest.json in " + dir.string());
  Manifest m;
  try {
    const auto j = nlohmann::json::parse(in);
    if (j.at("version").get<int>() != Manifest::kVersion) throw UnsupportedFormat("manifest version mismatch");
    m.element_count = j.at("element_count").get<std::int64_t>();
    m.total_duration_ms = j.at("total_duration_ms").get<double>();
    m.feature_dim = j.at("feature_dim").get<int>();
    m.shards = j.at("shards").get<std::vector<std::string>>();
    const auto mean = j.at("standardization").at("mean").get<std::vector<double>>();
    const auto sd = j.at("standardization").at("stddev").get<std::vector<double>>();
    if (mean.size() != sd.size()) throw DataError("standardization vectors differ in length");
    m.standardization.mean = Eigen::Map<const nn::RowVector>(mean.data(), static_cast<Eigen::Index>(mean.size()));
    m.standardization.stddev = Eigen::Map<const nn::RowVector>(sd.data(), static_cast<Eigen::Index>(sd.size()));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

}  // namespace asrbench::data
