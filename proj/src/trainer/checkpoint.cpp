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

#include "asrbench/trainer/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "asrbench/error.hpp"

namespace asrbench::trainer {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[4] = {'A', 'S', 'R', 'C'};

struct Overrun {};

class Out {
 public:
  template <typename T>
  void put(T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    bytes.insert(bytes.end(), p, p + sizeof(T));
  }
  template <typename M>
  void tensor(const M& t) {
    put<std::uint32_t>(static_cast<std::uint32_t>(t.rows()));
    put<std::uint32_t>(static_cast<std::uint32_t>(t.cols()));
    const auto* p = reinterpret_cast<const std::uint8_t*>(t.data());
    bytes.insert(bytes.end(), p, p + sizeof(double) * static_cast<std::size_t>(t.size()));
  }
  void values(const std::vector<double>& v) {
    put<std::uint64_t>(v.size());
    const auto* p = reinterpret_cast<const std::uint8_t*>(v.data());
    bytes.insert(bytes.end(), p, p + sizeof(double) * v.size());
  }
  std::vector<std::uint8_t> bytes;
};

class In {
 public:
  explicit In(std::span<const std::uint8_t> b) : b_(b) {}
  template <typename T>
  T get() {
    T v;
    std::memcpy(&v, take(sizeof(T)), sizeof(T));
    return v;
  }
  template <typename M>
  void tensor(M& t) {
    const auto rows = get<std::uint32_t>();
    const auto cols = get<std::uint32_t>();
    if (rows != t.rows() || cols != t.cols()) throw DataError("checkpoint tensor shape does not match its architecture");
    std::memcpy(t.data(), take(sizeof(double) * static_cast<std::size_t>(t.size())),
                sizeof(double) * static_cast<std::size_t>(t.size()));
  }
  std::vector<double> values() {
    const auto n = get<std::uint64_t>();
    if (n > (b_.size() - pos_) / sizeof(double)) throw Overrun{};
    std::vector<double> v(n);
    std::memcpy(v.data(), take(sizeof(double) * n), sizeof(double) * n);
    return v;
  }
  const std::uint8_t* take(std::size_t n) {
    if (n > b_.size() - pos_) throw Overrun{};
    const auto* p = b_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::size_t position() const { return pos_; }

 private:
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

std::uint32_t crc(std::span<const std::uint8_t> bytes) {
  uLong c = crc32(0L, Z_NULL, 0);
  return static_cast<std::uint32_t>(crc32(c, bytes.data(), static_cast<uInt>(bytes.size())));
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  Out o;
  o.bytes.insert(o.bytes.end(), kMagic, kMagic + 4);
  o.put<std::uint32_t>(kCheckpointVersion);
  const auto& c = ckpt.model.config;
  for (int v : {c.feature_dim, c.conv_width, c.conv_stride, c.conv_out, c.lstm_size, c.n_lstm, c.n_classes, 0})
    o.put<std::int32_t>(v);
  o.put<double>(c.dropout);
  for_each_trainable(ckpt.model, [&](const auto& t) { o.tensor(t); });
  for_each_running_stat(ckpt.model, [&](const auto& t) { o.tensor(t); });
  o.put<double>(ckpt.optimizer.rho);
  o.put<double>(ckpt.optimizer.epsilon);
  o.put<std::uint32_t>(static_cast<std::uint32_t>(ckpt.optimizer.mean_sq_grad.size()));
  for (const auto& v : ckpt.optimizer.mean_sq_grad) o.values(v);
  for (const auto& v : ckpt.optimizer.mean_sq_delta) o.values(v);
  const auto& k = ckpt.counters;
  o.put<std::int64_t>(k.iteration);
  o.put<std::int32_t>(k.epoch);
  o.put<std::int64_t>(k.batch_in_epoch);
  o.put<double>(k.elapsed_minutes);
  o.put<std::uint64_t>(k.seed);
  o.put<std::uint64_t>(k.shuffle_seed);
  o.put<std::uint32_t>(static_cast<std::uint32_t>(ckpt.accuracy.size()));
  for (const auto& r : ckpt.accuracy) {
    o.put<std::int32_t>(r.epoch);
    o.put<double>(r.minutes);
    o.put<double>(r.cer);
    o.put<double>(r.wer);
  }
  o.put<std::uint32_t>(crc(o.bytes));
  return std::move(o.bytes);
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw BadMagic("not an ASRC checkpoint");
  if (bytes.size() < 12) throw TruncatedFile("checkpoint shorter than its header");
  std::uint32_t version;
  std::memcpy(&version, bytes.data() + 4, 4);
  if (version != kCheckpointVersion) throw UnsupportedFormat("checkpoint version " + std::to_string(version));
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + bytes.size() - 4, 4);
  const auto body = bytes.first(bytes.size() - 4);
  const bool crc_ok = crc(body) == stored;

  In in(body);
  try {
    in.take(8);
    ModelConfig c;
    c.feature_dim = in.get<std::int32_t>();
    c.conv_width = in.get<std::int32_t>();
    c.conv_stride = in.get<std::int32_t>();
    c.conv_out = in.get<std::int32_t>();
    c.lstm_size = in.get<std::int32_t>();
    c.n_lstm = in.get<std::int32_t>();
    c.n_classes = in.get<std::int32_t>();
    in.get<std::int32_t>();
    c.dropout = in.get<double>();
    try {
      c.validate();
      if (static_cast<double>(c.conv_out) * c.lstm_size * c.n_lstm > 1e11)
        throw InvalidArgument("implausibly large");
    } catch (const InvalidArgument& e) {
      if (!crc_ok) throw ChecksumError("checkpoint checksum mismatch");
      throw DataError(std::string("checkpoint architecture invalid: ") + e.what());
    }

    Checkpoint ckpt;
    ckpt.model = AcousticModel::create(c, 0);
    for_each_trainable(ckpt.model, [&](auto& t) { in.tensor(t); });
    for_each_running_stat(ckpt.model, [&](auto& t) { in.tensor(t); });
    ckpt.optimizer.rho = in.get<double>();
    ckpt.optimizer.epsilon = in.get<double>();
    const auto n = in.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < n; ++i) ckpt.optimizer.mean_sq_grad.push_back(in.values());
    for (std::uint32_t i = 0; i < n; ++i) ckpt.optimizer.mean_sq_delta.push_back(in.values());
    auto& k = ckpt.counters;
    k.iteration = in.get<std::int64_t>();
    k.epoch = in.get<std::int32_t>();
    k.batch_in_epoch = in.get<std::int64_t>();
    k.elapsed_minutes = in.get<double>();
    k.seed = in.get<std::uint64_t>();
    k.shuffle_seed = in.get<std::uint64_t>();
    const auto records = in.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < records; ++i) {
      metrics::AccuracyRecord r;
      r.epoch = in.get<std::int32_t>();
      r.minutes = in.get<double>();
      r.cer = in.get<double>();
      r.wer = in.get<double>();
      ckpt.accuracy.push_back(r);
    }
    if (!crc_ok) throw ChecksumError("checkpoint checksum mismatch");
    if (in.position() != body.size()) throw DataError("checkpoint has trailing bytes");
    const auto expected = AdaDeltaState::for_model(ckpt.model);
    if (ckpt.optimizer.mean_sq_grad.size() != expected.mean_sq_grad.size())
      throw DataError("checkpoint optimizer state does not match the model");
    for (std::size_t i = 0; i < expected.mean_sq_grad.size(); ++i)
      if (ckpt.optimizer.mean_sq_grad[i].size() != expected.mean_sq_grad[i].size() ||
          ckpt.optimizer.mean_sq_delta[i].size() != expected.mean_sq_grad[i].size())
        throw DataError("checkpoint optimizer state does not match the model");
    return ckpt;
  } catch (const Overrun&) {
    if (crc_ok) throw DataError("checkpoint payload is malformed");
    throw TruncatedFile("checkpoint ends early");
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto bytes = encode_checkpoint(ckpt);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create checkpoint " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("checkpoint write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place: " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace asrbench::trainer
