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

#include "asrbench/features/features.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>
#include <numbers>
#include <string>

#include "asrbench/error.hpp"

namespace asrbench::features {
namespace {

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

template <class T>
using FftwBuffer = std::unique_ptr<T[], FftwFree>;

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

// FFTW planning is not thread-safe; execution through the new-array
// interface is. Plans are created once per size and never destroyed.
fftw_plan r2c_plan(int n) {
  std::lock_guard lock(planner_mutex());
  static std::map<int, fftw_plan> plans;
  auto it = plans.find(n);
  if (it != plans.end()) return it->second;
  FftwBuffer<double> in(static_cast<double*>(fftw_malloc(sizeof(double) * n)));
  FftwBuffer<fftw_complex> out(
      static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1))));
  fftw_plan plan = fftw_plan_dft_r2c_1d(n, in.get(), out.get(), FFTW_ESTIMATE);
  plans.emplace(n, plan);
  return plan;
}

}  // namespace

void FeConfig::validate() const {
  if (window_samples < 1 || stride_samples < 1) throw InvalidArgument("window and stride must be >= 1");
  if (stride_samples > window_samples) throw InvalidArgument("stride must not exceed window");
  if (n_fft_bins != window_samples / 2 + 1) throw InvalidArgument("n_fft_bins must be window/2 + 1");
  if (n_mfcc > n_mels || n_mfcc < 1 || n_mels < 1) throw InvalidArgument("need 1 <= n_mfcc <= n_mels");
  if (!(log_floor > 0)) throw InvalidArgument("log_floor must be positive");
  if (!(mel_high_hz > mel_low_hz)) throw InvalidArgument("mel band is empty");
}

int frame_count(std::size_t samples, const FeConfig& cfg) {
  const auto window = static_cast<std::size_t>(cfg.window_samples);
  if (samples < window) return 0;
  return static_cast<int>((samples - window) / static_cast<std::size_t>(cfg.stride_samples)) + 1;
}

Matrix frame_signal(const AudioClip& clip, const FeConfig& cfg, Window window) {
  cfg.validate();
  const int frames = frame_count(clip.samples.size(), cfg);
  if (frames == 0) {
    throw InputTooShort("clip of " + std::to_string(clip.samples.size()) +
                        " samples is shorter than one " + std::to_string(cfg.window_samples) +
                        "-sample window");
  }
  const int n = cfg.window_samples;
  RowVector taper = RowVector::Ones(n);
  if (window == Window::kHann) {
    // periodic Hann
    for (int i = 0; i < n; ++i) taper[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
  }
  Matrix out(frames, n);
  for (int t = 0; t < frames; ++t) {
    const float* src = clip.samples.data() + static_cast<std::size_t>(t) * cfg.stride_samples;
    for (int i = 0; i < n; ++i) out(t, i) = static_cast<double>(src[i]) * taper[i];
  }
  return out;
}

Matrix stft_magnitude(const Matrix& windows, const FeConfig& cfg) {
  const int n = cfg.window_samples;
  if (windows.cols() != n) throw InvalidArgument("stft_magnitude: window length mismatch");
  const int bins = n / 2 + 1;
  fftw_plan plan = r2c_plan(n);
  FftwBuffer<double> in(static_cast<double*>(fftw_malloc(sizeof(double) * n)));
  FftwBuffer<fftw_complex> out(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * bins)));
  Matrix mag(windows.rows(), bins);
  for (Eigen::Index t = 0; t < windows.rows(); ++t) {
    std::memcpy(in.get(), windows.row(t).data(), sizeof(double) * n);
    fftw_execute_dft_r2c(plan, in.get(), out.get());
    for (int k = 0; k < bins; ++k) mag(t, k) = std::hypot(out[k][0], out[k][1]);
  }
  return mag;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

Matrix mel_filterbank(const FeConfig& cfg) {
  cfg.validate();
  const double lo = hz_to_mel(cfg.mel_low_hz);
  const double hi = hz_to_mel(cfg.mel_high_hz);
  std::vector<double> edges(cfg.n_mels + 2);
  for (int i = 0; i < cfg.n_mels + 2; ++i) {
    edges[i] = mel_to_hz(lo + (hi - lo) * i / (cfg.n_mels + 1));
  }
  const double bin_hz = static_cast<double>(kSampleRate) / cfg.window_samples;
  Matrix fb = Matrix::Zero(cfg.n_mels, cfg.n_fft_bins);
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double left = edges[m], centre = edges[m + 1], right = edges[m + 2];
    for (int k = 0; k < cfg.n_fft_bins; ++k) {
      const double f = k * bin_hz;
      double w = 0.0;
      if (f > left && f <= centre) w = (f - left) / (centre - left);
      else if (f > centre && f < right) w = (right - f) / (right - centre);
      fb(m, k) = w;
    }
  }
  return fb;
}

Matrix log_mel(const Matrix& magnitude, const Matrix& filterbank, const FeConfig& cfg) {
  if (magnitude.cols() != filterbank.cols()) throw InvalidArgument("log_mel: bin count mismatch");
  const Matrix energies = magnitude.array().square().matrix() * filterbank.transpose();
  return energies.array().max(cfg.log_floor).log().matrix();
}

Matrix mfcc(const Matrix& log_mel_frames, const FeConfig& cfg) {
  const int m = cfg.n_mels;
  if (log_mel_frames.cols() != m) throw InvalidArgument("mfcc: expected n_mels columns");
  // orthonormal DCT-II basis, one column per kept coefficient
  Matrix basis(m, cfg.n_mfcc);
  for (int k = 0; k < cfg.n_mfcc; ++k) {
    const double scale = k == 0 ? std::sqrt(1.0 / m) : std::sqrt(2.0 / m);
    for (int n = 0; n < m; ++n) {
      basis(n, k) = scale * std::cos(std::numbers::pi * k * (2.0 * n + 1.0) / (2.0 * m));
    }
  }
  return log_mel_frames * basis;
}

Standardization Standardization::fit(std::span<const Matrix> corpus) {
  if (corpus.empty()) throw InvalidArgument("Standardization::fit: empty corpus");
  const Eigen::Index dims = corpus.front().cols();
  RowVector sum = RowVector::Zero(dims);
  double rows = 0;
  for (const auto& m : corpus) {
    if (m.cols() != dims) throw InvalidArgument("Standardization::fit: dimension mismatch");
    sum += m.colwise().sum();
    rows += static_cast<double>(m.rows());
  }
  if (rows < 1) throw InvalidArgument("Standardization::fit: no frames");
  Standardization s;
  s.mean = sum / rows;
  RowVector sq = RowVector::Zero(dims);
  for (const auto& m : corpus) sq += (m.rowwise() - s.mean).array().square().colwise().sum().matrix();
  s.stddev = (sq / rows).array().sqrt().matrix();
  for (Eigen::Index k = 0; k < dims; ++k) {
    if (s.stddev[k] < 1e-8) s.stddev[k] = 1.0;
  }
  return s;
}

Standardization Standardization::identity(int dims) {
  return {RowVector::Zero(dims), RowVector::Ones(dims)};
}

Matrix Standardization::apply(const Matrix& frames) const {
  if (frames.cols() != mean.size()) throw InvalidArgument("Standardization::apply: dimension mismatch");
  return (frames.rowwise() - mean).array().rowwise() / stddev.array();
}

FeatureExtractor::FeatureExtractor(FeConfig cfg) : cfg_(cfg), filterbank_(mel_filterbank(cfg_)) {}

FeatureSequence FeatureExtractor::extract(const AudioClip& clip) const {
  if (clip.sample_rate != kSampleRate) {
    throw UnsupportedFormat("expected " + std::to_string(kSampleRate) + " Hz audio, got " +
                            std::to_string(clip.sample_rate));
  }
  const Matrix windows = frame_signal(clip, cfg_);
  const Matrix lm = log_mel(stft_magnitude(windows, cfg_), filterbank_, cfg_);
  FeatureSequence seq;
  seq.frames.resize(lm.rows(), cfg_.feature_dim());
  seq.frames.leftCols(cfg_.n_mels) = lm;
  seq.frames.rightCols(cfg_.n_mfcc) = mfcc(lm, cfg_);
  return seq;
}

FeatureSequence FeatureExtractor::extract(const AudioClip& clip, const Standardization& norm) const {
  FeatureSequence seq = extract(clip);
  seq.frames = norm.apply(seq.frames);
  return seq;
}

FeatureSequence extract_features(const AudioClip& clip, const FeConfig& cfg) {
  return FeatureExtractor(cfg).extract(clip);
}

FeatureSequence extract_features(const AudioClip& clip, const FeConfig& cfg,
                                 const Standardization& norm) {
  return FeatureExtractor(cfg).extract(clip, norm);
}

// ---------------------------------------------------------------------------
// WAV

namespace {

std::uint32_t le32(const unsigned char* p) {
  return std::uint32_t{p[0]} | std::uint32_t{p[1]} << 8 | std::uint32_t{p[2]} << 16 |
         std::uint32_t{p[3]} << 24;
}
std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | p[1] << 8);
}
void put32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>(v >> 8));
}

}  // namespace

AudioClip read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string name = path.string();
  if (bytes.size() < 12) throw TruncatedFile(name + ": too short for a RIFF header");
  if (std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw BadMagic(name + ": not a RIFF/WAVE file");
  }
  bool have_fmt = false;
  AudioClip clip;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint32_t size = le32(bytes.data() + pos + 4);
    const unsigned char* body = bytes.data() + pos + 8;
    if (pos + 8 + size > bytes.size()) throw TruncatedFile(name + ": chunk runs past end of file");
    if (std::memcmp(bytes.data() + pos, "fmt ", 4) == 0) {
      if (size < 16) throw TruncatedFile(name + ": short fmt chunk");
      const auto format = le16(body), channels = le16(body + 2), bits = le16(body + 14);
      clip.sample_rate = static_cast<int>(le32(body + 4));
      if (format != 1 || channels != 1 || bits != 16) {
        throw UnsupportedFormat(name + ": only 16-bit mono PCM is supported");
      }
      if (clip.sample_rate != kSampleRate) {
        throw UnsupportedFormat(name + ": sample rate " + std::to_string(clip.sample_rate) +
                                " Hz, expected 16000 Hz (no resampling)");
      }
      have_fmt = true;
    } else if (std::memcmp(bytes.data() + pos, "data", 4) == 0) {
      if (!have_fmt) throw UnsupportedFormat(name + ": data chunk before fmt chunk");
      clip.samples.resize(size / 2);
      for (std::size_t i = 0; i < clip.samples.size(); ++i) {
        const auto v = static_cast<std::int16_t>(le16(body + 2 * i));
        clip.samples[i] = static_cast<float>(v) / 32768.0f;
      }
      return clip;
    }
    pos += 8 + size + (size & 1);
  }
  throw TruncatedFile(name + ": no data chunk");
}

void write_wav(const std::filesystem::path& path, const AudioClip& clip) {
  if (clip.sample_rate != kSampleRate) throw UnsupportedFormat("write_wav: expected 16 kHz clip");
  const auto data_bytes = static_cast<std::uint32_t>(clip.samples.size() * 2);
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  put32(out, 16);
  put16(out, 1);
  put16(out, 1);
  put32(out, kSampleRate);
  put32(out, kSampleRate * 2);
  put16(out, 2);
  put16(out, 16);
  out += "data";
  put32(out, data_bytes);
  for (float s : clip.samples) {
    const float clamped = std::clamp(s, -1.0f, 1.0f);
    const auto v = static_cast<std::int16_t>(std::lround(clamped * 32767.0f));
    put16(out, static_cast<std::uint16_t>(v));
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot create " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("write failed for " + path.string());
}

}  // namespace asrbench::features
