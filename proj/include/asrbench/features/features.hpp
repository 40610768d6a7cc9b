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

#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "asrbench/nn/tensor.hpp"

namespace asrbench::features {

using nn::Matrix;
using nn::RowVector;

inline constexpr int kSampleRate = 16000;
inline constexpr int kFeatureDim = 93;

/// Mono PCM in [-1, 1].
struct AudioClip {
  std::vector<float> samples;
  int sample_rate = kSampleRate;

  double duration_ms() const {
    return 1000.0 * static_cast<double>(samples.size()) / sample_rate;
  }
};

struct FeConfig {
  int window_samples = 512;  // 32 ms
  int stride_samples = 160;  // 10 ms
  int n_fft_bins = 257;
  int n_mels = 80;
  int n_mfcc = 13;
  double log_floor = 1e-10;
  double mel_low_hz = 0.0;
  double mel_high_hz = 8000.0;

  int feature_dim() const { return n_mels + n_mfcc; }
  void validate() const;
};

enum class Window { kHann, kRectangular };

/// floor((len - window) / stride) + 1, or 0 when the clip is shorter than
/// one window.
int frame_count(std::size_t samples, const FeConfig& cfg);

/// One row per analysis window. Throws InputTooShort below one window.
Matrix frame_signal(const AudioClip& clip, const FeConfig& cfg, Window window = Window::kHann);

/// Magnitudes of the real FFT of each row, bins 0..window/2.
Matrix stft_magnitude(const Matrix& windows, const FeConfig& cfg);

/// HTK mel scale.
double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// n_mels x n_fft_bins matrix of triangular filters.
Matrix mel_filterbank(const FeConfig& cfg);

/// ln(max(power * filterbank^T, log_floor)) where power = magnitude^2.
Matrix log_mel(const Matrix& magnitude, const Matrix& filterbank, const FeConfig& cfg);

/// First n_mfcc coefficients of the orthonormal DCT-II of each row.
Matrix mfcc(const Matrix& log_mel_frames, const FeConfig& cfg);

/// Per-column affine standardisation fitted on a corpus.
struct Standardization {
  RowVector mean;
  RowVector stddev;

  static Standardization fit(std::span<const Matrix> corpus);
  static Standardization identity(int dims);
  Matrix apply(const Matrix& frames) const;
};

/// [T x 93]: columns 0-79 log-mel, 80-92 MFCC.
struct FeatureSequence {
  Matrix frames;
  int frame_count() const { return static_cast<int>(frames.rows()); }
};

/// Holds the filterbank and DCT basis so they are built once and shared
/// read-only across threads.
class FeatureExtractor {
 public:
  explicit FeatureExtractor(FeConfig cfg = {});

  const FeConfig& config() const { return cfg_; }
  const Matrix& filterbank() const { return filterbank_; }

  /// Unstandardised features.
  FeatureSequence extract(const AudioClip& clip) const;
  FeatureSequence extract(const AudioClip& clip, const Standardization& norm) const;

 private:
  FeConfig cfg_;
  Matrix filterbank_;
};

FeatureSequence extract_features(const AudioClip& clip, const FeConfig& cfg);
FeatureSequence extract_features(const AudioClip& clip, const FeConfig& cfg,
                                 const Standardization& norm);

/// 16-bit little-endian mono PCM WAV at 16 kHz. Other layouts are rejected
/// with UnsupportedFormat; there is no resampling.
AudioClip read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, const AudioClip& clip);

}  // namespace asrbench::features
