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

#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "asrbench/error.hpp"
#include "asrbench/features/features.hpp"
#include "doctest.h"

using namespace asrbench;
using namespace asrbench::features;

namespace {

AudioClip noise_clip(std::size_t n, std::uint64_t seed, float amp = 0.5f) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> d(-amp, amp);
  AudioClip c;
  c.samples.resize(n);
  for (auto& s : c.samples) s = d(rng);
  return c;
}

// O(N^2) DFT magnitude, independent of FFTW.
std::vector<double> dft_magnitude(const Matrix& row) {
  const auto n = row.cols();
  std::vector<double> out(n / 2 + 1);
  for (Eigen::Index k = 0; k <= n / 2; ++k) {
    std::complex<double> acc = 0;
    for (Eigen::Index t = 0; t < n; ++t) {
      acc += row(0, t) * std::polar(1.0, -2.0 * std::numbers::pi * double(k * t) / double(n));
    }
    out[k] = std::abs(acc);
  }
  return out;
}

}  // namespace

TEST_CASE("frame_signal counts") {
  FeConfig cfg;
  CHECK(frame_signal(noise_clip(16000, 1), cfg).rows() == 97);
  CHECK(frame_signal(noise_clip(512, 1), cfg).rows() == 1);
  CHECK_THROWS_AS(frame_signal(noise_clip(511, 1), cfg), InputTooShort);

  std::mt19937_64 rng(4);
  std::uniform_int_distribution<std::size_t> len(512, 10 * 16000);
  for (int i = 0; i < 200; ++i) {
    const std::size_t n = len(rng);
    CHECK(frame_count(n, cfg) == static_cast<int>((n - 512) / 160 + 1));
  }
}

TEST_CASE("stft_magnitude") {
  FeConfig cfg;
  SUBCASE("zero signal") {
    CHECK(stft_magnitude(Matrix::Zero(2, 512), cfg).isZero(0.0));
  }
  SUBCASE("bin-centred tone concentrates in its bin") {
    const int k = 37;
    Matrix w(1, 512);
    for (int t = 0; t < 512; ++t) w(0, t) = std::sin(2 * std::numbers::pi * k * t / 512.0);
    const Matrix mag = stft_magnitude(w, cfg);
    const double total = mag.array().square().sum();
    CHECK(mag(0, k) * mag(0, k) / total > 0.95);
  }
  SUBCASE("impulse has a flat spectrum") {
    Matrix w = Matrix::Zero(1, 512);
    w(0, 0) = 1.0;
    const Matrix mag = stft_magnitude(w, cfg);
    CHECK((mag.array() - 1.0).abs().maxCoeff() < 1e-12);
  }
  SUBCASE("matches a direct DFT on random windows") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> d(-1, 1);
    for (int trial = 0; trial < 5; ++trial) {
      Matrix w(1, 512);
      for (int t = 0; t < 512; ++t) w(0, t) = d(rng);
      const Matrix mag = stft_magnitude(w, cfg);
      const auto ref = dft_magnitude(w);
      for (int b = 0; b < 257; ++b) CHECK(std::abs(mag(0, b) - ref[b]) < 1e-8);
      // Parseval over the one-sided spectrum
      double spec = mag(0, 0) * mag(0, 0) + mag(0, 256) * mag(0, 256);
      for (int b = 1; b < 256; ++b) spec += 2 * mag(0, b) * mag(0, b);
      CHECK(spec / 512.0 == doctest::Approx(w.squaredNorm()).epsilon(1e-10));
    }
  }
  CHECK_THROWS_AS(stft_magnitude(Matrix::Zero(1, 400), cfg), InvalidArgument);
}

TEST_CASE("mel filterbank") {
  FeConfig cfg;
  const Matrix fb = mel_filterbank(cfg);
  REQUIRE(fb.rows() == 80);
  REQUIRE(fb.cols() == 257);
  CHECK(fb.minCoeff() >= 0.0);
  CHECK(fb.rowwise().sum().minCoeff() > 0.0);
  CHECK(hz_to_mel(1000.0) == doctest::Approx(999.99).epsilon(1e-4));
  CHECK(mel_to_hz(hz_to_mel(4321.0)) == doctest::Approx(4321.0));

  Eigen::Index prev = -1;
  Eigen::Index first_peak = 0, last_peak = 0;
  for (int m = 0; m < 80; ++m) {
    Eigen::Index peak;
    fb.row(m).maxCoeff(&peak);
    CHECK(peak >= prev);
    prev = peak;
    if (m == 0) first_peak = peak;
    last_peak = peak;
  }
  const nn::RowVector cover = fb.colwise().sum();
  for (Eigen::Index k = first_peak; k <= last_peak; ++k) CHECK(cover[k] > 0.0);
}

TEST_CASE("log_mel") {
  FeConfig cfg;
  const Matrix fb = mel_filterbank(cfg);
  const Matrix zero = log_mel(Matrix::Zero(3, 257), fb, cfg);
  CHECK((zero.array() - std::log(1e-10)).abs().maxCoeff() < 1e-12);

  const AudioClip clip = noise_clip(4000, 3);
  AudioClip doubled = clip;
  for (auto& s : doubled.samples) s *= 2.0f;
  const Matrix a = log_mel(stft_magnitude(frame_signal(clip, cfg), cfg), fb, cfg);
  const Matrix b = log_mel(stft_magnitude(frame_signal(doubled, cfg), cfg), fb, cfg);
  CHECK(((b - a).array() - 2 * std::log(2.0)).abs().maxCoeff() < 1e-9);

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> d(0, 1);
  Matrix mag(1, 257);
  for (int k = 0; k < 257; ++k) mag(0, k) = d(rng);
  const Matrix base = log_mel(mag, fb, cfg);
  for (int k = 0; k < 257; k += 16) {
    Matrix raised = mag;
    raised(0, k) += 0.5;
    CHECK(((log_mel(raised, fb, cfg) - base).array() >= 0).all());
  }
}

TEST_CASE("mfcc") {
  FeConfig cfg;
  const Matrix flat = Matrix::Constant(1, 80, 2.5);
  const Matrix c = mfcc(flat, cfg);
  CHECK(c(0, 0) == doctest::Approx(2.5 * std::sqrt(80.0)));
  CHECK(c.rightCols(12).cwiseAbs().maxCoeff() < 1e-12);

  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> d(-3, 3);
  Matrix a(2, 80), b(2, 80);
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    a.data()[i] = d(rng);
    b.data()[i] = d(rng);
  }
  CHECK((mfcc(a + b, cfg) - mfcc(a, cfg) - mfcc(b, cfg)).cwiseAbs().maxCoeff() < 1e-12);

  for (int k = 1; k < 13; ++k) {
    Matrix v(1, 80);
    for (int n = 0; n < 80; ++n) v(0, n) = std::cos(std::numbers::pi * k * (2 * n + 1) / 160.0);
    const Matrix out = mfcc(v, cfg);
    for (int j = 0; j < 13; ++j) {
      if (j == k) CHECK(std::abs(out(0, j)) > 1.0);
      else CHECK(std::abs(out(0, j)) < 1e-12);
    }
  }
}

TEST_CASE("extract_features") {
  FeConfig cfg;
  const AudioClip clip = noise_clip(16000, 9);
  const FeatureSequence f = extract_features(clip, cfg);
  REQUIRE(f.frames.rows() == 97);
  REQUIRE(f.frames.cols() == 93);
  CHECK((f.frames.rightCols(13) - mfcc(f.frames.leftCols(80), cfg)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(extract_features(clip, cfg).frames == f.frames);

  AudioClip other_rate = clip;
  other_rate.sample_rate = 8000;
  CHECK_THROWS_AS(extract_features(other_rate, cfg), UnsupportedFormat);
}

TEST_CASE("features stay finite for silence and clipping") {
  FeConfig cfg;
  AudioClip silence;
  silence.samples.assign(3000, 0.0f);
  CHECK(extract_features(silence, cfg).frames.allFinite());
  AudioClip clipped;
  clipped.samples.resize(3000);
  for (std::size_t i = 0; i < clipped.samples.size(); ++i) clipped.samples[i] = (i / 7) % 2 ? 1.0f : -1.0f;
  CHECK(extract_features(clipped, cfg).frames.allFinite());
}

TEST_CASE("shifting by one stride shifts features by one frame") {
  FeConfig cfg;
  const AudioClip clip = noise_clip(8000, 21);
  AudioClip shifted;
  shifted.samples.assign(160, 0.25f);
  shifted.samples.insert(shifted.samples.end(), clip.samples.begin(), clip.samples.end());
  const Matrix a = extract_features(clip, cfg).frames;
  const Matrix b = extract_features(shifted, cfg).frames;
  REQUIRE(b.rows() == a.rows() + 1);
  CHECK((b.bottomRows(a.rows()) - a).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("standardization") {
  std::vector<Matrix> corpus{(Matrix(2, 2) << 1, 5, 3, 5).finished(), (Matrix(1, 2) << 2, 5).finished()};
  const auto s = Standardization::fit(corpus);
  CHECK(s.mean(0) == doctest::Approx(2.0));
  CHECK(s.stddev(1) == doctest::Approx(1.0));  // constant column left unscaled
  const Matrix z = s.apply(corpus[0]);
  CHECK(z(0, 0) == doctest::Approx(-1.0 / std::sqrt(2.0 / 3.0)));
  CHECK(z(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("wav round trip and rejection") {
  const auto dir = std::filesystem::temp_directory_path() / "asrbench_wav_test";
  std::filesystem::create_directories(dir);
  AudioClip clip = noise_clip(1000, 2, 0.9f);
  write_wav(dir / "a.wav", clip);
  const AudioClip back = read_wav(dir / "a.wav");
  REQUIRE(back.samples.size() == clip.samples.size());
  for (std::size_t i = 0; i < clip.samples.size(); ++i) CHECK(std::abs(back.samples[i] - clip.samples[i]) < 1e-4);

  {  // patch the sample rate field to 8 kHz
    std::fstream f(dir / "a.wav", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(24);
    const char rate[4] = {0x40, 0x1f, 0, 0};
    f.write(rate, 4);
  }
  CHECK_THROWS_AS(read_wav(dir / "a.wav"), UnsupportedFormat);
  {
    std::ofstream f(dir / "b.wav", std::ios::binary);
    f << "not a wav file at all";
  }
  CHECK_THROWS_AS(read_wav(dir / "b.wav"), BadMagic);
  CHECK_THROWS_AS(read_wav(dir / "missing.wav"), IoError);
  std::filesystem::remove_all(dir);
}
